//! C ABI for the BBMA simulator core.
//!
//! Every fallible call returns a [`BbmaStatus`]; on failure the message is
//! kept per thread and can be read with [`bbma_last_error`]. Handles are
//! opaque and must be released with their `_free` function. Panics are
//! caught at the boundary and reported as `BBMA_STATUS_INTERNAL`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use bbma_core::channel::{self, ArrayGeometry, CellConfig, LinkGain, Terminal};
use bbma_core::null_steering::{ClassSelectorRow, NullSteerer, Solver, SolverOptions, SteeringMatrix};
use bbma_core::p2p;
use bbma_core::power;
use bbma_core::scheduler::{self, ClassState, DemandVector, SymbolAlphabet};
use bbma_core::Error;

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    RankDeficient = 4,
    IllConditioned = 5,
    Singular = 6,
    Internal = 7,
}

/// `solver` argument of [`bbma_steerer_new`].
pub const BBMA_SOLVER_EXPLICIT_INVERSE: i32 = 0;
pub const BBMA_SOLVER_ORTHOGONAL_FACTORIZATION: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BbmaStatus {
    match e {
        Error::RankDeficient { .. } => BbmaStatus::RankDeficient,
        Error::IllConditioned { .. } => BbmaStatus::IllConditioned,
        Error::Singular => BbmaStatus::Singular,
        Error::DimensionMismatch { .. } => BbmaStatus::DimensionMismatch,
        _ => BbmaStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (BbmaStatus, String)>) -> BbmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BbmaStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic in bbma core");
            BbmaStatus::Internal
        }
    }
}

fn core(e: Error) -> (BbmaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (BbmaStatus, String) {
    (BbmaStatus::NullPointer, format!("{name} is null"))
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (BbmaStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], (BbmaStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bbma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library name and version, static storage.
#[no_mangle]
pub extern "C" fn bbma_version() -> *const c_char {
    concat!("bbma-core ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Prepared null-steering weights for one drop.
pub struct BbmaSteerer {
    inner: NullSteerer,
}

/// Builds a steerer for `n_terminals` ground positions (`x, y, z` triples
/// in metres, access point at `(0, 0, ap_height_m)`) seen by an `nx` by `ny`
/// array with `spacing_wavelengths` element spacing.
#[no_mangle]
pub unsafe extern "C" fn bbma_steerer_new(
    nx: usize,
    ny: usize,
    spacing_wavelengths: f64,
    ap_height_m: f64,
    positions_xyz: *const f64,
    n_terminals: usize,
    solver: i32,
    condition_ceiling: f64,
    out: *mut *mut BbmaSteerer,
) -> BbmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let solver = match solver {
            BBMA_SOLVER_EXPLICIT_INVERSE => Solver::ExplicitInverse,
            BBMA_SOLVER_ORTHOGONAL_FACTORIZATION => Solver::OrthogonalFactorization,
            other => return Err((BbmaStatus::InvalidArgument, format!("unknown solver {other}"))),
        };
        if n_terminals == 0 {
            return Err((BbmaStatus::InvalidArgument, "need at least one terminal".into()));
        }
        let array = ArrayGeometry::new(nx, ny, spacing_wavelengths).map_err(core)?;
        let cell = CellConfig { ap_height_m, ..CellConfig::default() };
        let coords = input(positions_xyz, 3 * n_terminals, "positions_xyz")?;
        let terminals: Vec<Terminal> = coords
            .chunks_exact(3)
            .enumerate()
            .map(|(id, p)| Terminal { id, position: [p[0], p[1], p[2]], shadowing_db: 0.0 })
            .collect();
        let a = SteeringMatrix::build(&array, &cell, &terminals).map_err(core)?;
        let options = SolverOptions { solver, condition_ceiling, refine: false };
        let inner = NullSteerer::new(&a, options).map_err(core)?;
        *out = Box::into_raw(Box::new(BbmaSteerer { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bbma_steerer_free(steerer: *mut BbmaSteerer) {
    if !steerer.is_null() {
        drop(Box::from_raw(steerer));
    }
}

#[no_mangle]
pub unsafe extern "C" fn bbma_steerer_antennas(steerer: *const BbmaSteerer) -> usize {
    steerer.as_ref().map_or(0, |s| s.inner.antennas())
}

/// κ₂(AᴴA) of the steerer's steering matrix.
#[no_mangle]
pub unsafe extern "C" fn bbma_steerer_condition_number(steerer: *const BbmaSteerer, out: *mut f64) -> BbmaStatus {
    guard(|| {
        let s = steerer.as_ref().ok_or_else(|| null("steerer"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.inner.condition_number();
        Ok(())
    })
}

/// Weights with unit response at terminals whose `selector` byte is
/// non-zero and nulls at the rest. Writes `antennas` real and imaginary
/// parts.
#[no_mangle]
pub unsafe extern "C" fn bbma_steerer_weights(
    steerer: *const BbmaSteerer,
    selector: *const u8,
    n_terminals: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    antennas: usize,
) -> BbmaStatus {
    guard(|| {
        let s = steerer.as_ref().ok_or_else(|| null("steerer"))?;
        let selector = input(selector, n_terminals, "selector")?;
        if antennas != s.inner.antennas() {
            return Err(core(Error::DimensionMismatch { expected: s.inner.antennas(), found: antennas }));
        }
        let re = output(out_re, antennas, "out_re")?;
        let im = output(out_im, antennas, "out_im")?;
        let d = ClassSelectorRow::new(selector.iter().map(|&b| b != 0).collect()).map_err(core)?;
        let w = s.inner.weights(&d).map_err(core)?;
        for (k, z) in w.as_vector().iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Class membership tracked across symbol-times.
pub struct BbmaScheduler {
    state: ClassState,
}

/// `membership[i]` is terminal i's class in `0..order`. Classes start bound
/// to the symbol with the same index.
#[no_mangle]
pub unsafe extern "C" fn bbma_scheduler_new(
    membership: *const usize,
    n_terminals: usize,
    order: usize,
    out: *mut *mut BbmaScheduler,
) -> BbmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let membership = input(membership, n_terminals, "membership")?.to_vec();
        let state = ClassState::with_identity_binding(membership, order).map_err(core)?;
        *out = Box::into_raw(Box::new(BbmaScheduler { state }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bbma_scheduler_free(scheduler: *mut BbmaScheduler) {
    if !scheduler.is_null() {
        drop(Box::from_raw(scheduler));
    }
}

/// Serves `demand` (each terminal's next symbol) and updates the state.
/// Non-zero `dynamic` rebinds classes to symbols to minimize moves; zero
/// keeps the current binding. Writes the number of moved terminals.
#[no_mangle]
pub unsafe extern "C" fn bbma_scheduler_step(
    scheduler: *mut BbmaScheduler,
    demand: *const usize,
    n_terminals: usize,
    dynamic: i32,
    out_moves: *mut usize,
) -> BbmaStatus {
    guard(|| {
        let s = scheduler.as_mut().ok_or_else(|| null("scheduler"))?;
        let alphabet = SymbolAlphabet::new(s.state.order()).map_err(core)?;
        let demand = DemandVector::new(input(demand, n_terminals, "demand")?.to_vec(), alphabet).map_err(core)?;
        let plan = if dynamic != 0 {
            scheduler::dynamic_assign(&s.state, &demand)
        } else {
            scheduler::static_assign(&s.state, &demand)
        }
        .map_err(core)?;
        s.state = scheduler::apply(&s.state, &plan).map_err(core)?;
        if let Some(m) = out_moves.as_mut() {
            *m = plan.move_count();
        }
        Ok(())
    })
}

/// Copies each terminal's class.
#[no_mangle]
pub unsafe extern "C" fn bbma_scheduler_membership(
    scheduler: *const BbmaScheduler,
    out: *mut usize,
    n_terminals: usize,
) -> BbmaStatus {
    guard(|| {
        let s = scheduler.as_ref().ok_or_else(|| null("scheduler"))?;
        if n_terminals != s.state.terminals() {
            return Err(core(Error::DimensionMismatch { expected: s.state.terminals(), found: n_terminals }));
        }
        output(out, n_terminals, "out")?.copy_from_slice(s.state.membership());
        Ok(())
    })
}

/// Copies the symbol each class currently carries.
#[no_mangle]
pub unsafe extern "C" fn bbma_scheduler_symbol_of_class(
    scheduler: *const BbmaScheduler,
    out: *mut usize,
    order: usize,
) -> BbmaStatus {
    guard(|| {
        let s = scheduler.as_ref().ok_or_else(|| null("scheduler"))?;
        if order != s.state.order() {
            return Err(core(Error::DimensionMismatch { expected: s.state.order(), found: order }));
        }
        output(out, order, "out")?.copy_from_slice(s.state.symbol_of_class());
        Ok(())
    })
}

/// Total power in watts for per-terminal allocation hitting
/// `target_sinr_linear` on every link with perfectly orthogonal channels.
#[no_mangle]
pub unsafe extern "C" fn bbma_conventional_power(
    gains_linear: *const f64,
    n_terminals: usize,
    target_sinr_linear: f64,
    noise_w: f64,
    out_total_w: *mut f64,
) -> BbmaStatus {
    guard(|| {
        let gains = input(gains_linear, n_terminals, "gains_linear")?
            .iter()
            .map(|&g| LinkGain::new(g))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core)?;
        let out = out_total_w.as_mut().ok_or_else(|| null("out_total_w"))?;
        *out = power::conventional_alloc(&gains, target_sinr_linear, noise_w, f64::INFINITY).total_w;
        Ok(())
    })
}

/// Thermal noise power in watts over `bandwidth_hz` behind a receiver with
/// the given noise figure.
#[no_mangle]
pub extern "C" fn bbma_noise_power_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let cell = CellConfig { bandwidth_hz, noise_figure_db, ..CellConfig::default() };
    channel::noise_power(&cell)
}

/// Symbol error probability of M-PSK at the given Es/N0 (linear).
#[no_mangle]
pub unsafe extern "C" fn bbma_mpsk_ser(order: u64, es_n0: f64, out: *mut f64) -> BbmaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = p2p::mpsk_ser(order, es_n0).map_err(core)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(bbma_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn error_message_is_per_call() {
        let mut v = 0.0;
        assert_eq!(unsafe { bbma_mpsk_ser(3, 10.0, &mut v) }, BbmaStatus::InvalidArgument);
        assert!(last_error().contains("power of two"));
        assert_eq!(unsafe { bbma_mpsk_ser(2, 10.0, &mut v) }, BbmaStatus::Ok);
        assert_eq!(last_error(), "");
    }

    #[test]
    fn null_out_pointer_is_reported() {
        assert_eq!(unsafe { bbma_mpsk_ser(2, 1.0, ptr::null_mut()) }, BbmaStatus::NullPointer);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Singular), BbmaStatus::Singular);
        assert_eq!(status_of(&Error::IllConditioned { condition: 2.0, ceiling: 1.0 }), BbmaStatus::IllConditioned);
        assert_eq!(status_of(&Error::Config("x".into())), BbmaStatus::InvalidArgument);
    }
}
