//! Null-steering weights for symbol classes.
//!
//! For a steering matrix `A` (antennas × terminals) and a 0/1 class selector
//! row `D`, the class weights satisfy `wᴴ = D (AᴴA)⁻¹ Aᴴ`: unit response at
//! every selected terminal and a null at every other one. This is the
//! minimum-norm solution of `wᴴA = D`.
//!
//! Two solver paths are kept side by side. [`Solver::ExplicitInverse`] forms
//! `(AᴴA)⁻¹` the textbook way and inherits the squared conditioning of the
//! Gram matrix. [`Solver::OrthogonalFactorization`] works from the thin QR
//! factors of `A` and never forms the Gram matrix.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::channel::{steering_vector, ArrayGeometry, CellConfig, Terminal};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

/// Default ceiling on κ₂(AᴴA) beyond which weights are refused.
pub const DEFAULT_CONDITION_CEILING: f64 = 1e12;

const UNIT_MODULUS_TOLERANCE: f64 = 1e-12;

/// Steering vectors of all terminals as the columns of an `s × N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix(CMatrix);

impl SteeringMatrix {
    /// Column `n` is the steering vector towards `terminals[n]`.
    pub fn build(array: &ArrayGeometry, cell: &CellConfig, terminals: &[Terminal]) -> Result<Self> {
        if terminals.is_empty() {
            return Err(Error::InvalidArgument("steering matrix needs at least one terminal".into()));
        }
        let columns = terminals
            .iter()
            .map(|t| cell.direction(t).map(|u| steering_vector(array, u)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self(CMatrix::from_columns(&columns)))
    }

    /// Wraps an existing matrix after checking every entry has unit modulus.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.ncols() == 0 || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("steering matrix cannot be empty".into()));
        }
        if let Some(z) = matrix.iter().find(|z| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOLERANCE) {
            return Err(Error::InvalidArgument(format!(
                "steering entries must have unit modulus, found |{z}| = {}",
                z.norm()
            )));
        }
        Ok(Self(matrix))
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn terminals(&self) -> usize {
        self.0.ncols()
    }

    pub fn column(&self, n: usize) -> CVector {
        self.0.column(n).into_owned()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// 0/1 row marking the terminals of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSelectorRow(Vec<bool>);

impl ClassSelectorRow {
    pub fn new(entries: Vec<bool>) -> Result<Self> {
        if !entries.iter().any(|&e| e) {
            return Err(Error::InvalidArgument("class selector selects no terminal".into()));
        }
        Ok(Self(entries))
    }

    /// Selector for `class` given a terminal → class membership map, or
    /// `None` if the class is empty.
    pub fn from_membership(membership: &[usize], class: usize) -> Option<Self> {
        let entries: Vec<bool> = membership.iter().map(|&c| c == class).collect();
        entries.iter().any(|&e| e).then_some(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_selected(&self, n: usize) -> bool {
        self.0[n]
    }

    pub fn entries(&self) -> &[bool] {
        &self.0
    }

    fn as_vector(&self) -> CVector {
        CVector::from_iterator(
            self.0.len(),
            self.0.iter().map(|&e| Complex::new(if e { 1.0 } else { 0.0 }, 0.0)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(CVector);

impl WeightVector {
    pub fn new(entries: CVector) -> Result<Self> {
        if entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::Singular)
        }
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// ‖w‖², the radiated power per unit of class power.
    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    ExplicitInverse,
    OrthogonalFactorization,
}

impl Solver {
    pub const ALL: [Solver; 2] = [Solver::ExplicitInverse, Solver::OrthogonalFactorization];

    pub fn as_str(self) -> &'static str {
        match self {
            Solver::ExplicitInverse => "explicit_inverse",
            Solver::OrthogonalFactorization => "orthogonal_factorization",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub solver: Solver,
    /// Largest accepted κ₂(AᴴA).
    pub condition_ceiling: f64,
    /// One step of iterative refinement after the solve.
    pub refine: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            solver: Solver::OrthogonalFactorization,
            condition_ceiling: DEFAULT_CONDITION_CEILING,
            refine: false,
        }
    }
}

impl SolverOptions {
    pub fn with_solver(solver: Solver) -> Self {
        Self { solver, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullDiagnostics {
    /// κ₂(AᴴA); `f64::INFINITY` for a rank-deficient `A`.
    pub condition_number: f64,
    /// max |wᴴaₙ − 1| over selected terminals.
    pub max_in_class_error: f64,
    /// max |wᴴaₖ| over deselected terminals.
    pub max_null_residual: f64,
}

#[derive(Debug, Clone)]
enum Factor {
    Inverse(CMatrix),
    Qr(Householder),
}

/// Thin Householder QR that keeps its reflectors, so `Q` is applied to a
/// vector in O(sN) without ever being formed.
#[derive(Debug, Clone)]
struct Householder {
    /// Column k holds the unit reflector in rows k.. (rows above are unused).
    reflectors: CMatrix,
    r: CMatrix,
}

impl Householder {
    fn new(a: &CMatrix) -> Self {
        let (m, n) = a.shape();
        let mut work = a.clone();
        let mut r = CMatrix::zeros(n, n);
        let data = work.as_mut_slice();
        for k in 0..n {
            let (left, right) = data.split_at_mut((k + 1) * m);
            let v = &mut left[k * m + k..];
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { Complex::new(1.0, 0.0) };
            let alpha = -phase * norm;
            v[0] -= alpha;
            let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if v_norm > 0.0 {
                v.iter_mut().for_each(|z| *z /= v_norm);
            }
            r[(k, k)] = alpha;
            for (j, col) in right.chunks_exact_mut(m).enumerate() {
                let tail = &mut col[k..];
                reflect(v, tail);
                r[(k, k + 1 + j)] = tail[0];
            }
        }
        Self { reflectors: work, r }
    }

    /// `Q y` for `y` of length N.
    fn apply_q(&self, y: &CVector) -> CVector {
        let (m, n) = self.reflectors.shape();
        let mut z = CVector::zeros(m);
        z.rows_mut(0, n).copy_from(y);
        let data = self.reflectors.as_slice();
        let out = z.as_mut_slice();
        for k in (0..n).rev() {
            reflect(&data[k * m + k..(k + 1) * m], &mut out[k..]);
        }
        z
    }
}

/// `x ← (I − 2vvᴴ) x` for a unit `v`.
fn reflect(v: &[Complex<f64>], x: &mut [Complex<f64>]) {
    let t: Complex<f64> = v.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
    let t2 = t * 2.0;
    x.iter_mut().zip(v).for_each(|(b, a)| *b -= a * t2);
}

/// `AᴴA` from the real and imaginary parts, so the products run as real
/// matrix multiplies.
fn gram(a: &CMatrix) -> CMatrix {
    let re = a.map(|z| z.re);
    let im = a.map(|z| z.im);
    let (re_t, im_t) = (re.transpose(), im.transpose());
    let real = &re_t * &re + &im_t * &im;
    let imag = &re_t * &im - &im_t * &re;
    real.zip_map(&imag, Complex::new)
}

/// A steering matrix prepared for repeated weight solves.
///
/// The factorization depends only on `A`, which changes at the rate of
/// terminal movement; each symbol-time then only swaps selector rows.
#[derive(Debug, Clone)]
pub struct NullSteerer {
    a: CMatrix,
    factor: Factor,
    condition: f64,
    options: SolverOptions,
}

/// A steering matrix with its QR factorization and κ₂(AᴴA), computed once
/// and shared by steerers built with different solver options.
#[derive(Debug, Clone)]
pub struct FactoredSteering {
    a: CMatrix,
    qr: Householder,
    condition: f64,
}

impl FactoredSteering {
    pub fn new(a: &SteeringMatrix) -> Result<Self> {
        let (antennas, terminals) = (a.antennas(), a.terminals());
        if terminals > antennas {
            return Err(Error::RankDeficient { terminals, antennas });
        }
        let qr = Householder::new(&a.0);
        let condition = condition_from_triangular(&qr.r);
        Ok(Self { a: a.0.clone(), qr, condition })
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }
}

impl NullSteerer {
    pub fn new(a: &SteeringMatrix, options: SolverOptions) -> Result<Self> {
        Self::from_factored(&FactoredSteering::new(a)?, options)
    }

    pub fn from_factored(f: &FactoredSteering, options: SolverOptions) -> Result<Self> {
        let condition = f.condition;
        if !(condition <= options.condition_ceiling) {
            return Err(Error::IllConditioned { condition, ceiling: options.condition_ceiling });
        }
        let factor = match options.solver {
            Solver::ExplicitInverse => {
                Factor::Inverse(gram(&f.a).try_inverse().ok_or(Error::Singular)?)
            }
            Solver::OrthogonalFactorization => Factor::Qr(f.qr.clone()),
        };
        Ok(Self { a: f.a.clone(), factor, condition, options })
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    pub fn terminals(&self) -> usize {
        self.a.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.a.nrows()
    }

    /// Weights with unit response on the selected terminals and nulls on
    /// the rest.
    pub fn weights(&self, selector: &ClassSelectorRow) -> Result<WeightVector> {
        if selector.len() != self.terminals() {
            return Err(Error::DimensionMismatch { expected: self.terminals(), found: selector.len() });
        }
        let target = selector.as_vector();
        let mut w = self.solve(&target)?;
        if self.options.refine {
            // Aᴴw should equal Dᵀ; D is real so no conjugate is needed.
            let residual = &target - self.a.ad_mul(&w);
            w += self.solve(&residual)?;
        }
        WeightVector::new(w)
    }

    /// `w` such that `Aᴴw = rhs`, with minimum norm.
    fn solve(&self, rhs: &CVector) -> Result<CVector> {
        match &self.factor {
            Factor::Inverse(gram_inv) => Ok(&self.a * (gram_inv * rhs)),
            Factor::Qr(qr) => {
                // Aᴴw = Rᴴ(Qᴴw); take w = Q y with Rᴴ y = rhs.
                let y = qr.r.ad_solve_upper_triangular(rhs).ok_or(Error::Singular)?;
                Ok(qr.apply_q(&y))
            }
        }
    }

    /// The row `wᴴA`: the beam's complex response at every terminal.
    pub fn response_row(&self, w: &WeightVector) -> Result<Vec<Complex<f64>>> {
        response_row(&self.a, w)
    }

    /// Weights for every class after checking the selectors partition the
    /// terminals.
    pub fn class_weights(&self, selectors: &[ClassSelectorRow]) -> Result<Vec<WeightVector>> {
        check_partition(selectors, self.terminals())?;
        selectors.iter().map(|d| self.weights(d)).collect()
    }

    pub fn diagnostics(
        &self,
        weights: &[WeightVector],
        selectors: &[ClassSelectorRow],
    ) -> Result<NullDiagnostics> {
        residuals(&self.a, weights, selectors, self.condition)
    }
}

/// Computes weights for one class selector in a single call.
pub fn compute_weights(
    a: &SteeringMatrix,
    selector: &ClassSelectorRow,
    options: SolverOptions,
) -> Result<WeightVector> {
    NullSteerer::new(a, options)?.weights(selector)
}

/// The scalar response `wᴴa`.
pub fn response(w: &WeightVector, a: &CVector) -> Result<Complex<f64>> {
    if w.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), found: a.len() });
    }
    Ok(w.0.dotc(a))
}

/// κ₂(AᴴA), from the singular values of `A`.
pub fn condition_number(a: &SteeringMatrix) -> f64 {
    if a.terminals() > a.antennas() {
        return f64::INFINITY;
    }
    condition_from_triangular(&Householder::new(&a.0).r)
}

fn condition_from_triangular(r: &CMatrix) -> f64 {
    // R and A share singular values.
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 && max.is_finite() {
        (max / min).powi(2)
    } else {
        f64::INFINITY
    }
}

/// Conditioning and residuals of a set of class weights.
pub fn diagnostics(
    a: &SteeringMatrix,
    weights: &[WeightVector],
    selectors: &[ClassSelectorRow],
) -> Result<NullDiagnostics> {
    residuals(&a.0, weights, selectors, condition_number(a))
}

fn response_row(a: &CMatrix, w: &WeightVector) -> Result<Vec<Complex<f64>>> {
    if w.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: w.len() });
    }
    Ok(a.ad_mul(&w.0).iter().map(|z| z.conj()).collect())
}

fn residuals(
    a: &CMatrix,
    weights: &[WeightVector],
    selectors: &[ClassSelectorRow],
    condition: f64,
) -> Result<NullDiagnostics> {
    if weights.len() != selectors.len() {
        return Err(Error::DimensionMismatch { expected: selectors.len(), found: weights.len() });
    }
    let mut max_in_class_error = 0.0f64;
    let mut max_null_residual = 0.0f64;
    for (w, d) in weights.iter().zip(selectors) {
        if d.len() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.ncols(), found: d.len() });
        }
        for (n, z) in response_row(a, w)?.into_iter().enumerate() {
            if d.is_selected(n) {
                max_in_class_error = max_in_class_error.max((z - 1.0).norm());
            } else {
                max_null_residual = max_null_residual.max(z.norm());
            }
        }
    }
    Ok(NullDiagnostics { condition_number: condition, max_in_class_error, max_null_residual })
}

/// Every terminal must be selected by exactly one class.
pub fn check_partition(selectors: &[ClassSelectorRow], terminals: usize) -> Result<()> {
    let mut count = vec![0usize; terminals];
    for d in selectors {
        if d.len() != terminals {
            return Err(Error::DimensionMismatch { expected: terminals, found: d.len() });
        }
        for (n, _) in d.entries().iter().enumerate().filter(|(_, &e)| e) {
            count[n] += 1;
        }
    }
    match count.iter().position(|&c| c != 1) {
        None => Ok(()),
        Some(n) => Err(Error::NotAPartition(format!(
            "terminal {n} is selected by {} classes",
            count[n]
        ))),
    }
}
