//! Monte Carlo sweeps behind the `bbma` subcommands.
//!
//! Each trial draws from its own generator, seeded from the master seed, an
//! experiment tag and the trial index, so results do not depend on how rayon
//! schedules the work. Per-trial records are collected in index order and
//! aggregated sequentially.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use crate::channel::{
    channel_gains, dbm_to_watts, drop_clustered, drop_terminals, noise_power, ArrayGeometry, LinkGain,
    Terminal,
};
use crate::config::{DropLayout, ExperimentConfig};
use crate::null_steering::{ClassSelectorRow, FactoredSteering, NullSteerer, Solver, SolverOptions, SteeringMatrix};
use crate::p2p::{mpsk_ser, q_function, word_error_curve, CurveSettings};
use crate::power::{bbma_alloc, conventional_alloc, sinr, OrthogonalityModel};
use crate::scheduler::{apply, dynamic_assign, ClassState, DemandVector, SymbolAlphabet};
use crate::seeding::{trial_rng, TrialRng};
use crate::{Error, Result};

/// Binary symbols throughout: two classes per symbol-time.
const ORDER: usize = 2;

fn mean_and_stderr(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.into_iter().collect();
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A random class state moved to serve a random demand, as one symbol-time
/// of the scheduler would. Returns the new state and the move count.
fn schedule_symbol_time(rng: &mut TrialRng, n: usize) -> Result<(ClassState, usize)> {
    let alphabet = SymbolAlphabet::new(ORDER)?;
    let initial = ClassState::with_identity_binding((0..n).map(|_| rng.random_range(0..ORDER)).collect(), ORDER)?;
    let demand = DemandVector::new((0..n).map(|_| rng.random_range(0..ORDER)).collect(), alphabet)?;
    let plan = dynamic_assign(&initial, &demand)?;
    Ok((apply(&initial, &plan)?, plan.move_count()))
}

fn run_trials<T: Send>(
    trials: u64,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Trial {
    pub n: usize,
    pub trial: u64,
    pub conv_power_w: f64,
    pub bbma_power_w: f64,
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Row {
    pub n: usize,
    pub trials: u64,
    pub mean_conv_power_w: f64,
    pub stderr_conv_power_w: f64,
    pub mean_bbma_power_w: f64,
    pub stderr_bbma_power_w: f64,
    pub mean_moves: f64,
    pub conv_feasible_fraction: f64,
    pub bbma_feasible_fraction: f64,
}

/// Total transmit power against the number of terminals, per-terminal
/// allocation against per-class allocation, perfectly orthogonal classes.
pub fn fig3(cfg: &ExperimentConfig) -> Result<(Vec<Fig3Row>, Vec<Fig3Trial>)> {
    let cell = &cfg.cell;
    let target = cell.target_sinr_linear();
    let noise = noise_power(cell);
    let p_max = dbm_to_watts(cfg.power.p_max_dbm);
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for &n in &cfg.fig3.n_values {
        let tag = format!("fig3/n={n}");
        let records = run_trials(cfg.fig3.trials, |trial| {
            let mut rng = trial_rng(cfg.seed, &tag, trial);
            let terminals = drop_terminals(&mut rng, n, cell)?;
            let gains = channel_gains(cell, &terminals)?;
            let (classes, moves) = schedule_symbol_time(&mut rng, n)?;
            let conv = conventional_alloc(&gains, target, noise, p_max);
            let bbma = bbma_alloc(&classes, &gains, target, noise, p_max)?;
            Ok((
                Fig3Trial { n, trial, conv_power_w: conv.total_w, bbma_power_w: bbma.total_w, moves },
                conv.feasible,
                bbma.feasible,
            ))
        })?;
        let count = records.len() as f64;
        let (mean_conv, se_conv) = mean_and_stderr(records.iter().map(|r| r.0.conv_power_w));
        let (mean_bbma, se_bbma) = mean_and_stderr(records.iter().map(|r| r.0.bbma_power_w));
        rows.push(Fig3Row {
            n,
            trials: cfg.fig3.trials,
            mean_conv_power_w: mean_conv,
            stderr_conv_power_w: se_conv,
            mean_bbma_power_w: mean_bbma,
            stderr_bbma_power_w: se_bbma,
            mean_moves: records.iter().map(|r| r.0.moves as f64).sum::<f64>() / count,
            conv_feasible_fraction: records.iter().filter(|r| r.1).count() as f64 / count,
            bbma_feasible_fraction: records.iter().filter(|r| r.2).count() as f64 / count,
        });
        raw.extend(records.into_iter().map(|r| r.0));
    }
    Ok((rows, raw))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Trial {
    pub n: usize,
    pub trial: u64,
    pub solver: Solver,
    /// True when the weights could not be computed: rank deficiency, a
    /// singular Gram matrix or κ above the ceiling. Metrics are NaN then.
    pub flagged: bool,
    pub condition_number: f64,
    pub max_residual: f64,
    pub ber: f64,
    pub capacity_bps_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Row {
    pub n: usize,
    pub solver: Solver,
    pub trials: u64,
    pub flagged: u64,
    pub mean_condition_number: f64,
    pub mean_log10_condition_number: f64,
    pub mean_max_residual: f64,
    pub mean_ber: f64,
    pub stderr_ber: f64,
    pub mean_capacity_bps_hz: f64,
}

/// Per-drop inputs shared by both solvers.
struct Fig4Drop {
    steering: SteeringMatrix,
    gains: Vec<LinkGain>,
    classes: ClassState,
}

fn fig4_drop(cfg: &ExperimentConfig, array: &ArrayGeometry, rng: &mut TrialRng, n: usize) -> Result<Fig4Drop> {
    let cell = &cfg.cell;
    let terminals: Vec<Terminal> = match cfg.fig4.layout {
        DropLayout::Uniform => drop_terminals(rng, n, cell)?,
        DropLayout::Clustered => drop_clustered(rng, n, cfg.fig4.cluster_count, cfg.fig4.cluster_radius_m, cell)?,
    };
    let gains = channel_gains(cell, &terminals)?;
    let steering = SteeringMatrix::build(array, cell, &terminals)?;
    let (classes, _) = schedule_symbol_time(rng, n)?;
    Ok(Fig4Drop { steering, gains, classes })
}

/// Evaluates one drop with one solver: class weights, measured leakage
/// between classes, per-terminal SINR and the resulting antipodal BER.
fn fig4_evaluate(
    cfg: &ExperimentConfig,
    drop: &Fig4Drop,
    factored: &FactoredSteering,
    options: SolverOptions,
) -> Result<Option<(f64, f64, f64, f64)>> {
    let steerer = match NullSteerer::from_factored(factored, options) {
        Ok(s) => s,
        Err(e) if e.is_numerical() => return Ok(None),
        Err(e) => return Err(e),
    };
    let n = drop.steering.terminals();
    let membership = drop.classes.membership();
    let selectors: Vec<Option<ClassSelectorRow>> =
        (0..ORDER).map(|c| ClassSelectorRow::from_membership(membership, c)).collect();
    let mut weights = Vec::new();
    let mut responses = Vec::new();
    for selector in &selectors {
        match selector {
            Some(d) => {
                let w = match steerer.weights(d) {
                    Ok(w) => w,
                    Err(e) if e.is_numerical() => return Ok(None),
                    Err(e) => return Err(e),
                };
                responses.push(Some(steerer.response_row(&w)?));
                weights.push(w);
            }
            None => responses.push(None),
        }
    }
    let present: Vec<ClassSelectorRow> = selectors.into_iter().flatten().collect();
    let diag = steerer.diagnostics(&weights, &present)?;
    let cell = &cfg.cell;
    let target = cell.target_sinr_linear();
    let noise = noise_power(cell);
    let alloc = bbma_alloc(&drop.classes, &drop.gains, target, noise, dbm_to_watts(cfg.power.p_max_dbm))?;
    let alpha = OrthogonalityModel::from_beam_responses(&responses, n);
    let report = sinr(&alloc, &drop.gains, &alpha, noise, target)?;
    let ber = report.sinr_linear.iter().map(|&g| q_function((2.0 * g).sqrt())).sum::<f64>() / n as f64;
    let capacity = report.sinr_linear.iter().map(|&g| (1.0 + g).log2()).sum::<f64>();
    Ok(Some((
        diag.condition_number,
        diag.max_in_class_error.max(diag.max_null_residual),
        ber,
        capacity,
    )))
}

/// Bit error rate against the number of terminals for both weight solvers,
/// with leakage measured from the computed weights.
pub fn fig4(cfg: &ExperimentConfig) -> Result<(Vec<Fig4Row>, Vec<Fig4Trial>)> {
    let array = cfg.array();
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for &n in &cfg.fig4.n_values {
        let tag = format!("fig4/{}/n={n}", cfg.fig4.layout.as_str());
        let per_trial = run_trials(cfg.fig4.trials, |trial| {
            let mut rng = trial_rng(cfg.seed, &tag, trial);
            let drop = fig4_drop(cfg, &array, &mut rng, n)?;
            let factored = match FactoredSteering::new(&drop.steering) {
                Ok(f) => Some(f),
                Err(e) if e.is_numerical() => None,
                Err(e) => return Err(e),
            };
            Solver::ALL
                .iter()
                .map(|&solver| {
                    let options = SolverOptions {
                        solver,
                        condition_ceiling: cfg.fig4.condition_ceiling,
                        refine: cfg.null_steering.refine,
                    };
                    let outcome = match &factored {
                        Some(f) => fig4_evaluate(cfg, &drop, f, options)?,
                        None => None,
                    };
                    Ok(match outcome {
                        Some((condition_number, max_residual, ber, capacity_bps_hz)) => Fig4Trial {
                            n,
                            trial,
                            solver,
                            flagged: false,
                            condition_number,
                            max_residual,
                            ber,
                            capacity_bps_hz,
                        },
                        None => Fig4Trial {
                            n,
                            trial,
                            solver,
                            flagged: true,
                            condition_number: factored.as_ref().map_or(f64::INFINITY, |f| f.condition_number()),
                            max_residual: f64::NAN,
                            ber: f64::NAN,
                            capacity_bps_hz: f64::NAN,
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let records: Vec<Fig4Trial> = per_trial.into_iter().flatten().collect();
        for solver in Solver::ALL {
            let mine: Vec<&Fig4Trial> = records.iter().filter(|r| r.solver == solver).collect();
            let ok: Vec<&&Fig4Trial> = mine.iter().filter(|r| !r.flagged).collect();
            let (mean_ber, stderr_ber) = mean_and_stderr(ok.iter().map(|r| r.ber));
            rows.push(Fig4Row {
                n,
                solver,
                trials: mine.len() as u64,
                flagged: (mine.len() - ok.len()) as u64,
                mean_condition_number: mean_and_stderr(ok.iter().map(|r| r.condition_number)).0,
                mean_log10_condition_number: mean_and_stderr(ok.iter().map(|r| r.condition_number.log10())).0,
                mean_max_residual: mean_and_stderr(ok.iter().map(|r| r.max_residual)).0,
                mean_ber,
                stderr_ber,
                mean_capacity_bps_hz: mean_and_stderr(ok.iter().map(|r| r.capacity_bps_hz)).0,
            });
        }
        raw.extend(records);
    }
    Ok((rows, raw))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig5Row {
    pub bits_per_symbol: usize,
    pub mpsk_ser_analytic: f64,
    pub bbma_bit_error: f64,
    pub stderr_bit_error: f64,
    pub bbma_word_error: f64,
    pub stderr_word_error: f64,
    pub words: u64,
    pub bits: u64,
    /// Mean Σ Es·‖w‖² per word over the transmitted class beams.
    pub mean_radiated_energy_j: f64,
    /// Mean Es per transmitted class at the receivers.
    pub mean_reference_energy_j: f64,
    pub condition_number: f64,
}

/// Error rate against spectral efficiency: M-PSK with M = 2^b against the
/// bit-parallel link carrying b bits per symbol-time.
pub fn fig5(cfg: &ExperimentConfig) -> Result<Vec<Fig5Row>> {
    let f = &cfg.fig5;
    if f.n_bits_values.iter().any(|&b| b > 63) {
        return Err(Error::Config("fig5.n_bits_values must be <= 63".into()));
    }
    let wavelength = cfg.cell.wavelength_m();
    let settings = CurveSettings {
        es_joules: f.es_j,
        n0: f.es_j / f.es_n0,
        min_bits: f.bits_per_point,
        master_seed: cfg.seed,
        rx_layout: f.rx_layout,
        rx_range_m: f.rx_range_m,
        rx_spacing_m: f.rx_spacing_wavelengths * wavelength,
    };
    word_error_curve(&cfg.array(), &f.n_bits_values, &settings, cfg.solver_options())?
        .into_iter()
        .map(|r| {
            let binomial_se = |p: f64, count: u64| (p * (1.0 - p) / count as f64).sqrt();
            Ok(Fig5Row {
                bits_per_symbol: r.n_bits,
                mpsk_ser_analytic: mpsk_ser(1u64 << r.n_bits, f.es_n0)?,
                bbma_bit_error: r.per_bit_error,
                stderr_bit_error: binomial_se(r.per_bit_error, r.bits),
                bbma_word_error: r.word_error,
                stderr_word_error: binomial_se(r.word_error, r.words),
                words: r.words,
                bits: r.bits,
                mean_radiated_energy_j: r.mean_radiated_energy_j,
                mean_reference_energy_j: r.mean_reference_energy_j,
                condition_number: r.condition_number,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckWeightsRow {
    pub trial: u64,
    pub n: usize,
    pub solver: Solver,
    pub condition_number: f64,
    pub max_in_class_error: f64,
    pub max_null_residual: f64,
}

/// Residuals of both solvers' weights on uniform drops.
pub fn check_weights(cfg: &ExperimentConfig) -> Result<Vec<CheckWeightsRow>> {
    let array = cfg.array();
    let n = cfg.check_weights.n_terminals;
    let rows = run_trials(cfg.check_weights.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, "check-weights", trial);
        let terminals = drop_terminals(&mut rng, n, &cfg.cell)?;
        let steering = SteeringMatrix::build(&array, &cfg.cell, &terminals)?;
        let (classes, _) = schedule_symbol_time(&mut rng, n)?;
        let selectors: Vec<ClassSelectorRow> = (0..ORDER)
            .filter_map(|c| ClassSelectorRow::from_membership(classes.membership(), c))
            .collect();
        Solver::ALL
            .iter()
            .map(|&solver| {
                let steerer = NullSteerer::new(&steering, SolverOptions { solver, ..cfg.solver_options() })?;
                let weights = steerer.class_weights(&selectors)?;
                let d = steerer.diagnostics(&weights, &selectors)?;
                Ok(CheckWeightsRow {
                    trial,
                    n,
                    solver,
                    condition_number: d.condition_number,
                    max_in_class_error: d.max_in_class_error,
                    max_null_residual: d.max_null_residual,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(rows.into_iter().flatten().collect())
}

/// Serializes rows as CSV with a header line.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;

    fn desk() -> ExperimentConfig {
        ExperimentConfig { profile: Profile::Desk, ..ExperimentConfig::default() }
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr([2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, se) = mean_and_stderr([1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
        assert!(mean_and_stderr([]).0.is_nan());
    }

    #[test]
    fn one_terminal_curves_coincide() {
        let mut cfg = desk();
        cfg.fig3.n_values = vec![1];
        cfg.fig3.trials = 20;
        let (rows, raw) = fig3(&cfg).unwrap();
        assert_eq!(raw.len(), 20);
        for r in &raw {
            assert!((r.conv_power_w - r.bbma_power_w).abs() <= 1e-12 * r.conv_power_w);
        }
        assert!((rows[0].mean_conv_power_w - rows[0].mean_bbma_power_w).abs() <= 1e-12 * rows[0].mean_conv_power_w);
    }

    #[test]
    fn fig3_bbma_never_exceeds_conventional() {
        let mut cfg = desk();
        cfg.fig3.n_values = vec![5, 40];
        cfg.fig3.trials = 30;
        let (_, raw) = fig3(&cfg).unwrap();
        assert!(raw.iter().all(|r| r.bbma_power_w <= r.conv_power_w * (1.0 + 1e-12)));
    }

    #[test]
    fn fig4_two_separated_terminals_hit_target_ber() {
        let mut cfg = desk();
        cfg.fig4.layout = DropLayout::Uniform;
        cfg.fig4.n_values = vec![2];
        cfg.fig4.trials = 10;
        let (rows, raw) = fig4(&cfg).unwrap();
        let target_ber = q_function((2.0 * cfg.cell.target_sinr_linear()).sqrt());
        for r in raw.iter().filter(|r| r.solver == Solver::OrthogonalFactorization) {
            assert!(!r.flagged);
            assert!(r.max_residual < 1e-10, "{r:?}");
            // The worst member of each class sits exactly on target; the
            // other terminal does at least as well.
            assert!(r.ber <= target_ber * (1.0 + 1e-6), "{r:?}");
            assert!(r.ber >= target_ber / 2.0 * (1.0 - 1e-6), "{r:?}");
        }
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn fig4_flags_more_terminals_than_antennas() {
        let mut cfg = desk();
        cfg.array = Some(ArrayGeometry::new(2, 2, 0.5).unwrap());
        cfg.fig4.n_values = vec![6];
        cfg.fig4.trials = 3;
        let (rows, raw) = fig4(&cfg).unwrap();
        assert!(raw.iter().all(|r| r.flagged && r.ber.is_nan()));
        assert!(rows.iter().all(|r| r.flagged == 3 && r.trials == 3));
    }

    #[test]
    fn fig4_is_paired_across_solvers() {
        let mut cfg = desk();
        cfg.fig4.layout = DropLayout::Uniform;
        cfg.fig4.n_values = vec![20];
        cfg.fig4.trials = 4;
        let (_, raw) = fig4(&cfg).unwrap();
        for pair in raw.chunks(2) {
            assert_eq!(pair[0].trial, pair[1].trial);
            assert_eq!(pair[0].condition_number, pair[1].condition_number);
            assert_ne!(pair[0].solver, pair[1].solver);
        }
    }

    #[test]
    fn fig5_rows_cover_the_sweep() {
        let mut cfg = desk();
        cfg.fig5.n_bits_values = vec![1, 3];
        cfg.fig5.bits_per_point = 3000;
        let rows = fig5(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].words, 1000);
        assert!(rows[1].mpsk_ser_analytic > rows[0].mpsk_ser_analytic);
        assert!(rows.iter().all(|r| r.bbma_word_error >= r.bbma_bit_error));
    }

    #[test]
    fn check_weights_residuals_are_tiny() {
        let mut cfg = desk();
        cfg.check_weights.n_terminals = 20;
        cfg.check_weights.trials = 3;
        let rows = check_weights(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows.iter().filter(|r| r.solver == Solver::OrthogonalFactorization) {
            assert!(r.max_in_class_error < 1e-8 && r.max_null_residual < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let mut cfg = desk();
        cfg.fig3.n_values = vec![10, 30];
        cfg.fig3.trials = 16;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        assert_eq!(one.install(|| fig3(&cfg)).unwrap(), four.install(|| fig3(&cfg)).unwrap());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut cfg = desk();
        cfg.fig3.n_values = vec![3];
        cfg.fig3.trials = 2;
        let (rows, _) = fig3(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("n,trials,mean_conv_power_w"));
        assert!(lines.next().unwrap().starts_with("3,2,"));
    }
}
