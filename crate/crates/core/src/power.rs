//! Downlink SINR and transmit power allocation.
//!
//! Conventional allocation gives every terminal its own power, just enough
//! to reach the target SINR over an interference-free channel. Per-class
//! allocation powers one beam per symbol class, sized for the class member
//! with the weakest channel; every other member then sees at least the
//! target.

use crate::channel::LinkGain;
use crate::scheduler::ClassState;
use crate::{Error, Result};

/// Relative slack when comparing an SINR against its target, so that a
/// worst-gain member sitting exactly on the target is not rejected by
/// rounding.
const TARGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationMode {
    /// `powers[i]` belongs to terminal `i`.
    PerTerminal,
    /// `powers[c]` belongs to class `c`; `membership[i]` is terminal `i`'s class.
    PerClass { membership: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub mode: AllocationMode,
    pub powers: Vec<f64>,
    pub total_w: f64,
    pub p_max_w: f64,
    pub feasible: bool,
}

impl PowerAllocation {
    fn new(mode: AllocationMode, powers: Vec<f64>, p_max_w: f64) -> Self {
        let total_w = powers.iter().sum();
        Self { mode, powers, total_w, p_max_w, feasible: total_w <= p_max_w }
    }

    pub fn terminals(&self) -> usize {
        match &self.mode {
            AllocationMode::PerTerminal => self.powers.len(),
            AllocationMode::PerClass { membership } => membership.len(),
        }
    }

    /// Power of the beam that carries terminal `i`'s symbol.
    pub fn power_for(&self, i: usize) -> f64 {
        match &self.mode {
            AllocationMode::PerTerminal => self.powers[i],
            AllocationMode::PerClass { membership } => self.powers[membership[i]],
        }
    }

    /// Interference sources seen by terminal `i`, as `(source index, power)`.
    /// Sources are terminals in per-terminal mode and classes in per-class
    /// mode.
    fn interferers(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let own = match &self.mode {
            AllocationMode::PerTerminal => i,
            AllocationMode::PerClass { membership } => membership[i],
        };
        self.powers.iter().copied().enumerate().filter(move |&(j, _)| j != own)
    }
}

/// Cross-interference factors αᵢⱼ between terminal `i` and source `j`.
#[derive(Debug, Clone, PartialEq)]
pub enum OrthogonalityModel {
    Constant(f64),
    /// `alpha[i][j]`; `j` ranges over terminals or classes to match the
    /// allocation mode.
    Pairwise(Vec<Vec<f64>>),
}

impl OrthogonalityModel {
    pub fn perfect() -> Self {
        Self::Constant(0.0)
    }

    /// Leakage from measured beam responses: `responses[c][i]` is the
    /// complex response of class `c`'s beam at terminal `i`, and αᵢ꜀ is its
    /// squared magnitude. Classes without a beam contribute nothing.
    pub fn from_beam_responses(responses: &[Option<Vec<nalgebra::Complex<f64>>>], terminals: usize) -> Self {
        Self::Pairwise(
            (0..terminals)
                .map(|i| {
                    responses
                        .iter()
                        .map(|row| row.as_ref().map_or(0.0, |r| r[i].norm_sqr()))
                        .collect()
                })
                .collect(),
        )
    }

    fn alpha(&self, i: usize, j: usize) -> f64 {
        match self {
            Self::Constant(a) => *a,
            Self::Pairwise(m) => m[i][j],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub sinr_linear: Vec<f64>,
    pub all_meet_target: bool,
}

fn meets(sinr: f64, target: f64) -> bool {
    sinr >= target * (1.0 - TARGET_TOLERANCE)
}

/// γᵢ = PᵢGᵢ / (Gᵢ Σⱼ≠ᵢ Pⱼαᵢⱼ + σ²) for every terminal.
pub fn sinr(
    allocation: &PowerAllocation,
    gains: &[LinkGain],
    alpha: &OrthogonalityModel,
    noise_w: f64,
    target_linear: f64,
) -> Result<SinrReport> {
    let n = allocation.terminals();
    if gains.len() < n {
        return Err(Error::MissingGain(gains.len()));
    }
    if let OrthogonalityModel::Pairwise(m) = alpha {
        if m.len() != n || m.iter().any(|row| row.len() != allocation.powers.len()) {
            return Err(Error::DimensionMismatch { expected: n, found: m.len() });
        }
    }
    let sinr_linear: Vec<f64> = (0..n)
        .map(|i| {
            let g = gains[i].linear();
            let interference: f64 = allocation.interferers(i).map(|(j, p)| p * alpha.alpha(i, j)).sum();
            allocation.power_for(i) * g / (g * interference + noise_w)
        })
        .collect();
    let all_meet_target = sinr_linear.iter().all(|&s| meets(s, target_linear));
    Ok(SinrReport { sinr_linear, all_meet_target })
}

/// Pᵢ = σ²γᵀ/Ĝᵢ for every terminal.
pub fn conventional_alloc(
    gains: &[LinkGain],
    target_linear: f64,
    noise_w: f64,
    p_max_w: f64,
) -> PowerAllocation {
    let powers = gains.iter().map(|g| noise_w * target_linear / g.linear()).collect();
    PowerAllocation::new(AllocationMode::PerTerminal, powers, p_max_w)
}

/// P꜀ = σ²γᵀ / minₙ∈꜀ Ĝₙ per class; empty classes get nothing.
pub fn bbma_alloc(
    classes: &ClassState,
    gains: &[LinkGain],
    target_linear: f64,
    noise_w: f64,
    p_max_w: f64,
) -> Result<PowerAllocation> {
    if gains.len() < classes.terminals() {
        return Err(Error::MissingGain(gains.len()));
    }
    let mut worst = vec![f64::INFINITY; classes.order()];
    for (i, &c) in classes.membership().iter().enumerate() {
        worst[c] = worst[c].min(gains[i].linear());
    }
    let powers = worst
        .into_iter()
        .map(|g| if g.is_finite() { noise_w * target_linear / g } else { 0.0 })
        .collect();
    Ok(PowerAllocation::new(
        AllocationMode::PerClass { membership: classes.membership().to_vec() },
        powers,
        p_max_w,
    ))
}

/// Budget holds and every terminal's mean SINR across trials reaches the
/// target.
pub fn feasibility(allocation: &PowerAllocation, trials: &[SinrReport], target_linear: f64) -> bool {
    let Some(first) = trials.first() else {
        return false;
    };
    let n = first.sinr_linear.len();
    if trials.iter().any(|t| t.sinr_linear.len() != n) {
        return false;
    }
    allocation.total_w <= allocation.p_max_w
        && (0..n).all(|i| {
            let mean = trials.iter().map(|t| t.sinr_linear[i]).sum::<f64>() / trials.len() as f64;
            meets(mean, target_linear)
        })
}

/// Σᵢ E[log₂(1 + γᵢ)] in bit/s/Hz, averaging over trials.
pub fn ergodic_capacity(trials: &[SinrReport]) -> f64 {
    if trials.is_empty() {
        return 0.0;
    }
    trials
        .iter()
        .map(|t| t.sinr_linear.iter().map(|&g| (1.0 + g).log2()).sum::<f64>())
        .sum::<f64>()
        / trials.len() as f64
}
