//! Point-to-point bit-parallel link.
//!
//! One receiver with one antenna per bit. Each symbol-time the word's bits
//! split into two classes, zeros and ones, and the transmitter sends one
//! null-steered beam per class: antipodal amplitude `-√Es` for the zeros and
//! `+√Es` for the ones. Every receive antenna sees its own class's beam with
//! unit response and the other class's beam nulled, then decides by the sign
//! of the real part.

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::channel::{steering_vector, ArrayGeometry, UnitVector};
use crate::null_steering::{
    CMatrix, CVector, ClassSelectorRow, NullSteerer, SolverOptions, SteeringMatrix, WeightVector,
};
use crate::seeding::trial_rng;
use crate::{Error, Result};

/// Words simulated per independently seeded block.
const BLOCK_WORDS: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordFrame(Vec<bool>);

impl WordFrame {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidArgument("a word needs at least one bit".into()));
        }
        Ok(Self(bits))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_bits: usize) -> Result<Self> {
        Self::new((0..n_bits).map(|_| rng.random::<bool>()).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for WordFrame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }
}

impl fmt::Display for WordFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|&b| f.write_str(if b { "1" } else { "0" }))
    }
}

/// Bit positions (1-based) of the zeros and of the ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitClassSplit {
    pub zeros: Vec<usize>,
    pub ones: Vec<usize>,
}

impl BitClassSplit {
    pub fn reassemble(&self) -> Result<WordFrame> {
        let len = self.zeros.len() + self.ones.len();
        let mut bits = vec![None; len];
        for (positions, value) in [(&self.zeros, false), (&self.ones, true)] {
            for &p in positions {
                match bits.get_mut(p.wrapping_sub(1)) {
                    Some(slot @ None) => *slot = Some(value),
                    _ => return Err(Error::InvalidArgument(format!("position {p} is not a partition slot"))),
                }
            }
        }
        WordFrame::new(bits.into_iter().map(|b| b.expect("every slot filled")).collect())
    }
}

pub fn split_word(word: &WordFrame) -> BitClassSplit {
    let (ones, zeros): (Vec<usize>, Vec<usize>) = (1..=word.len()).partition(|&p| word.0[p - 1]);
    BitClassSplit { zeros, ones }
}

/// Transmit array plus receive-antenna coordinates, in metres relative to
/// the transmit array's reference element.
#[derive(Debug, Clone, PartialEq)]
pub struct P2pGeometry {
    pub tx_array: ArrayGeometry,
    pub rx_positions: Vec<[f64; 3]>,
}

impl P2pGeometry {
    pub fn new(tx_array: ArrayGeometry, rx_positions: Vec<[f64; 3]>) -> Result<Self> {
        tx_array.validate()?;
        if rx_positions.is_empty() {
            return Err(Error::InvalidArgument("need at least one receive antenna".into()));
        }
        if rx_positions.len() > tx_array.element_count() {
            return Err(Error::RankDeficient {
                terminals: rx_positions.len(),
                antennas: tx_array.element_count(),
            });
        }
        Ok(Self { tx_array, rx_positions })
    }

    /// `n_bits` receive antennas on a line parallel to the array's x axis,
    /// `spacing_m` apart, centred `range_m` below the array.
    pub fn line(tx_array: ArrayGeometry, n_bits: usize, range_m: f64, spacing_m: f64) -> Result<Self> {
        if !(range_m > 0.0 && spacing_m > 0.0) {
            return Err(Error::InvalidArgument("receive range and spacing must be > 0".into()));
        }
        let centre = (n_bits as f64 - 1.0) / 2.0;
        let positions = (0..n_bits)
            .map(|k| [(k as f64 - centre) * spacing_m, 0.0, -range_m])
            .collect();
        Self::new(tx_array, positions)
    }

    /// `n_bits` receive antennas on a near-square grid in the plane
    /// `range_m` below the array, `spacing_m` apart along both axes. Row-major
    /// from the lowest x and y.
    pub fn grid(tx_array: ArrayGeometry, n_bits: usize, range_m: f64, spacing_m: f64) -> Result<Self> {
        if !(range_m > 0.0 && spacing_m > 0.0) {
            return Err(Error::InvalidArgument("receive range and spacing must be > 0".into()));
        }
        let cols = (n_bits as f64).sqrt().ceil().max(1.0) as usize;
        let rows = n_bits.div_ceil(cols);
        let (cx, cy) = ((cols as f64 - 1.0) / 2.0, (rows as f64 - 1.0) / 2.0);
        let positions = (0..n_bits)
            .map(|k| {
                let (r, c) = (k / cols, k % cols);
                [(c as f64 - cx) * spacing_m, (r as f64 - cy) * spacing_m, -range_m]
            })
            .collect();
        Self::new(tx_array, positions)
    }

    pub fn n_bits(&self) -> usize {
        self.rx_positions.len()
    }

    pub fn steering_matrix(&self) -> Result<SteeringMatrix> {
        let columns = self
            .rx_positions
            .iter()
            .map(|&p| UnitVector::new(p).map(|u| steering_vector(&self.tx_array, u)))
            .collect::<Result<Vec<_>>>()?;
        SteeringMatrix::from_matrix(CMatrix::from_columns(&columns))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordOutcome {
    pub detected: WordFrame,
    pub bit_errors: usize,
    pub word_error: bool,
    /// Σ over transmitted beams of Es·‖w‖².
    pub radiated_energy_j: f64,
    /// Es per transmitted class, counted at the unit-response receivers.
    pub reference_energy_j: f64,
}

/// A prepared link. The steering matrix is fixed, so it is factored once.
///
/// Class weights are linear in the selector row, so the link keeps one
/// basis beam per bit (unit response at that bit's antenna, nulls at the
/// others) and forms each class beam as the sum of its bits' basis beams.
/// Per-word work is then quadratic in the word length instead of scaling
/// with the array size.
#[derive(Debug, Clone)]
pub struct P2pLink {
    steerer: NullSteerer,
    /// Column j is the basis beam of bit j.
    basis: CMatrix,
    /// Entry (j, k) is basis beam j's response at antenna k.
    responses: CMatrix,
    /// Entry (i, j) is the inner product of basis beams i and j.
    gram: CMatrix,
}

impl P2pLink {
    pub fn new(geometry: &P2pGeometry, options: SolverOptions) -> Result<Self> {
        let steerer = NullSteerer::new(&geometry.steering_matrix()?, options)?;
        let n = steerer.terminals();
        let columns = (0..n)
            .map(|j| {
                let selector = ClassSelectorRow::new((0..n).map(|k| k == j).collect())?;
                Ok(steerer.weights(&selector)?.as_vector().clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = CMatrix::from_columns(&columns);
        let mut responses = CMatrix::zeros(n, n);
        for (j, w) in columns.iter().enumerate() {
            let row = steerer.response_row(&WeightVector::new(w.clone())?)?;
            for (k, r) in row.into_iter().enumerate() {
                responses[(j, k)] = r;
            }
        }
        let gram = basis.ad_mul(&basis);
        Ok(Self { steerer, basis, responses, gram })
    }

    pub fn n_bits(&self) -> usize {
        self.steerer.terminals()
    }

    pub fn condition_number(&self) -> f64 {
        self.steerer.condition_number()
    }

    /// The zeros-class and ones-class beams for `word`; `None` for an empty
    /// class, which is not transmitted.
    pub fn class_weights(&self, word: &WordFrame) -> Result<[Option<WeightVector>; 2]> {
        self.check_len(word)?;
        let split = split_word(word);
        let beam = |positions: &[usize]| -> Result<Option<WeightVector>> {
            if positions.is_empty() {
                return Ok(None);
            }
            let mut w = CVector::zeros(self.basis.nrows());
            for &p in positions {
                w += self.basis.column(p - 1);
            }
            WeightVector::new(w).map(Some)
        };
        Ok([beam(&split.zeros)?, beam(&split.ones)?])
    }

    fn check_len(&self, word: &WordFrame) -> Result<()> {
        let n = self.n_bits();
        if word.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: word.len() });
        }
        Ok(())
    }

    pub fn simulate_word<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        word: &WordFrame,
        es_joules: f64,
        n0: f64,
    ) -> Result<WordOutcome> {
        self.check_len(word)?;
        let n = self.n_bits();
        let noise = Normal::new(0.0, (n0 / 2.0).sqrt())
            .map_err(|e| Error::InvalidArgument(format!("noise density {n0}: {e}")))?;
        let amplitude = es_joules.sqrt();
        let split = split_word(word);

        let mut received = vec![Complex::new(0.0, 0.0); n];
        let mut radiated_energy_j = 0.0;
        let mut reference_energy_j = 0.0;
        for (positions, symbol) in [(&split.zeros, -amplitude), (&split.ones, amplitude)] {
            if positions.is_empty() {
                continue;
            }
            let mut norm_squared = 0.0;
            for &i in positions {
                for &j in positions {
                    norm_squared += self.gram[(i - 1, j - 1)].re;
                }
                for (k, y) in received.iter_mut().enumerate() {
                    *y += self.responses[(i - 1, k)] * symbol;
                }
            }
            radiated_energy_j += es_joules * norm_squared;
            reference_energy_j += es_joules;
        }

        let detected: Vec<bool> = received
            .iter()
            .map(|y| y.re + noise.sample(rng) > 0.0)
            .collect();
        let bit_errors = detected.iter().zip(word.bits()).filter(|(a, b)| a != b).count();
        Ok(WordOutcome {
            detected: WordFrame::new(detected)?,
            bit_errors,
            word_error: bit_errors > 0,
            radiated_energy_j,
            reference_energy_j,
        })
    }
}

/// One-shot version of [`P2pLink::simulate_word`].
pub fn simulate_word<R: Rng + ?Sized>(
    rng: &mut R,
    word: &WordFrame,
    geometry: &P2pGeometry,
    es_joules: f64,
    n0: f64,
    options: SolverOptions,
) -> Result<WordOutcome> {
    P2pLink::new(geometry, options)?.simulate_word(rng, word, es_joules, n0)
}

/// Gaussian tail probability Q(x).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Symbol error probability of coherent M-PSK over AWGN: exact for M = 2,
/// the usual nearest-neighbour approximation above.
pub fn mpsk_ser(order: u64, es_n0: f64) -> Result<f64> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("M must be a power of two >= 2, got {order}")));
    }
    if !(es_n0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("Es/N0 must be >= 0, got {es_n0}")));
    }
    let snr = (2.0 * es_n0).sqrt();
    Ok(if order == 2 {
        q_function(snr)
    } else {
        2.0 * q_function(snr * (PI / order as f64).sin())
    })
}

/// How receive antennas are arranged facing the transmit array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RxLayout {
    /// A single row along the array's x axis. Its steering vectors span at
    /// most `nx` dimensions, so it cannot carry more than `nx` bits.
    Line,
    #[default]
    Grid,
}

impl RxLayout {
    pub fn place(self, tx_array: ArrayGeometry, n_bits: usize, range_m: f64, spacing_m: f64) -> Result<P2pGeometry> {
        match self {
            Self::Line => P2pGeometry::line(tx_array, n_bits, range_m, spacing_m),
            Self::Grid => P2pGeometry::grid(tx_array, n_bits, range_m, spacing_m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSettings {
    pub es_joules: f64,
    pub n0: f64,
    /// Each point simulates at least this many bits.
    pub min_bits: u64,
    pub master_seed: u64,
    /// Receive antenna range and spacing, metres.
    pub rx_layout: RxLayout,
    pub rx_range_m: f64,
    pub rx_spacing_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub n_bits: usize,
    /// Bits per symbol-time, i.e. b/s/Hz.
    pub spectral_efficiency: f64,
    pub words: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub word_errors: u64,
    pub per_bit_error: f64,
    pub word_error: f64,
    pub mean_radiated_energy_j: f64,
    pub mean_reference_energy_j: f64,
    pub condition_number: f64,
}

#[derive(Default)]
struct Tally {
    bit_errors: u64,
    word_errors: u64,
    energy: f64,
    reference_energy: f64,
}

/// Per-bit and per-word error rates for each word length.
pub fn word_error_curve(
    tx_array: &ArrayGeometry,
    n_bits_list: &[usize],
    settings: &CurveSettings,
    options: SolverOptions,
) -> Result<Vec<CurveRow>> {
    if settings.min_bits == 0 {
        return Err(Error::InvalidArgument("need at least one trial per point".into()));
    }
    n_bits_list
        .iter()
        .map(|&n_bits| {
            let geometry = settings.rx_layout.place(*tx_array, n_bits, settings.rx_range_m, settings.rx_spacing_m)?;
            let link = P2pLink::new(&geometry, options)?;
            let words = settings.min_bits.div_ceil(n_bits as u64);
            let tag = format!("fig5/n_bits={n_bits}");
            let blocks = words.div_ceil(BLOCK_WORDS);
            let tallies = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = trial_rng(settings.master_seed, &tag, b);
                    let count = BLOCK_WORDS.min(words - b * BLOCK_WORDS);
                    let mut tally = Tally::default();
                    for _ in 0..count {
                        let word = WordFrame::random(&mut rng, n_bits)?;
                        let out = link.simulate_word(&mut rng, &word, settings.es_joules, settings.n0)?;
                        tally.bit_errors += out.bit_errors as u64;
                        tally.word_errors += u64::from(out.word_error);
                        tally.energy += out.radiated_energy_j;
                        tally.reference_energy += out.reference_energy_j;
                    }
                    Ok(tally)
                })
                .collect::<Result<Vec<Tally>>>()?;
            let total = tallies.into_iter().fold(Tally::default(), |acc, t| Tally {
                bit_errors: acc.bit_errors + t.bit_errors,
                word_errors: acc.word_errors + t.word_errors,
                energy: acc.energy + t.energy,
                reference_energy: acc.reference_energy + t.reference_energy,
            });
            let bits = words * n_bits as u64;
            Ok(CurveRow {
                n_bits,
                spectral_efficiency: n_bits as f64,
                words,
                bits,
                bit_errors: total.bit_errors,
                word_errors: total.word_errors,
                per_bit_error: total.bit_errors as f64 / bits as f64,
                word_error: total.word_errors as f64 / words as f64,
                mean_radiated_energy_j: total.energy / words as f64,
                mean_reference_energy_j: total.reference_energy / words as f64,
                condition_number: link.condition_number(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::null_steering::Solver;
    use crate::seeding::TrialRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    const WAVELENGTH: f64 = 0.15;

    fn link(n_bits: usize) -> P2pLink {
        let g = P2pGeometry::grid(ArrayGeometry::desk(), n_bits, 0.5, WAVELENGTH / 2.0).unwrap();
        P2pLink::new(&g, SolverOptions::default()).unwrap()
    }

    /// Q(x) by composite Simpson quadrature of the Gaussian density on
    /// [x, x + 12].
    fn q_quadrature(x: f64) -> f64 {
        let (a, b, n) = (x, x + 12.0, 20_000);
        let h = (b - a) / n as f64;
        let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
        let mut sum = f(a) + f(b);
        for i in 1..n {
            sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn worked_example_split() {
        let split = split_word(&"11010100".parse().unwrap());
        assert_eq!(split.zeros, vec![3, 5, 7, 8]);
        assert_eq!(split.ones, vec![1, 2, 4, 6]);
    }

    #[test]
    fn all_zero_word_has_empty_ones() {
        let split = split_word(&"0000".parse().unwrap());
        assert_eq!(split.zeros, vec![1, 2, 3, 4]);
        assert!(split.ones.is_empty());
    }

    #[test]
    fn empty_word_rejected() {
        assert!(WordFrame::new(vec![]).is_err());
        assert!("".parse::<WordFrame>().is_err());
        assert!("10a".parse::<WordFrame>().is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(bits in proptest::collection::vec(any::<bool>(), 1..64)) {
            let word = WordFrame::new(bits.clone()).unwrap();
            let split = split_word(&word);
            prop_assert_eq!(split.zeros.len() + split.ones.len(), bits.len());
            prop_assert_eq!(split.reassemble().unwrap(), word.clone());
            let complement = WordFrame::new(bits.iter().map(|b| !b).collect()).unwrap();
            let swapped = split_word(&complement);
            prop_assert_eq!(swapped.zeros, split.ones);
            prop_assert_eq!(swapped.ones, split.zeros);
        }

        #[test]
        fn bpsk_ser_is_antipodal_closed_form(x in 0.0f64..30.0) {
            let expected = q_quadrature((2.0 * x).sqrt());
            prop_assert!((mpsk_ser(2, x).unwrap() - expected).abs() <= 1e-10 * expected.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn q_function_matches_quadrature() {
        for x in [0.0, 0.5, 1.0, 2.0, 3.5, 20f64.sqrt(), 6.0] {
            let oracle = q_quadrature(x);
            assert!((q_function(x) - oracle).abs() <= 1e-9 * oracle, "x = {x}");
        }
        // Q(√20), the E_s/N_0 = 10 antipodal error rate.
        let oracle = q_quadrature(20f64.sqrt());
        assert!((mpsk_ser(2, 10.0).unwrap() - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn mpsk_limits_and_monotonicity() {
        assert!((mpsk_ser(2, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let values: Vec<f64> = (1..=32).map(|k| mpsk_ser(1u64 << k, 10.0).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
        assert!(mpsk_ser(3, 10.0).is_err());
        assert!(mpsk_ser(1, 10.0).is_err());
        assert!(mpsk_ser(2, -1.0).is_err());
    }

    #[test]
    fn noiseless_link_makes_no_errors() {
        let mut rng = TrialRng::seed_from_u64(1);
        for n in [1, 2, 8, 16] {
            let l = link(n);
            for _ in 0..50 {
                let word = WordFrame::random(&mut rng, n).unwrap();
                let out = l.simulate_word(&mut rng, &word, 1.0, 0.0).unwrap();
                assert_eq!(out.detected, word);
                assert!(!out.word_error);
            }
        }
    }

    #[test]
    fn single_bit_link_is_antipodal_channel() {
        let l = link(1);
        let mut rng = TrialRng::seed_from_u64(9);
        // Es/N0 = 2 keeps the error rate large enough for 2e5 trials.
        let (es, n0, trials) = (1.0, 0.5, 200_000u64);
        let errors: u64 = (0..trials)
            .map(|_| {
                let word = WordFrame::random(&mut rng, 1).unwrap();
                l.simulate_word(&mut rng, &word, es, n0).unwrap().bit_errors as u64
            })
            .sum();
        let p = q_quadrature((2.0 * es / n0).sqrt());
        let measured = errors as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((measured - p).abs() <= 3.0 * se, "measured {measured}, expected {p}");
    }

    #[test]
    fn per_bit_error_does_not_depend_on_word_length() {
        let settings = CurveSettings {
            es_joules: 1.0,
            n0: 0.5,
            min_bits: 60_000,
            master_seed: 5,
            rx_layout: RxLayout::Grid,
            rx_range_m: 0.5,
            rx_spacing_m: WAVELENGTH / 2.0,
        };
        let rows = word_error_curve(&ArrayGeometry::desk(), &[2, 8, 16], &settings, SolverOptions::default()).unwrap();
        let bits: u64 = rows.iter().map(|r| r.bits).sum();
        let errors: u64 = rows.iter().map(|r| r.bit_errors).sum();
        let pooled = errors as f64 / bits as f64;
        for r in &rows {
            let se = (pooled * (1.0 - pooled) / r.bits as f64).sqrt();
            assert!((r.per_bit_error - pooled).abs() <= 3.0 * se, "{r:?}");
            assert!(r.word_error >= r.per_bit_error);
            // Independent bits: P(word error) = 1 - (1 - p)^n within 3 SE.
            let expected = 1.0 - (1.0 - r.per_bit_error).powi(r.n_bits as i32);
            let se_w = (expected * (1.0 - expected) / r.words as f64).sqrt();
            assert!((r.word_error - expected).abs() <= 3.0 * se_w + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn curve_is_deterministic() {
        let settings = CurveSettings {
            es_joules: 1.0,
            n0: 0.5,
            min_bits: 5_000,
            master_seed: 11,
            rx_layout: RxLayout::Grid,
            rx_range_m: 0.5,
            rx_spacing_m: WAVELENGTH / 2.0,
        };
        let opts = SolverOptions::with_solver(Solver::ExplicitInverse);
        let a = word_error_curve(&ArrayGeometry::desk(), &[1, 4], &settings, opts).unwrap();
        let b = word_error_curve(&ArrayGeometry::desk(), &[1, 4], &settings, opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn basis_beams_match_direct_class_weights() {
        let l = link(12);
        let word: WordFrame = "110100111000".parse().unwrap();
        let split = split_word(&word);
        let [zeros, ones] = l.class_weights(&word).unwrap();
        for (positions, combined) in [(&split.zeros, zeros.unwrap()), (&split.ones, ones.unwrap())] {
            let selector = ClassSelectorRow::new((1..=12).map(|p| positions.contains(&p)).collect()).unwrap();
            let direct = l.steerer.weights(&selector).unwrap();
            let diff = (direct.as_vector() - combined.as_vector()).camax();
            assert!(diff < 1e-12, "{diff}");
            let row = l.steerer.response_row(&direct).unwrap();
            for (k, r) in row.iter().enumerate() {
                let want = if positions.contains(&(k + 1)) { 1.0 } else { 0.0 };
                assert!((r - want).norm() < 1e-8);
            }
        }
        let mut rng = TrialRng::seed_from_u64(2);
        let out = l.simulate_word(&mut rng, &word, 2.0, 0.0).unwrap();
        let [z, o] = l.class_weights(&word).unwrap();
        let expected = 2.0 * (z.unwrap().norm_squared() + o.unwrap().norm_squared());
        assert!((out.radiated_energy_j - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn empty_class_is_not_transmitted() {
        let l = link(4);
        let [zeros, ones] = l.class_weights(&"1111".parse().unwrap()).unwrap();
        assert!(zeros.is_none() && ones.is_some());
    }

    #[test]
    fn line_layout_is_limited_by_array_width() {
        let line = P2pGeometry::line(ArrayGeometry::desk(), 17, 0.5, WAVELENGTH / 2.0).unwrap();
        assert!(P2pLink::new(&line, SolverOptions::default()).is_err());
        let grid = P2pGeometry::grid(ArrayGeometry::desk(), 32, 0.5, WAVELENGTH / 2.0).unwrap();
        assert!(P2pLink::new(&grid, SolverOptions::default()).unwrap().condition_number() < 1e3);
    }

    #[test]
    fn grid_places_every_bit_once() {
        let g = P2pGeometry::grid(ArrayGeometry::desk(), 7, 0.5, 0.1).unwrap();
        assert_eq!(g.n_bits(), 7);
        for (i, a) in g.rx_positions.iter().enumerate() {
            assert_eq!(a[2], -0.5);
            assert!(g.rx_positions[..i].iter().all(|b| b != a));
        }
    }

    #[test]
    fn more_bits_than_antennas_is_rejected() {
        let small = ArrayGeometry::new(2, 2, 0.5).unwrap();
        assert!(matches!(
            P2pGeometry::line(small, 5, 1.0, 0.075),
            Err(Error::RankDeficient { .. })
        ));
    }
}
