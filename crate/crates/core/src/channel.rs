//! Cell geometry, terminal drops, large-scale channel gains, thermal noise
//! and planar-array steering vectors.
//!
//! The access point sits above the centre of a square cell with a planar
//! array facing straight down. Terminals live in the ground plane. Gains use
//! a log-distance path-loss law with log-normal shadowing frozen per drop.

use nalgebra::{Complex, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub side_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub noise_figure_db: f64,
    pub target_sinr_db: f64,
    pub min_distance_m: f64,
    pub ap_height_m: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            side_m: 1000.0,
            carrier_hz: 2.0e9,
            bandwidth_hz: 10.0e6,
            // Free space at 1 m and 2 GHz; with the exponent below this is
            // 120 dB of loss at 1 km.
            pathloss_ref_db: 38.5,
            pathloss_exponent: 2.717,
            shadowing_sigma_db: 8.0,
            noise_figure_db: 10.0,
            target_sinr_db: 15.0,
            min_distance_m: 10.0,
            ap_height_m: 25.0,
        }
    }
}

impl CellConfig {
    /// Checks the parameter ranges, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("side_m", self.side_m),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("min_distance_m", self.min_distance_m),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(format!("cell.{key} must be > 0, got {value}")));
            }
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "cell.pathloss_exponent must be >= 2, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell.shadowing_sigma_db must be >= 0, got {}",
                self.shadowing_sigma_db
            )));
        }
        if !(self.ap_height_m >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell.ap_height_m must be >= 0, got {}",
                self.ap_height_m
            )));
        }
        if self.min_distance_m >= self.side_m / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "cell.min_distance_m ({}) leaves no room inside a {} m cell",
                self.min_distance_m, self.side_m
            )));
        }
        for (key, value) in [
            ("pathloss_ref_db", self.pathloss_ref_db),
            ("noise_figure_db", self.noise_figure_db),
            ("target_sinr_db", self.target_sinr_db),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidArgument(format!("cell.{key} must be finite")));
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn target_sinr_linear(&self) -> f64 {
        db_to_linear(self.target_sinr_db)
    }

    pub fn ap_position(&self) -> [f64; 3] {
        [0.0, 0.0, self.ap_height_m]
    }

    /// Euclidean distance from the array to the terminal.
    pub fn distance_m(&self, terminal: &Terminal) -> f64 {
        let ap = self.ap_position();
        let p = terminal.position;
        ((p[0] - ap[0]).powi(2) + (p[1] - ap[1]).powi(2) + (p[2] - ap[2]).powi(2)).sqrt()
    }

    /// Unit vector from the array towards the terminal.
    pub fn direction(&self, terminal: &Terminal) -> Result<UnitVector> {
        let ap = self.ap_position();
        let p = terminal.position;
        UnitVector::new([p[0] - ap[0], p[1] - ap[1], p[2] - ap[2]])
    }

    fn horizontal_ok(&self, x: f64, y: f64) -> bool {
        let half = self.side_m / 2.0;
        x.abs() <= half && y.abs() <= half && x.hypot(y) >= self.min_distance_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub id: usize,
    /// Metres; the cell centre is the origin of the ground plane.
    pub position: [f64; 3],
    pub shadowing_db: f64,
}

/// Mean channel power gain, strictly in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LinkGain(f64);

impl LinkGain {
    pub fn new(gain_linear: f64) -> Result<Self> {
        if gain_linear > 0.0 && gain_linear <= 1.0 {
            Ok(Self(gain_linear))
        } else {
            Err(Error::InvalidArgument(format!(
                "link gain must lie in (0, 1], got {gain_linear}"
            )))
        }
    }

    pub fn from_db(gain_db: f64) -> Result<Self> {
        Self::new(db_to_linear(gain_db))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        linear_to_db(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector([f64; 3]);

impl UnitVector {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument(format!("cannot normalise {v:?}")));
        }
        Ok(Self([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub nx: usize,
    pub ny: usize,
    pub spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(nx: usize, ny: usize, spacing_wavelengths: f64) -> Result<Self> {
        let geometry = Self { nx, ny, spacing_wavelengths };
        geometry.validate()?;
        Ok(geometry)
    }

    /// The 64 x 64 half-wavelength array.
    pub fn paper() -> Self {
        Self { nx: 64, ny: 64, spacing_wavelengths: 0.5 }
    }

    /// 16 x 16 half-wavelength array for quick runs.
    pub fn desk() -> Self {
        Self { nx: 16, ny: 16, spacing_wavelengths: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "array.nx and array.ny must be >= 1, got {} x {}",
                self.nx, self.ny
            )));
        }
        if !(self.spacing_wavelengths > 0.0 && self.spacing_wavelengths.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "array.spacing_wavelengths must be > 0, got {}",
                self.spacing_wavelengths
            )));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }
}

/// Drops `n` terminals uniformly over the cell square, outside the
/// min-distance disk around the access point, each with its own shadowing
/// draw.
pub fn drop_terminals<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    cell: &CellConfig,
) -> Result<Vec<Terminal>> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot drop zero terminals".into()));
    }
    let shadowing = shadowing_distribution(cell)?;
    let half = cell.side_m / 2.0;
    Ok((0..n)
        .map(|id| {
            let (x, y) = loop {
                let x = rng.random_range(-half..=half);
                let y = rng.random_range(-half..=half);
                if cell.horizontal_ok(x, y) {
                    break (x, y);
                }
            };
            Terminal { id, position: [x, y, 0.0], shadowing_db: shadowing.sample(rng) }
        })
        .collect())
}

/// Drops `n` terminals into `clusters` groups of radius `radius_m`, with
/// terminal `i` joining group `i % clusters`. Group centres are uniform
/// over the cell; members are uniform over their group's disk.
pub fn drop_clustered<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    clusters: usize,
    radius_m: f64,
    cell: &CellConfig,
) -> Result<Vec<Terminal>> {
    if n == 0 || clusters == 0 {
        return Err(Error::InvalidArgument("need at least one terminal and one cluster".into()));
    }
    if !(radius_m > 0.0) {
        return Err(Error::InvalidArgument(format!("cluster radius must be > 0, got {radius_m}")));
    }
    let shadowing = shadowing_distribution(cell)?;
    let half = cell.side_m / 2.0;
    let centres: Vec<(f64, f64)> = (0..clusters.min(n))
        .map(|_| loop {
            let x = rng.random_range(-half..=half);
            let y = rng.random_range(-half..=half);
            if cell.horizontal_ok(x, y) {
                break (x, y);
            }
        })
        .collect();
    Ok((0..n)
        .map(|id| {
            let (cx, cy) = centres[id % centres.len()];
            let (x, y) = loop {
                let r = radius_m * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                let (x, y) = (cx + r * theta.cos(), cy + r * theta.sin());
                if cell.horizontal_ok(x, y) {
                    break (x, y);
                }
            };
            Terminal { id, position: [x, y, 0.0], shadowing_db: shadowing.sample(rng) }
        })
        .collect())
}

fn shadowing_distribution(cell: &CellConfig) -> Result<Normal<f64>> {
    Normal::new(0.0, cell.shadowing_sigma_db)
        .map_err(|e| Error::InvalidArgument(format!("cell.shadowing_sigma_db: {e}")))
}

/// Log-distance mean path gain at `distance_m`.
pub fn mean_path_gain(cell: &CellConfig, distance_m: f64) -> Result<LinkGain> {
    if !(distance_m >= cell.min_distance_m) {
        return Err(Error::BelowMinimumDistance {
            distance_m,
            min_distance_m: cell.min_distance_m,
        });
    }
    let loss_db = cell.pathloss_ref_db + 10.0 * cell.pathloss_exponent * distance_m.log10();
    LinkGain::from_db(-loss_db)
}

/// Path gain times the terminal's frozen shadowing factor.
pub fn channel_gain(cell: &CellConfig, terminal: &Terminal) -> Result<LinkGain> {
    let mean = mean_path_gain(cell, cell.distance_m(terminal))?;
    LinkGain::new(mean.linear() * db_to_linear(terminal.shadowing_db))
}

pub fn channel_gains(cell: &CellConfig, terminals: &[Terminal]) -> Result<Vec<LinkGain>> {
    terminals.iter().map(|t| channel_gain(cell, t)).collect()
}

pub fn noise_power_dbm(cell: &CellConfig) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + linear_to_db(cell.bandwidth_hz) + cell.noise_figure_db
}

/// Receiver noise power kTB·F in watts.
pub fn noise_power(cell: &CellConfig) -> f64 {
    dbm_to_watts(noise_power_dbm(cell))
}

/// Far-field steering vector of the planar array towards `direction`.
///
/// Element `ix + nx * iy` sits at `(ix, iy, 0)` element spacings from the
/// reference element and carries phase `2π/λ · (r · direction)`. Spacing is
/// expressed in wavelengths, so the carrier drops out.
pub fn steering_vector(array: &ArrayGeometry, direction: UnitVector) -> DVector<Complex<f64>> {
    let [ux, uy, _] = direction.components();
    let k = 2.0 * PI * array.spacing_wavelengths;
    DVector::from_iterator(
        array.element_count(),
        (0..array.ny).flat_map(|iy| {
            (0..array.nx).map(move |ix| Complex::from_polar(1.0, k * (ix as f64 * ux + iy as f64 * uy)))
        }),
    )
}
