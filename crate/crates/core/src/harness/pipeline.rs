//! Shared setup: one beampattern design, then per symbol stream the scene,
//! analytic covariance and both clutter bases.

use nalgebra::DMatrix;

use crate::array::{db10, spatial_steering, ArrayGeometry, CMatrix, CVector};
use crate::beamformer::{design, DesignSpec, WeightSet};
use crate::covariance::{clutter_covariance, clutter_rank, doppler_kernel, total_covariance, CovarianceModel};
use crate::eigen::{clutter_subspace, reference_eig, reference_subspace, EigenBasis, PowerSettings};
use crate::error::Result;
use crate::scene::{constant_symbol_stream, simulate, sub_seed, DataCube, SceneConfig};
use crate::stap::{two_pulse_cancel, BankInputs, FilterDesign, FilterMethod, ProjectionFilter};

use super::config::Config;

/// Sub-seed index reserved for the power method's start vectors.
const EIGEN_SEED_INDEX: u64 = u64::MAX;

pub fn stream_seed(seed: u64) -> u64 {
    sub_seed(seed, 0)
}

/// Scene seed for Monte-Carlo trial `trial` (0-based).
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    sub_seed(seed, trial as u64 + 1)
}

pub fn power_settings(config: &Config) -> PowerSettings {
    PowerSettings {
        tolerance: config.processing.eigen_tolerance,
        max_iter: config.processing.eigen_max_iter,
        seed: sub_seed(config.seed, EIGEN_SEED_INDEX),
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub spec: DesignSpec,
    pub weights: WeightSet,
}

pub fn design_weights(config: &Config) -> Result<Design> {
    let spec = config.design_spec()?;
    let weights = design(&spec)?;
    Ok(Design { spec, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    /// Same weight vector on every pulse.
    Constant,
    /// The configured symbol stream.
    Modulated,
}

impl StreamLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamLabel::Constant => "nonsm",
            StreamLabel::Modulated => "sm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamSetup {
    pub label: StreamLabel,
    /// Scene template; `rng_seed` is replaced per trial.
    pub scene: SceneConfig,
    /// `s = W^H a_t` along the CPI.
    pub modulation: CVector,
    pub covariance: CovarianceModel,
    /// Power-method basis.
    pub basis: EigenBasis,
    /// Full-decomposition basis truncated to the power method's rank.
    pub reference_basis: EigenBasis,
    /// Eigenvalues of the total covariance, descending.
    pub spectrum: Vec<f64>,
    /// Rank counted on the full spectrum.
    pub reference_rank: usize,
}

impl StreamSetup {
    pub fn geom(&self) -> &ArrayGeometry {
        &self.scene.geom
    }

    pub fn inputs(&self, method: FilterMethod) -> BankInputs<'_> {
        match method {
            FilterMethod::Subspace => BankInputs {
                basis: Some(&self.basis),
                covariance: None,
            },
            FilterMethod::SubspaceReference => BankInputs {
                basis: Some(&self.reference_basis),
                covariance: None,
            },
            FilterMethod::Wiener => BankInputs {
                basis: None,
                covariance: Some(&self.covariance.total),
            },
            FilterMethod::Doppler | FilterMethod::TwoPulseCanceler => BankInputs::default(),
        }
    }

    pub fn filter(&self, method: FilterMethod) -> Result<FilterDesign> {
        FilterDesign::new(method, &self.modulation, self.inputs(method))
    }

    pub fn cube(&self, seed: u64, trial: usize) -> Result<DataCube> {
        let mut scene = self.scene.clone();
        scene.rng_seed = trial_seed(seed, trial);
        simulate(&scene)
    }

    /// Noise power of one target-beam sample.
    pub fn beam_noise_power(&self) -> f64 {
        self.scene.noise_power * self.scene.geom.num_elements() as f64
    }
}

pub fn prepare_stream(config: &Config, weights: &WeightSet, label: StreamLabel) -> Result<StreamSetup> {
    let stream = match label {
        StreamLabel::Constant => constant_symbol_stream(config.scene.num_pulses),
        StreamLabel::Modulated => config.symbol_stream(stream_seed(config.seed)),
    };
    let scene = config.scene_config(weights.clone(), stream, 0)?;
    scene.validate()?;
    let kernel = doppler_kernel(scene.num_pulses, scene.doppler_spread, config.scene.doppler_center)?;
    let rc = clutter_covariance(
        weights,
        &scene.symbol_stream,
        &scene.geom,
        &scene.patch_angles(),
        scene.clutter_power,
        &kernel,
    )?;
    let covariance = total_covariance(rc, scene.noise_power)?;
    let basis = clutter_subspace(&covariance.total, scene.noise_power, &power_settings(config))?;
    let spectrum = reference_eig(&covariance.total)?.values;
    let reference_rank = clutter_rank(&spectrum, scene.noise_power);
    let reference_basis = reference_subspace(&covariance.total, scene.noise_power, Some(basis.rank()))?;
    let modulation = scene.target_modulation()?;
    Ok(StreamSetup {
        label,
        scene,
        modulation,
        covariance,
        basis,
        reference_basis,
        spectrum,
        reference_rank,
    })
}

/// `sum_m conj(a_m) y_m`: the slow-time record of the beam steered at `angle_deg`.
pub fn beam(samples: &CMatrix, geom: &ArrayGeometry, angle_deg: f64) -> Result<CVector> {
    let a = spatial_steering(geom, angle_deg)?.into_inner();
    Ok(samples.tr_mul(&a.conjugate()))
}

/// Grid index nearest to `x`.
pub fn nearest_index(grid: &[f64], x: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map_or(0, |(i, _)| i)
}

/// Index distance on a periodic grid of `len` cells.
pub fn circular_distance(i: usize, j: usize, len: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(len - d)
}

pub fn argmax_modulus(values: &[crate::array::C64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(i, _)| i)
}

/// `||P^H c||^2 / ||c||^2` for one clutter record.
pub fn projection_suppression(filter: &ProjectionFilter, clutter: &CVector) -> Result<f64> {
    Ok(filter.apply(clutter)?.norm_squared() / clutter.norm_squared())
}

/// `||T c||^2 / (2 ||c||^2)`: residual power after the two-pulse canceler,
/// relative to its white-input gain of 2.
pub fn canceler_suppression(clutter: &CVector) -> f64 {
    two_pulse_cancel(clutter).norm_squared() / (2.0 * clutter.norm_squared())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMargin {
    pub target_db: f64,
    pub clutter_max_db: f64,
    pub margin_db: f64,
}

/// Target cell against the strongest cell of the clutter band
/// `|psi - center| <= half_width`, over all angles. `power` is linear,
/// angles along rows.
pub fn map_margin(
    power: &DMatrix<f64>,
    angle_grid: &[f64],
    doppler_grid: &[f64],
    target: (f64, f64),
    center: f64,
    half_width: f64,
) -> MapMargin {
    let ti = nearest_index(angle_grid, target.0);
    let tj = nearest_index(doppler_grid, target.1);
    let target_db = db10(power[(ti, tj)]);
    let mut clutter_max = 0.0f64;
    for (j, &psi) in doppler_grid.iter().enumerate() {
        if (psi - center).abs() <= half_width {
            clutter_max = clutter_max.max(power.column(j).max());
        }
    }
    let clutter_max_db = db10(clutter_max);
    MapMargin {
        target_db,
        clutter_max_db,
        margin_db: target_db - clutter_max_db,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::C64;

    #[test]
    fn beam_matches_explicit_sum() {
        let geom = ArrayGeometry::half_wavelength(3).unwrap();
        let y = CMatrix::from_fn(3, 4, |i, j| C64::new(i as f64, j as f64 - 1.0));
        let a = spatial_steering(&geom, 20.0).unwrap().into_inner();
        let b = beam(&y, &geom, 20.0).unwrap();
        for n in 0..4 {
            let expect: C64 = (0..3).map(|m| a[m].conj() * y[(m, n)]).sum();
            assert!((b[n] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn grid_helpers() {
        let g = [-0.5, -0.25, 0.0, 0.25];
        assert_eq!(nearest_index(&g, 0.2), 3);
        assert_eq!(circular_distance(0, 3, 4), 1);
        assert_eq!(circular_distance(1, 3, 4), 2);
        assert_eq!(argmax_modulus(&[C64::new(1.0, 0.0), C64::new(0.0, -2.0)]), 1);
    }

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(stream_seed(1), trial_seed(1, 0));
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn canceler_passes_alternating_and_nulls_constant() {
        let c = CVector::from_element(5, C64::new(2.0, 1.0));
        assert_eq!(canceler_suppression(&c), 0.0);
        let alt = CVector::from_fn(5, |n, _| C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
        assert!((canceler_suppression(&alt) - 16.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn margin_uses_band_maximum() {
        let power = DMatrix::from_row_slice(2, 3, &[1.0, 10.0, 1000.0, 2.0, 100.0, 1.0]);
        let m = map_margin(&power, &[0.0, 1.0], &[-0.1, 0.0, 0.1], (0.0, 0.1), 0.0, 0.05);
        assert!((m.target_db - 30.0).abs() < 1e-12);
        assert!((m.clutter_max_db - 20.0).abs() < 1e-12);
        assert!((m.margin_db - 10.0).abs() < 1e-12);
    }
}
