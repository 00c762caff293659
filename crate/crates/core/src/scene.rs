//! Slow-time observation cube `Y = S + C + N` for one CPI.
//!
//! Row `m` of every matrix is the slow-time record of antenna `m`. Each clutter
//! patch draws one complex reflectivity `beta ~ CN(0, sigma_c^2)` and one
//! Doppler `psi ~ U(center - eps/2, center + eps/2)` per CPI. The patch
//! response is modulated pulse-to-pulse by the transmit beampattern the
//! symbol stream selects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{doppler_phasor, spatial_steering, ArrayGeometry, CMatrix, CVector, C64};
use crate::beamformer::{AngleInterval, WeightSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub geom: ArrayGeometry,
    pub num_pulses: usize,
    pub weight_set: WeightSet,
    /// 1-based symbol index per pulse.
    pub symbol_stream: Vec<usize>,
    pub target_angle: f64,
    pub target_doppler: f64,
    pub target_amplitude: C64,
    pub clutter_region: AngleInterval,
    pub num_patches: usize,
    /// Linear.
    pub clutter_power: f64,
    /// One entry per patch, or a single entry shared by all patches.
    pub doppler_centers: Vec<f64>,
    pub doppler_spread: f64,
    /// Linear.
    pub noise_power: f64,
    pub rng_seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Domain(m));
        if self.num_pulses == 0 {
            return fail("num_pulses must be >= 1".into());
        }
        if self.num_patches == 0 {
            return fail("num_patches must be >= 1".into());
        }
        if !(self.clutter_power >= 0.0) || !(self.noise_power >= 0.0) {
            return fail("clutter and noise powers must be non-negative".into());
        }
        if !(self.doppler_spread >= 0.0) {
            return fail("doppler_spread must be non-negative".into());
        }
        if self.weight_set.is_empty() || self.weight_set.num_elements() != self.geom.num_elements() {
            return fail("weight set does not match the array size".into());
        }
        if self.symbol_stream.len() != self.num_pulses {
            return fail(format!(
                "symbol stream has {} entries, expected {}",
                self.symbol_stream.len(),
                self.num_pulses
            ));
        }
        let k = self.weight_set.len();
        if let Some(bad) = self.symbol_stream.iter().find(|&&s| s == 0 || s > k) {
            return fail(format!("symbol index {bad} outside 1..={k}"));
        }
        if !(self.doppler_centers.len() == 1 || self.doppler_centers.len() == self.num_patches) {
            return fail("doppler_centers needs one entry or one per patch".into());
        }
        if !(-0.5..=0.5).contains(&self.target_doppler) {
            return fail(format!("target Doppler {} outside [-0.5, 0.5]", self.target_doppler));
        }
        spatial_steering(&self.geom, self.target_angle)?;
        spatial_steering(&self.geom, self.clutter_region.start_deg)?;
        spatial_steering(&self.geom, self.clutter_region.end_deg)?;
        Ok(())
    }

    pub fn doppler_center(&self, patch: usize) -> f64 {
        if self.doppler_centers.len() == 1 {
            self.doppler_centers[0]
        } else {
            self.doppler_centers[patch]
        }
    }

    pub fn patch_angles(&self) -> Vec<f64> {
        clutter_patch_angles(&self.clutter_region, self.num_patches)
    }

    /// `s = W^H a_t` along the CPI.
    pub fn target_modulation(&self) -> Result<CVector> {
        modulation_sequence(&self.weight_set, &self.symbol_stream, &self.geom, self.target_angle)
    }
}

/// Random draws for one patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchDraw {
    pub angle_deg: f64,
    pub reflectivity: C64,
    pub doppler: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub signal: CMatrix,
    pub clutter: CMatrix,
    pub noise: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    /// M x N, rows are antennas.
    pub samples: CMatrix,
    pub components: Option<Components>,
    pub patches: Vec<PatchDraw>,
}

impl DataCube {
    pub fn num_elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_pulses(&self) -> usize {
        self.samples.ncols()
    }

    /// Slow-time record of antenna `m` as a column vector.
    pub fn row(&self, m: usize) -> CVector {
        self.samples.row(m).transpose()
    }
}

/// `N_c` angles uniformly spaced over the region, endpoints included. A
/// single patch sits at the interval midpoint.
pub fn clutter_patch_angles(region: &AngleInterval, num_patches: usize) -> Vec<f64> {
    match num_patches {
        0 => Vec::new(),
        1 => vec![0.5 * (region.start_deg + region.end_deg)],
        n => {
            let step = (region.end_deg - region.start_deg) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        region.end_deg
                    } else {
                        region.start_deg + i as f64 * step
                    }
                })
                .collect()
        }
    }
}

/// Entry `n` is `w_{stream[n]}^H a(angle)`.
pub fn modulation_sequence(
    weight_set: &WeightSet,
    symbol_stream: &[usize],
    geom: &ArrayGeometry,
    angle_deg: f64,
) -> Result<CVector> {
    let a = spatial_steering(geom, angle_deg)?;
    let per_symbol: Vec<C64> = weight_set.weights.iter().map(|w| w.dotc(&a)).collect();
    symbol_stream
        .iter()
        .map(|&k| {
            per_symbol
                .get(k.wrapping_sub(1))
                .copied()
                .ok_or_else(|| Error::Argument(format!("symbol index {k} outside 1..={}", per_symbol.len())))
        })
        .collect::<Result<Vec<_>>>()
        .map(CVector::from_vec)
}

/// Uniform IID symbols in `1..=K`.
pub fn random_symbol_stream(num_symbols: usize, num_pulses: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_pulses)
        .map(|_| rng.random_range(1..=num_symbols))
        .collect()
}

pub fn constant_symbol_stream(num_pulses: usize) -> Vec<usize> {
    vec![1; num_pulses]
}

/// Deterministic, well-mixed sub-seed for trial `index` (splitmix64 finalizer).
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> C64 {
    let scale = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

/// One reflectivity and Doppler draw per patch, in ascending-angle order.
pub fn draw_patches<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R) -> Vec<PatchDraw> {
    config
        .patch_angles()
        .into_iter()
        .enumerate()
        .map(|(i, angle_deg)| {
            let reflectivity = complex_gaussian(rng, config.clutter_power);
            let center = config.doppler_center(i);
            let doppler = if config.doppler_spread > 0.0 {
                let half = config.doppler_spread / 2.0;
                rng.random_range(center - half..=center + half)
            } else {
                center
            };
            PatchDraw {
                angle_deg,
                reflectivity,
                doppler,
            }
        })
        .collect()
}

/// `C = sum_i beta_i a_i (b_i .* d_i)^T` with pulse-varying `b_i`.
pub fn clutter_matrix(config: &SceneConfig, patches: &[PatchDraw]) -> Result<CMatrix> {
    let m = config.geom.num_elements();
    let n = config.num_pulses;
    let mut c = CMatrix::zeros(m, n);
    for p in patches {
        let a = spatial_steering(&config.geom, p.angle_deg)?;
        let b = modulation_sequence(&config.weight_set, &config.symbol_stream, &config.geom, p.angle_deg)?;
        let d = doppler_phasor(n, p.doppler);
        let temporal = b.component_mul(&d) * p.reflectivity;
        c.ger(C64::new(1.0, 0.0), a.as_vector(), &temporal, C64::new(1.0, 0.0));
    }
    Ok(c)
}

/// Unmodulated form: every pulse uses `w1`, so `b_i` is one scalar per patch
/// and `C = sum_i beta_i b_i a_i d_i^T`.
pub fn clutter_matrix_unmodulated(
    geom: &ArrayGeometry,
    w1: &CVector,
    num_pulses: usize,
    patches: &[PatchDraw],
) -> Result<CMatrix> {
    let mut c = CMatrix::zeros(geom.num_elements(), num_pulses);
    for p in patches {
        let a = spatial_steering(geom, p.angle_deg)?;
        let b = w1.dotc(&a);
        let d = doppler_phasor(num_pulses, p.doppler);
        c.ger(p.reflectivity * b, a.as_vector(), &d, C64::new(1.0, 0.0));
    }
    Ok(c)
}

pub fn signal_matrix(config: &SceneConfig) -> Result<CMatrix> {
    let a_t = spatial_steering(&config.geom, config.target_angle)?;
    let s = config.target_modulation()?;
    let d = doppler_phasor(config.num_pulses, config.target_doppler);
    let temporal = s.component_mul(&d) * config.target_amplitude;
    Ok(a_t.as_vector() * temporal.transpose())
}

pub fn noise_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, power: f64, rng: &mut R) -> CMatrix {
    // row-major draw order
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = complex_gaussian(rng, power);
        }
    }
    out
}

/// Draws patches then noise from `rng_seed`; the signal term is deterministic.
pub fn simulate(config: &SceneConfig) -> Result<DataCube> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let patches = draw_patches(config, &mut rng);
    let clutter = clutter_matrix(config, &patches)?;
    let noise = noise_matrix(config.geom.num_elements(), config.num_pulses, config.noise_power, &mut rng);
    let signal = signal_matrix(config)?;
    let samples = &signal + &clutter + &noise;
    Ok(DataCube {
        samples,
        components: Some(Components {
            signal,
            clutter,
            noise,
        }),
        patches,
    })
}

/// Clutter rows only (no target, no noise), for Monte-Carlo studies that
/// do not need the full cube.
pub fn simulate_clutter<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R) -> Result<CMatrix> {
    let patches = draw_patches(config, rng);
    clutter_matrix(config, &patches)
}
