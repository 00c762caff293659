//! Analytic slow-time covariance of one antenna's clutter-plus-noise record.
//!
//! With IID `CN(0, sigma_c^2)` patch reflectivities and one uniform Doppler
//! per patch, the clutter covariance is
//! `R_c = sigma_c^2 * sum_i diag(b_i) Phi diag(b_i)^H`, which no antenna index
//! enters. Because `Phi` is shared by all patches this equals
//! `sigma_c^2 * (B B^H) .* Phi` with `B = [b_1 .. b_Nc]`.

use std::f64::consts::PI;

use crate::array::{diag_sandwich, hermitian_part, ArrayGeometry, CMatrix, C64};
use crate::beamformer::WeightSet;
use crate::error::{Error, Result};
use crate::scene::modulation_sequence;

/// Eigenvalues above `noise_power * (1 + RANK_SLACK)` count toward clutter rank.
pub const RANK_SLACK: f64 = 1e-3;

/// `Phi(l, m) = E{ exp(j 2 pi (l - m) psi) }`, psi uniform over
/// `[center - spread/2, center + spread/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerKernel {
    pub matrix: CMatrix,
    pub spread: f64,
    pub center: f64,
}

impl DopplerKernel {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `sin(x) / x`, continuous at zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn doppler_kernel(num_pulses: usize, spread: f64, center: f64) -> Result<DopplerKernel> {
    if num_pulses == 0 {
        return Err(Error::Domain("kernel needs N >= 1".into()));
    }
    if !(spread >= 0.0) {
        return Err(Error::Domain(format!("Doppler spread {spread} is negative")));
    }
    let matrix = CMatrix::from_fn(num_pulses, num_pulses, |l, m| {
        if l == m {
            return C64::new(1.0, 0.0);
        }
        let lag = l as f64 - m as f64;
        let mag = sinc(PI * spread * lag);
        if center == 0.0 {
            C64::new(mag, 0.0)
        } else {
            C64::from_polar(mag, 2.0 * PI * lag * center)
        }
    });
    Ok(DopplerKernel {
        matrix,
        spread,
        center,
    })
}

/// Analytic clutter covariance for the given transmit schedule. Patch terms
/// are accumulated in the order of `patch_angles`.
pub fn clutter_covariance(
    weight_set: &WeightSet,
    symbol_stream: &[usize],
    geom: &ArrayGeometry,
    patch_angles: &[f64],
    clutter_power: f64,
    kernel: &DopplerKernel,
) -> Result<CMatrix> {
    let n = symbol_stream.len();
    if kernel.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: kernel.dim(),
        });
    }
    let mut outer = CMatrix::zeros(n, n);
    for &angle in patch_angles {
        let b = modulation_sequence(weight_set, symbol_stream, geom, angle)?;
        outer.gerc(C64::new(1.0, 0.0), &b, &b, C64::new(1.0, 0.0));
    }
    let rc = outer.component_mul(&kernel.matrix) * C64::new(clutter_power, 0.0);
    Ok(hermitian_part(&rc))
}

/// Same quantity as [`clutter_covariance`], summed patch by patch in the
/// `diag(b) Phi diag(b)^H` form.
pub fn clutter_covariance_by_patch(
    weight_set: &WeightSet,
    symbol_stream: &[usize],
    geom: &ArrayGeometry,
    patch_angles: &[f64],
    clutter_power: f64,
    kernel: &DopplerKernel,
) -> Result<CMatrix> {
    let n = symbol_stream.len();
    let mut rc = CMatrix::zeros(n, n);
    for &angle in patch_angles {
        let b = modulation_sequence(weight_set, symbol_stream, geom, angle)?;
        rc += diag_sandwich(&b, &kernel.matrix);
    }
    Ok(hermitian_part(&(rc * C64::new(clutter_power, 0.0))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub clutter: CMatrix,
    pub total: CMatrix,
    pub noise_power: f64,
}

impl CovarianceModel {
    pub fn dim(&self) -> usize {
        self.total.nrows()
    }
}

pub fn total_covariance(clutter: CMatrix, noise_power: f64) -> Result<CovarianceModel> {
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power {noise_power} is negative")));
    }
    if !clutter.is_square() {
        return Err(Error::Argument("clutter covariance must be square".into()));
    }
    let mut total = clutter.clone();
    for i in 0..total.nrows() {
        total[(i, i)] += noise_power;
    }
    Ok(CovarianceModel {
        clutter,
        total,
        noise_power,
    })
}

/// Number of eigenvalues (of the clutter-plus-noise covariance) above the
/// noise floor.
pub fn clutter_rank(eigenvalues: &[f64], noise_power: f64) -> usize {
    let threshold = rank_threshold(noise_power);
    eigenvalues.iter().filter(|&&l| l > threshold).count()
}

pub fn rank_threshold(noise_power: f64) -> f64 {
    noise_power * (1.0 + RANK_SLACK)
}
