//! Steering vectors and the handful of complex matrix helpers the rest of the
//! crate shares.
//!
//! Angles cross the public API in degrees and are converted to radians once,
//! here. The electrical-angle constructor takes `u = sin(theta)` directly so
//! angle-Doppler maps can be gridded uniformly in `u`.

use std::f64::consts::PI;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Uniform linear array: element count and inter-element spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing_ratio: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_ratio: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::Domain("array needs at least one element".into()));
        }
        if !(spacing_ratio > 0.0 && spacing_ratio.is_finite()) {
            return Err(Error::Domain(format!(
                "element spacing must be positive, got {spacing_ratio}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing_ratio,
        })
    }

    /// Half-wavelength ULA.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }

    pub fn steering(&self, angle_deg: f64) -> Result<SpatialSteering> {
        spatial_steering(self, angle_deg)
    }
}

/// Length-M spatial steering vector, entry m = exp(-j 2 pi m (d/lambda) sin(theta)).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSteering(CVector);

/// Length-N slow-time steering vector, entry n = exp(j 2 pi n psi).
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSteering(CVector);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl $name {
            pub fn into_inner(self) -> CVector {
                self.0
            }

            pub fn as_vector(&self) -> &CVector {
                &self.0
            }
        }

        impl Deref for $name {
            type Target = CVector;

            fn deref(&self) -> &CVector {
                &self.0
            }
        }

        impl From<$name> for CVector {
            fn from(v: $name) -> CVector {
                v.0
            }
        }
    };
}

vector_newtype!(SpatialSteering);
vector_newtype!(TemporalSteering);

pub fn spatial_steering(geom: &ArrayGeometry, angle_deg: f64) -> Result<SpatialSteering> {
    if !(-90.0..=90.0).contains(&angle_deg) {
        return Err(Error::Domain(format!(
            "steering angle {angle_deg} deg outside [-90, 90]"
        )));
    }
    Ok(steering_unchecked(geom, angle_deg.to_radians().sin()))
}

/// Steering vector at electrical angle `u = sin(theta)`, `u` in [-1, 1].
pub fn spatial_steering_electrical(geom: &ArrayGeometry, u: f64) -> Result<SpatialSteering> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!(
            "electrical angle {u} outside [-1, 1]"
        )));
    }
    Ok(steering_unchecked(geom, u))
}

fn steering_unchecked(geom: &ArrayGeometry, u: f64) -> SpatialSteering {
    let step = -2.0 * PI * geom.spacing_ratio * u;
    SpatialSteering(CVector::from_fn(geom.num_elements, |m, _| {
        C64::from_polar(1.0, step * m as f64)
    }))
}

pub fn temporal_steering(num_pulses: usize, normalized_doppler: f64) -> Result<TemporalSteering> {
    if num_pulses == 0 {
        return Err(Error::Domain("temporal steering needs N >= 1".into()));
    }
    if !(-0.5..=0.5).contains(&normalized_doppler) {
        return Err(Error::Domain(format!(
            "normalized Doppler {normalized_doppler} outside [-0.5, 0.5]"
        )));
    }
    Ok(TemporalSteering(doppler_phasor(
        num_pulses,
        normalized_doppler,
    )))
}

/// exp(j 2 pi n psi), n = 0..N-1, without range checks. Used for jittered
/// clutter Doppler that may sit just past the band edge.
pub(crate) fn doppler_phasor(num_pulses: usize, psi: f64) -> CVector {
    let step = 2.0 * PI * psi;
    CVector::from_fn(num_pulses, |n, _| C64::from_polar(1.0, step * n as f64))
}

/// Elementwise product.
pub fn hadamard(a: &CVector, b: &CVector) -> CVector {
    a.component_mul(b)
}

/// `diag(b) * m * diag(b)^H`, computed as `(b b^H) .* m`.
pub fn diag_sandwich(b: &CVector, m: &CMatrix) -> CMatrix {
    let n = b.len();
    CMatrix::from_fn(n, n, |i, j| b[i] * m[(i, j)] * b[j].conj())
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db10(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(m).unwrap()
    }

    #[test]
    fn broadside_is_all_ones() {
        let a = spatial_steering(&geom(10), 0.0).unwrap();
        assert_eq!(a.len(), 10);
        for z in a.iter() {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn endfire_two_elements() {
        let a = spatial_steering(&geom(2), 90.0).unwrap();
        assert_abs_diff_eq!(a[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn comm_direction_matches_elementwise_formula() {
        let theta = -50f64.to_radians();
        let a = spatial_steering(&geom(10), -50.0).unwrap();
        for m in 0..10 {
            let phase = -2.0 * PI * m as f64 * 0.5 * theta.sin();
            let expect = C64::new(phase.cos(), phase.sin());
            assert_abs_diff_eq!((a[m] - expect).norm(), 0.0, epsilon = 1e-14);
        }
        let e1 = C64::from_polar(1.0, PI * 50f64.to_radians().sin());
        assert_abs_diff_eq!((a[1] - e1).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn angle_out_of_range_is_domain_error() {
        assert!(matches!(
            spatial_steering(&geom(4), 90.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            spatial_steering_electrical(&geom(4), -1.01),
            Err(Error::Domain(_))
        ));
        assert!(ArrayGeometry::new(0, 0.5).is_err());
        assert!(ArrayGeometry::new(4, 0.0).is_err());
    }

    #[test]
    fn temporal_small_cases() {
        let d = temporal_steering(4, 0.0).unwrap();
        assert!(d.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let d = temporal_steering(2, 0.25).unwrap();
        assert_abs_diff_eq!((d[1] - C64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);
        assert!(temporal_steering(4, 0.51).is_err());
        assert!(temporal_steering(0, 0.1).is_err());
    }

    #[test]
    fn temporal_matches_elementwise_formula() {
        let d = temporal_steering(40, 0.4).unwrap();
        for n in 0..40 {
            let phase = 2.0 * PI * n as f64 * 0.4;
            assert_abs_diff_eq!(
                (d[n] - C64::new(phase.cos(), phase.sin())).norm(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    proptest! {
        #[test]
        fn steering_symmetry_and_norm(m in 1usize..32, theta in -90.0f64..=90.0) {
            let g = geom(m);
            let a = spatial_steering(&g, theta).unwrap();
            let b = spatial_steering(&g, -theta).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y.conj()).norm() < 1e-12);
                prop_assert!((x.norm() - 1.0).abs() < 1e-14);
            }
            prop_assert!((a.norm_squared() - m as f64).abs() < 1e-10);
            prop_assert_eq!(a[0], C64::new(1.0, 0.0));
        }

        #[test]
        fn temporal_energy(n in 1usize..128, psi in -0.5f64..=0.5) {
            let d = temporal_steering(n, psi).unwrap();
            prop_assert!((d.dotc(&d).re - n as f64).abs() < 1e-9);
        }

        #[test]
        fn hadamard_form_matches_diag_product(seed in any::<u64>(), n in 1usize..8) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut c = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b = CVector::from_fn(n, |_, _| c());
            let phi = CMatrix::from_fn(n, n, |_, _| c());
            let direct = CMatrix::from_diagonal(&b) * &phi * CMatrix::from_diagonal(&b).adjoint();
            let had = (&b * b.adjoint()).component_mul(&phi);
            prop_assert!(frobenius(&(&direct - &had)) < 1e-13);
            prop_assert!(frobenius(&(&direct - diag_sandwich(&b, &phi))) < 1e-13);
        }
    }
}
