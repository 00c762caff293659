//! Slow-time clutter suppression and the angle-Doppler map.
//!
//! Every filter in a [`DopplerBank`] is a length-`N` weight vector applied as
//! `w(psi)^H y` to one antenna's slow-time record. The two-pulse canceler is
//! folded into that form as `T^H d'(psi)`, so all methods share the same
//! output, SINR and mapping code.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::array::{
    db10, doppler_phasor, frobenius, hadamard, hermitian_part, spatial_steering_electrical, ArrayGeometry, CMatrix,
    CVector, C64,
};
use crate::eigen::EigenBasis;
use crate::error::{Error, Result};

/// Gram matrices with condition number at or above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e8;
const ORTHONORMAL_SLACK: f64 = 1e-12;

/// `P = I - U (U^H U)^{-1} U^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFilter {
    projector: CMatrix,
    basis: CMatrix,
}

impl ProjectionFilter {
    pub fn projector(&self) -> &CMatrix {
        &self.projector
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.projector.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `P^H y`.
    pub fn apply(&self, y: &CVector) -> Result<CVector> {
        check_len(self.dim(), y.len())?;
        Ok(self.projector.ad_mul(y))
    }
}

pub fn build_projector(basis: &EigenBasis) -> Result<ProjectionFilter> {
    projector_from_columns(&basis.vectors)
}

/// Projector onto the orthogonal complement of the column span of `u`
/// (columns need not be orthonormal).
pub fn projector_from_columns(u: &CMatrix) -> Result<ProjectionFilter> {
    let n = u.nrows();
    let l = u.ncols();
    if l == 0 {
        return Ok(ProjectionFilter {
            projector: CMatrix::identity(n, n),
            basis: u.clone(),
        });
    }
    if l > n {
        return Err(Error::Argument(format!("{l} basis vectors in dimension {n}")));
    }
    let gram = u.ad_mul(u);
    let identity = CMatrix::identity(l, l);
    let mut projector = if frobenius(&(&gram - &identity)) <= ORTHONORMAL_SLACK * (l as f64).sqrt() {
        CMatrix::identity(n, n) - u * u.adjoint()
    } else {
        let eig = SymmetricEigen::new(hermitian_part(&gram));
        let hi = eig.eigenvalues.max();
        let lo = eig.eigenvalues.min();
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition < MAX_GRAM_CONDITION) {
            return Err(Error::Conditioning {
                what: "projection basis Gram matrix (duplicate eigenvectors?)".into(),
                condition,
            });
        }
        let chol = Cholesky::new(hermitian_part(&gram)).ok_or_else(|| Error::Conditioning {
            what: "projection basis Gram matrix".into(),
            condition,
        })?;
        let coeffs = chol.solve(&u.adjoint());
        CMatrix::identity(n, n) - u * coeffs
    };
    projector = hermitian_part(&projector);
    Ok(ProjectionFilter {
        projector,
        basis: u.clone(),
    })
}

/// `P^H y` for one antenna's slow-time record.
pub fn sp_filter_row(filter: &ProjectionFilter, y: &CVector) -> Result<CVector> {
    filter.apply(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterMethod {
    /// Projection over the power-method basis.
    #[serde(rename = "SP")]
    Subspace,
    /// Projection over the full eigendecomposition's basis.
    #[serde(rename = "SP_REF")]
    SubspaceReference,
    #[serde(rename = "WIENER")]
    Wiener,
    #[serde(rename = "DP")]
    Doppler,
    #[serde(rename = "DP_TPC")]
    TwoPulseCanceler,
}

impl FilterMethod {
    pub const ALL: [FilterMethod; 5] = [
        FilterMethod::Subspace,
        FilterMethod::SubspaceReference,
        FilterMethod::Wiener,
        FilterMethod::Doppler,
        FilterMethod::TwoPulseCanceler,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterMethod::Subspace => "SP",
            FilterMethod::SubspaceReference => "SP_REF",
            FilterMethod::Wiener => "WIENER",
            FilterMethod::Doppler => "DP",
            FilterMethod::TwoPulseCanceler => "DP_TPC",
        }
    }
}

impl fmt::Display for FilterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown filter method {s:?}")))
    }
}

/// What a filter method needs besides the modulation vector `s`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BankInputs<'a> {
    /// Clutter basis, required by the two projection methods.
    pub basis: Option<&'a EigenBasis>,
    /// Clutter-plus-noise covariance, required by the Wiener filter.
    pub covariance: Option<&'a CMatrix>,
}

#[derive(Debug, Clone)]
enum Kernel {
    Projector(ProjectionFilter),
    Wiener(Cholesky<C64, Dyn>),
    Matched,
    TwoPulse,
}

/// A filter method bound to its inputs; produces `w(psi)` for any `psi`.
#[derive(Debug, Clone)]
pub struct FilterDesign {
    method: FilterMethod,
    modulation: CVector,
    kernel: Kernel,
}

impl FilterDesign {
    pub fn new(method: FilterMethod, modulation: &CVector, inputs: BankInputs<'_>) -> Result<Self> {
        let n = modulation.len();
        if n == 0 {
            return Err(Error::Argument("modulation vector is empty".into()));
        }
        let kernel = match method {
            FilterMethod::Subspace | FilterMethod::SubspaceReference => {
                let basis = inputs
                    .basis
                    .ok_or_else(|| Error::Argument(format!("{method} needs a clutter basis")))?;
                check_len(n, basis.dim())?;
                Kernel::Projector(build_projector(basis)?)
            }
            FilterMethod::Wiener => {
                let r = inputs
                    .covariance
                    .ok_or_else(|| Error::Argument("WIENER needs the covariance".into()))?;
                check_len(n, r.nrows())?;
                let chol = Cholesky::new(hermitian_part(r)).ok_or_else(|| Error::Conditioning {
                    what: "covariance for the Wiener filter".into(),
                    condition: f64::INFINITY,
                })?;
                Kernel::Wiener(chol)
            }
            FilterMethod::Doppler => Kernel::Matched,
            FilterMethod::TwoPulseCanceler => {
                if n < 2 {
                    return Err(Error::Argument("two-pulse canceler needs N >= 2".into()));
                }
                Kernel::TwoPulse
            }
        };
        Ok(Self {
            method,
            modulation: modulation.clone(),
            kernel,
        })
    }

    pub fn method(&self) -> FilterMethod {
        self.method
    }

    pub fn num_pulses(&self) -> usize {
        self.modulation.len()
    }

    pub fn projection(&self) -> Option<&ProjectionFilter> {
        match &self.kernel {
            Kernel::Projector(p) => Some(p),
            _ => None,
        }
    }

    /// `s .* d(psi)`.
    pub fn calibrated_steering(&self, psi: f64) -> Result<CVector> {
        check_doppler(psi)?;
        Ok(hadamard(&self.modulation, &doppler_phasor(self.num_pulses(), psi)))
    }

    pub fn weight(&self, psi: f64) -> Result<CVector> {
        let d = self.calibrated_steering(psi)?;
        Ok(match &self.kernel {
            Kernel::Projector(p) => p.projector() * d,
            Kernel::Wiener(chol) => chol.solve(&d),
            Kernel::Matched => d,
            Kernel::TwoPulse => {
                // T^H d' with (T y)_n = y_{n+1} - y_n and d' = d[..N-1]
                let n = d.len();
                CVector::from_fn(n, |j, _| {
                    let prev = if j > 0 { d[j - 1] } else { C64::new(0.0, 0.0) };
                    let here = if j + 1 < n { d[j] } else { C64::new(0.0, 0.0) };
                    prev - here
                })
            }
        })
    }

    pub fn bank(&self, grid: &[f64]) -> Result<DopplerBank> {
        if grid.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Argument("Doppler grid must be sorted".into()));
        }
        let mut calibrated = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for &psi in grid {
            calibrated.push(self.calibrated_steering(psi)?);
            weights.push(self.weight(psi)?);
        }
        Ok(DopplerBank {
            method: self.method,
            grid: grid.to_vec(),
            calibrated,
            weights,
        })
    }
}

/// Two-pulse canceler on the data: `y'_n = y_{n+1} - y_n`, length `N - 1`.
pub fn two_pulse_cancel(y: &CVector) -> CVector {
    let n = y.len().saturating_sub(1);
    CVector::from_fn(n, |i, _| y[i + 1] - y[i])
}

#[derive(Debug, Clone, PartialEq)]
pub struct DopplerBank {
    pub method: FilterMethod,
    pub grid: Vec<f64>,
    /// `s .* d(psi)` per grid point.
    pub calibrated: Vec<CVector>,
    pub weights: Vec<CVector>,
}

impl DopplerBank {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn num_pulses(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    /// Weights as the columns of an `N x len` matrix.
    pub fn weight_matrix(&self) -> CMatrix {
        if self.weights.is_empty() {
            CMatrix::zeros(0, 0)
        } else {
            CMatrix::from_columns(&self.weights)
        }
    }
}

pub fn doppler_bank(
    method: FilterMethod,
    modulation: &CVector,
    inputs: BankInputs<'_>,
    grid: &[f64],
) -> Result<DopplerBank> {
    FilterDesign::new(method, modulation, inputs)?.bank(grid)
}

/// `count` points uniformly spaced over `[-0.5, 0.5)`.
pub fn doppler_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| -0.5 + k as f64 / count as f64).collect()
}

/// `count` points uniformly spaced over `[-1, 1]` in `u = sin(theta)`.
pub fn electrical_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| -1.0 + 2.0 * k as f64 / (count - 1) as f64).collect(),
    }
}

/// `w(psi)^H y` for every grid point.
pub fn matched_output(bank: &DopplerBank, y: &CVector) -> Result<Vec<C64>> {
    check_len(bank.num_pulses(), y.len())?;
    Ok(bank.weights.iter().map(|w| w.dotc(y)).collect())
}

/// `d(psi)^H (P^H y)`: filter first, then match. Equal to [`matched_output`]
/// for a projection bank built on the same filter.
pub fn matched_output_filtered(bank: &DopplerBank, filter: &ProjectionFilter, y: &CVector) -> Result<Vec<C64>> {
    let filtered = filter.apply(y)?;
    check_len(bank.num_pulses(), filtered.len())?;
    Ok(bank.calibrated.iter().map(|d| d.dotc(&filtered)).collect())
}

/// `|alpha|^2 |w^H d|^2 / (w^H R w)` in dB.
pub fn output_sinr(w: &CVector, calibrated: &CVector, r: &CMatrix, amplitude: C64) -> Result<f64> {
    check_len(w.len(), calibrated.len())?;
    check_len(w.len(), r.nrows())?;
    let denom = w.dotc(&(r * w)).re;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "w^H R w = {denom:e} is not positive"
        )));
    }
    let gain = w.dotc(calibrated).norm_sqr();
    Ok(db10(amplitude.norm_sqr() * gain / denom))
}

pub fn sinr_curve(bank: &DopplerBank, r: &CMatrix, amplitude: C64) -> Result<Vec<f64>> {
    bank.weights
        .iter()
        .zip(&bank.calibrated)
        .map(|(w, d)| output_sinr(w, d, r, amplitude))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleDopplerMap {
    /// Electrical angles `u = sin(theta)`.
    pub angle_grid: Vec<f64>,
    pub doppler_grid: Vec<f64>,
    /// `angle_grid.len() x doppler_grid.len()`.
    pub values: CMatrix,
}

impl AngleDopplerMap {
    /// `20 log10 |P(u, psi)|`.
    pub fn power_db(&self) -> nalgebra::DMatrix<f64> {
        self.values.map(|z| db10(z.norm_sqr()))
    }

    /// Grid indices of the largest-magnitude cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut top = f64::NEG_INFINITY;
        for j in 0..self.values.ncols() {
            for i in 0..self.values.nrows() {
                let v = self.values[(i, j)].norm_sqr();
                if v > top {
                    top = v;
                    best = (i, j);
                }
            }
        }
        best
    }
}

fn steering_matrix(geom: &ArrayGeometry, angle_grid: &[f64]) -> Result<CMatrix> {
    let cols = angle_grid
        .iter()
        .map(|&u| spatial_steering_electrical(geom, u).map(|a| a.into_inner()))
        .collect::<Result<Vec<_>>>()?;
    if cols.is_empty() {
        return Ok(CMatrix::zeros(geom.num_elements(), 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

fn check_map_inputs(samples: &CMatrix, geom: &ArrayGeometry, bank: &DopplerBank) -> Result<()> {
    check_len(geom.num_elements(), samples.nrows())?;
    check_len(bank.num_pulses(), samples.ncols())
}

/// Filter every antenna row, then beamform across antennas.
pub fn angle_doppler_map(
    samples: &CMatrix,
    geom: &ArrayGeometry,
    bank: &DopplerBank,
    angle_grid: &[f64],
) -> Result<AngleDopplerMap> {
    check_map_inputs(samples, geom, bank)?;
    let steering = steering_matrix(geom, angle_grid)?;
    // column j holds w_j^H y_m over antennas m
    let filtered = samples * bank.weight_matrix().conjugate();
    Ok(AngleDopplerMap {
        angle_grid: angle_grid.to_vec(),
        doppler_grid: bank.grid.clone(),
        values: steering.ad_mul(&filtered),
    })
}

/// Beamform first, then filter the beam outputs. Same map as
/// [`angle_doppler_map`] up to round-off.
pub fn angle_doppler_map_beamform_first(
    samples: &CMatrix,
    geom: &ArrayGeometry,
    bank: &DopplerBank,
    angle_grid: &[f64],
) -> Result<AngleDopplerMap> {
    check_map_inputs(samples, geom, bank)?;
    let steering = steering_matrix(geom, angle_grid)?;
    let beams = steering.ad_mul(samples);
    Ok(AngleDopplerMap {
        angle_grid: angle_grid.to_vec(),
        doppler_grid: bank.grid.clone(),
        values: beams * bank.weight_matrix().conjugate(),
    })
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}

fn check_doppler(psi: f64) -> Result<()> {
    if (-0.5..=0.5).contains(&psi) {
        Ok(())
    } else {
        Err(Error::Domain(format!("normalized Doppler {psi} outside [-0.5, 0.5]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::spatial_steering;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| crate::scene::complex_gaussian(&mut rng, 1.0))
    }

    fn gaussian_vector(n: usize, seed: u64) -> CVector {
        gaussian_matrix(n, 1, seed).column(0).into_owned()
    }

    fn basis_of(u: CMatrix) -> EigenBasis {
        let mut b = EigenBasis::empty(u.nrows());
        b.values = vec![2.0; u.ncols()];
        b.vectors = u;
        b
    }

    fn orthonormal(n: usize, l: usize, seed: u64) -> CMatrix {
        gaussian_matrix(n, l, seed).qr().q()
    }

    fn ones(n: usize) -> CVector {
        CVector::from_element(n, C64::new(1.0, 0.0))
    }

    #[test]
    fn empty_basis_gives_identity() {
        let p = build_projector(&EigenBasis::empty(5)).unwrap();
        assert_eq!(p.projector(), &CMatrix::identity(5, 5));
        assert_eq!(p.rank(), 0);
    }

    #[test]
    fn coordinate_projector() {
        let mut e1 = CMatrix::zeros(4, 1);
        e1[(0, 0)] = C64::new(1.0, 0.0);
        let p = build_projector(&basis_of(e1)).unwrap();
        let mut expect = CMatrix::identity(4, 4);
        expect[(0, 0)] = C64::new(0.0, 0.0);
        assert!(frobenius(&(p.projector() - expect)) < 1e-15);
    }

    #[test]
    fn projector_invariants_general_basis() {
        // non-orthonormal columns take the Gram-solve path
        let u = gaussian_matrix(12, 4, 3);
        let p = projector_from_columns(&u).unwrap();
        let pm = p.projector();
        let scale = frobenius(pm);
        assert!(frobenius(&(pm * pm - pm)) <= 1e-8 * scale);
        assert!(frobenius(&(pm - pm.adjoint())) <= 1e-8 * scale);
        assert!(frobenius(&(pm * &u)) <= 1e-8 * frobenius(&u));
        // same span, orthonormalized: same projector
        let q = u.clone().qr().q();
        let pq = projector_from_columns(&q).unwrap();
        assert!(frobenius(&(pq.projector() - pm)) < 1e-10);
    }

    #[test]
    fn duplicate_columns_are_rejected() {
        let mut u = gaussian_matrix(8, 3, 4);
        let c = u.column(0).into_owned();
        u.set_column(2, &c);
        assert!(matches!(
            projector_from_columns(&u),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn annihilates_span_and_keeps_complement() {
        let q = orthonormal(10, 6, 8);
        let u = q.columns(0, 3).into_owned();
        let p = projector_from_columns(&u).unwrap();
        let inside = &u * gaussian_vector(3, 1);
        assert!(p.apply(&inside).unwrap().norm() < 1e-12 * inside.norm());
        let outside = q.columns(3, 3) * gaussian_vector(3, 2);
        assert!((p.apply(&outside).unwrap() - &outside).norm() < 1e-12 * outside.norm());
    }

    #[test]
    fn least_squares_residual_oracle() {
        let u = gaussian_matrix(9, 3, 11);
        let y = gaussian_vector(9, 12);
        let p = projector_from_columns(&u).unwrap();
        // y minus its least-squares fit, coefficients from an SVD solve
        let coeffs = u.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        let expect = &y - &u * coeffs;
        assert!((sp_filter_row(&p, &y).unwrap() - expect).norm() < 1e-12 * y.norm());
    }

    #[test]
    fn method_names_round_trip() {
        for m in FilterMethod::ALL {
            assert_eq!(m.as_str().parse::<FilterMethod>().unwrap(), m);
        }
        assert!("MVDR".parse::<FilterMethod>().is_err());
    }

    #[test]
    fn wiener_with_identity_is_matched() {
        let s = gaussian_vector(6, 1);
        let r = CMatrix::identity(6, 6);
        let grid = doppler_grid(16);
        let w = doppler_bank(FilterMethod::Wiener, &s, BankInputs { covariance: Some(&r), ..Default::default() }, &grid).unwrap();
        let dp = doppler_bank(FilterMethod::Doppler, &s, BankInputs::default(), &grid).unwrap();
        for (a, b) in w.weights.iter().zip(&dp.weights) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn missing_inputs_are_argument_errors() {
        let s = ones(4);
        for m in [FilterMethod::Subspace, FilterMethod::SubspaceReference, FilterMethod::Wiener] {
            assert!(matches!(
                FilterDesign::new(m, &s, BankInputs::default()),
                Err(Error::Argument(_))
            ));
        }
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let s = ones(3);
        let r = CMatrix::zeros(3, 3);
        assert!(matches!(
            FilterDesign::new(FilterMethod::Wiener, &s, BankInputs { covariance: Some(&r), ..Default::default() }),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn canceler_nulls_dc() {
        let y = CVector::from_element(8, C64::new(0.3, -1.2));
        assert!(two_pulse_cancel(&y).iter().all(|z| *z == C64::new(0.0, 0.0)));
        let design = FilterDesign::new(FilterMethod::TwoPulseCanceler, &ones(8), BankInputs::default()).unwrap();
        for psi in doppler_grid(32) {
            assert!(design.weight(psi).unwrap().dotc(&y).norm() < 1e-13);
        }
    }

    #[test]
    fn canceler_weight_matches_data_form() {
        let s = gaussian_vector(7, 5);
        let y = gaussian_vector(7, 6);
        let design = FilterDesign::new(FilterMethod::TwoPulseCanceler, &s, BankInputs::default()).unwrap();
        let psi = 0.23;
        let d = design.calibrated_steering(psi).unwrap();
        let truncated = d.rows(0, 6).into_owned();
        let direct = truncated.dotc(&two_pulse_cancel(&y));
        assert!((design.weight(psi).unwrap().dotc(&y) - direct).norm() < 1e-13);
    }

    #[test]
    fn matched_peak_and_zero_input() {
        let n = 10;
        let s = CVector::from_fn(n, |i, _| C64::from_polar(1.0 + 0.1 * i as f64, 0.3 * i as f64));
        let grid = [0.4];
        let bank = doppler_bank(FilterMethod::Doppler, &s, BankInputs::default(), &grid).unwrap();
        let y = bank.calibrated[0].clone();
        let out = matched_output(&bank, &y).unwrap();
        let energy: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((out[0] - C64::new(energy, 0.0)).norm() < 1e-12);
        let zero = matched_output(&bank, &CVector::zeros(n)).unwrap();
        assert_eq!(zero, vec![C64::new(0.0, 0.0)]);
    }

    #[test]
    fn white_noise_sinr() {
        let s = gaussian_vector(5, 9);
        let d = hadamard(&s, &doppler_phasor(5, 0.1));
        let r = CMatrix::identity(5, 5) * C64::new(2.0, 0.0);
        let alpha = C64::new(0.5, 0.5);
        let got = output_sinr(&d, &d, &r, alpha).unwrap();
        let expect = db10(alpha.norm_sqr() * d.norm_squared() / 2.0);
        assert!((got - expect).abs() < 1e-12);
        assert!(output_sinr(&CVector::zeros(5), &d, &r, alpha).is_err());
    }

    #[test]
    fn doppler_outside_band_is_rejected() {
        let design = FilterDesign::new(FilterMethod::Doppler, &ones(4), BankInputs::default()).unwrap();
        assert!(design.weight(0.6).is_err());
        assert!(design.bank(&[0.2, 0.1]).is_err());
    }

    #[test]
    fn grids() {
        let g = doppler_grid(512);
        assert_eq!(g.len(), 512);
        assert_eq!(g[0], -0.5);
        assert!(*g.last().unwrap() < 0.5);
        let u = electrical_grid(181);
        assert_eq!((u[0], u[90], u[180]), (-1.0, 0.0, 1.0));
    }

    #[test]
    fn single_antenna_map() {
        let geom = ArrayGeometry::half_wavelength(1).unwrap();
        let y = gaussian_vector(6, 21);
        let samples = CMatrix::from_row_slice(1, 6, y.as_slice());
        let grid = doppler_grid(8);
        let bank = doppler_bank(FilterMethod::Doppler, &ones(6), BankInputs::default(), &grid).unwrap();
        let map = angle_doppler_map(&samples, &geom, &bank, &electrical_grid(5)).unwrap();
        let out = matched_output(&bank, &y).unwrap();
        for i in 0..5 {
            for j in 0..8 {
                // a(u) = 1 for the lone element
                assert!((map.values[(i, j)] - out[j]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn noise_free_target_peaks_at_its_cell() {
        let geom = ArrayGeometry::half_wavelength(8).unwrap();
        let n = 16;
        let theta = 30.0;
        let psi = 0.25;
        let a = spatial_steering(&geom, theta).unwrap().into_inner();
        let d = doppler_phasor(n, psi);
        let samples = &a * d.transpose();
        let grid = doppler_grid(64);
        let angles = electrical_grid(181);
        let bank = doppler_bank(FilterMethod::Doppler, &ones(n), BankInputs::default(), &grid).unwrap();
        let map = angle_doppler_map(&samples, &geom, &bank, &angles).unwrap();
        let (i, j) = map.argmax();
        assert!((angles[i] - 0.5).abs() < 1e-12);
        assert!((grid[j] - psi).abs() < 1e-12);
        assert!((map.values[(i, j)].norm() - (8 * n) as f64).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn filter_then_match_equals_match_projected(seed in 0u64..10_000, n in 4usize..24, l in 1usize..4, psi in -0.5f64..0.5) {
            let u = orthonormal(n, l, seed);
            let basis = basis_of(u);
            let s = gaussian_vector(n, seed + 1);
            let y = gaussian_vector(n, seed + 2);
            let design = FilterDesign::new(FilterMethod::Subspace, &s, BankInputs { basis: Some(&basis), ..Default::default() }).unwrap();
            let bank = design.bank(&[psi]).unwrap();
            let a = matched_output(&bank, &y).unwrap()[0];
            let b = matched_output_filtered(&bank, design.projection().unwrap(), &y).unwrap()[0];
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn map_evaluation_order_is_irrelevant(seed in 0u64..10_000, m in 1usize..8, n in 2usize..16) {
            let geom = ArrayGeometry::half_wavelength(m).unwrap();
            let samples = gaussian_matrix(m, n, seed);
            let s = gaussian_vector(n, seed + 7);
            let bank = doppler_bank(FilterMethod::TwoPulseCanceler, &s, BankInputs::default(), &doppler_grid(12)).unwrap();
            let angles = electrical_grid(9);
            let a = angle_doppler_map(&samples, &geom, &bank, &angles).unwrap();
            let b = angle_doppler_map_beamform_first(&samples, &geom, &bank, &angles).unwrap();
            prop_assert!(frobenius(&(a.values.clone() - b.values)) <= 1e-12 * (1.0 + frobenius(&a.values)));
        }

        #[test]
        fn sinr_is_scale_invariant(seed in 0u64..10_000, re in -5.0f64..5.0, im in -5.0f64..5.0) {
            prop_assume!(re.hypot(im) > 1e-3);
            let n = 6;
            let g = gaussian_matrix(n, n, seed);
            let r = &g * g.adjoint() + CMatrix::identity(n, n);
            let w = gaussian_vector(n, seed + 3);
            let d = gaussian_vector(n, seed + 4);
            let c = C64::new(re, im);
            let a = output_sinr(&w, &d, &r, C64::new(1.0, 0.0)).unwrap();
            let b = output_sinr(&(w * c), &d, &r, C64::new(1.0, 0.0)).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn wiener_is_sinr_optimal(seed in 0u64..10_000, psi in -0.5f64..0.5) {
            let n = 8;
            let g = gaussian_matrix(n, 3, seed);
            let r = &g * g.adjoint() * C64::new(50.0, 0.0) + CMatrix::identity(n, n);
            let s = gaussian_vector(n, seed + 1);
            let wiener = FilterDesign::new(FilterMethod::Wiener, &s, BankInputs { covariance: Some(&r), ..Default::default() }).unwrap();
            let dp = FilterDesign::new(FilterMethod::Doppler, &s, BankInputs::default()).unwrap();
            let d = wiener.calibrated_steering(psi).unwrap();
            let best = output_sinr(&wiener.weight(psi).unwrap(), &d, &r, C64::new(1.0, 0.0)).unwrap();
            let other = output_sinr(&dp.weight(psi).unwrap(), &d, &r, C64::new(1.0, 0.0)).unwrap();
            let random = output_sinr(&gaussian_vector(n, seed + 2), &d, &r, C64::new(1.0, 0.0)).unwrap();
            prop_assert!(best >= other - 1e-9);
            prop_assert!(best >= random - 1e-9);
        }
    }
}
