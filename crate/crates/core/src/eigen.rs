//! Clutter subspace extraction.
//!
//! [`clutter_subspace`] runs the power method on the clutter-plus-noise
//! covariance, deflates each accepted eigenpair and stops at the first
//! estimate that does not clear the noise floor. That last pair is discarded.
//! [`reference_eig`] is a full Hermitian eigendecomposition used as the
//! oracle and as the SVD-style baseline.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::array::{frobenius, hermitian_part, CMatrix, CVector, C64};
use crate::covariance::rank_threshold;
use crate::error::{Error, Result};
use crate::scene::complex_gaussian;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Relative residual under which a capped sweep is still accepted.
pub const ACCEPT_RESIDUAL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSettings {
    /// Stop once the relative change of the Rayleigh estimate drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub value: f64,
    pub vector: CVector,
    /// Matrix-vector products performed.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    /// Descending.
    pub values: Vec<f64>,
    /// N x l, unit-norm columns.
    pub vectors: CMatrix,
    pub iterations_per_eigenpair: Vec<usize>,
    /// Matrix-vector products including the discarded stopping pair.
    pub total_matvecs: usize,
    /// `||R u - lambda u|| / lambda` against the undeflated matrix, per pair.
    pub relative_residuals: Vec<f64>,
    /// Extraction stopped because l reached N - 1, not at the noise floor.
    pub hit_rank_cap: bool,
}

impl EigenBasis {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            values: Vec::new(),
            vectors: CMatrix::zeros(dim, 0),
            iterations_per_eigenpair: Vec::new(),
            total_matvecs: 0,
            relative_residuals: Vec::new(),
            hit_rank_cap: false,
        }
    }
}

/// Calls `$self.$portable(args)` or, when the CPU has AVX2, the same body
/// compiled for it as `$self.$wide(args)`. Lanes are independent outputs, so
/// both paths produce identical bits.
macro_rules! dispatch {
    ($self:ident . $portable:ident ( $($arg:expr),* ), $wide:ident) => {{
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: AVX2 support was just checked at runtime.
            return unsafe { $self.$wide($($arg),*) };
        }
        $self.$portable($($arg),*)
    }};
}

/// Real and imaginary planes of a square complex matrix (column-major), so
/// the inner matvec loop vectorizes.
#[derive(Clone)]
struct SplitMatrix {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitMatrix {
    fn new(a: &CMatrix) -> Self {
        let data = a.as_slice();
        let mut re = Vec::with_capacity(data.len());
        let mut im = Vec::with_capacity(data.len());
        for z in data {
            re.push(z.re);
            im.push(z.im);
        }
        Self { n: a.nrows(), re, im }
    }

    /// `A <- (I - u u^H) A (I - u u^H)` for unit `u`. Equals `A - lambda u u^H`
    /// when `u` is an exact eigenvector; otherwise it still removes `u` from
    /// the range, so the error left behind is second order in the error of `u`.
    fn deflate(&mut self, u: &SplitVector) {
        let n = self.n;
        let mut au = SplitVector::zeros(n);
        self.matvec(u, &mut au);
        let mu = u.real_dot(&au);
        // A -= u z^H + z u^H with z = A u - (mu / 2) u
        let z = SplitVector {
            re: au.re.iter().zip(&u.re).map(|(a, b)| a - 0.5 * mu * b).collect(),
            im: au.im.iter().zip(&u.im).map(|(a, b)| a - 0.5 * mu * b).collect(),
        };
        dispatch!(self.rank2_update(u, &z), rank2_update_avx2);
    }

    #[inline(always)]
    fn rank2_update(&mut self, u: &SplitVector, z: &SplitVector) {
        let n = self.n;
        for j in 0..n {
            let (zr, zi) = (z.re[j], -z.im[j]);
            let (ur, ui) = (u.re[j], -u.im[j]);
            let cr = &mut self.re[j * n..(j + 1) * n];
            let ci = &mut self.im[j * n..(j + 1) * n];
            let rows = u.re.iter().zip(&u.im).zip(z.re.iter().zip(&z.im));
            for ((r, i), ((&vr, &vi), (&wr, &wi))) in cr.iter_mut().zip(ci.iter_mut()).zip(rows) {
                *r -= vr * zr - vi * zi + wr * ur - wi * ui;
                *i -= vr * zi + vi * zr + wr * ui + wi * ur;
            }
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    fn rank2_update_avx2(&mut self, u: &SplitVector, z: &SplitVector) {
        self.rank2_update(u, z)
    }

    fn matvec(&self, x: &SplitVector, out: &mut SplitVector) {
        dispatch!(self.matvec_kernel(x, out), matvec_avx2)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    fn matvec_avx2(&self, x: &SplitVector, out: &mut SplitVector) {
        self.matvec_kernel(x, out)
    }

    #[inline(always)]
    fn matvec_kernel(&self, x: &SplitVector, out: &mut SplitVector) {
        let n = self.n;
        let (out_re, out_im) = (&mut out.re[..n], &mut out.im[..n]);
        out_re.fill(0.0);
        out_im.fill(0.0);
        let column = |j: usize| (&self.re[j * n..(j + 1) * n], &self.im[j * n..(j + 1) * n]);
        // four columns per pass over the output
        let mut j = 0;
        while j + 4 <= n {
            let ((r0, i0), (r1, i1), (r2, i2), (r3, i3)) = (column(j), column(j + 1), column(j + 2), column(j + 3));
            let (a, b) = (&x.re[j..j + 4], &x.im[j..j + 4]);
            for k in 0..n {
                out_re[k] += (r0[k] * a[0] - i0[k] * b[0] + r1[k] * a[1] - i1[k] * b[1])
                    + (r2[k] * a[2] - i2[k] * b[2] + r3[k] * a[3] - i3[k] * b[3]);
            }
            for k in 0..n {
                out_im[k] += (r0[k] * b[0] + i0[k] * a[0] + r1[k] * b[1] + i1[k] * a[1])
                    + (r2[k] * b[2] + i2[k] * a[2] + r3[k] * b[3] + i3[k] * a[3]);
            }
            j += 4;
        }
        for j in j..n {
            let (a, b) = (x.re[j], x.im[j]);
            let (cr, ci) = column(j);
            for ((o, &r), &i) in out_re.iter_mut().zip(cr).zip(ci) {
                *o += r * a - i * b;
            }
            for ((o, &r), &i) in out_im.iter_mut().zip(cr).zip(ci) {
                *o += r * b + i * a;
            }
        }
    }
}

#[derive(Clone)]
struct SplitVector {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitVector {
    fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    fn from_complex(v: &CVector) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    fn to_complex(&self) -> CVector {
        CVector::from_iterator(self.re.len(), self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)))
    }

    /// `Re(self^H other)`.
    fn real_dot(&self, other: &SplitVector) -> f64 {
        let a: f64 = self.re.iter().zip(&other.re).map(|(x, y)| x * y).sum();
        let b: f64 = self.im.iter().zip(&other.im).map(|(x, y)| x * y).sum();
        a + b
    }

    fn norm(&self) -> f64 {
        self.real_dot(self).sqrt()
    }

    fn assign_scaled(&mut self, src: &SplitVector, factor: f64) {
        for (d, s) in self.re.iter_mut().zip(&src.re) {
            *d = s * factor;
        }
        for (d, s) in self.im.iter_mut().zip(&src.im) {
            *d = s * factor;
        }
    }
}

/// Power method with the relative-change stopping rule
/// `|rho_k - rho_{k-1}| / |rho_k| < tolerance`, checked from the second
/// product on. Returns the last Rayleigh estimate and the vector it was taken at.
pub fn power_iterate(a: &CMatrix, v0: &CVector, tolerance: f64, max_iter: usize) -> Result<PowerResult> {
    if !a.is_square() || a.nrows() != v0.len() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            actual: v0.len(),
        });
    }
    match iterate(&SplitMatrix::new(a), v0, tolerance, max_iter)? {
        Sweep::Converged(res) => Ok(res),
        Sweep::Capped { last, change, .. } => Err(Error::Convergence {
            index: 1,
            iterations: max_iter,
            last_estimate: last.value,
            last_change: change,
        }),
    }
}

enum Sweep {
    Converged(PowerResult),
    Capped {
        last: PowerResult,
        change: f64,
        /// `||A y - rho y||` at the final iterate.
        residual: f64,
    },
}

fn iterate(a: &SplitMatrix, v0: &CVector, tolerance: f64, max_iter: usize) -> Result<Sweep> {
    if !(tolerance > 0.0) {
        return Err(Error::Domain("power iteration tolerance must be positive".into()));
    }
    let norm0 = v0.norm();
    if !(norm0 > f64::MIN_POSITIVE) || !norm0.is_finite() {
        return Err(Error::Domain("start vector is numerically zero".into()));
    }

    let n = v0.len();
    let mut y = SplitVector::from_complex(&v0.unscale(norm0));
    let mut v = SplitVector::zeros(n);
    let mut prev = f64::NAN;
    let mut change = f64::INFINITY;
    let mut estimate = 0.0;
    for k in 1..=max_iter {
        a.matvec(&y, &mut v);
        estimate = y.real_dot(&v);
        if k >= 2 {
            change = (estimate - prev).abs() / estimate.abs();
            if change < tolerance {
                return Ok(Sweep::Converged(PowerResult {
                    value: estimate,
                    vector: y.to_complex(),
                    iterations: k,
                }));
            }
        }
        if k == max_iter {
            break;
        }
        let eta = v.norm();
        if eta == 0.0 {
            // y is an exact null vector
            return Ok(Sweep::Converged(PowerResult {
                value: 0.0,
                vector: y.to_complex(),
                iterations: k,
            }));
        }
        prev = estimate;
        y.assign_scaled(&v, 1.0 / eta);
    }
    let y = y.to_complex();
    let residual = (v.to_complex() - &y * C64::new(estimate, 0.0)).norm();
    Ok(Sweep::Capped {
        residual,
        change,
        last: PowerResult {
            value: estimate,
            vector: y,
            iterations: max_iter,
        },
    })
}

fn project_out(v: &mut CVector, basis: &[CVector]) {
    let v = v.as_mut_slice();
    for u in basis {
        let u = u.as_slice();
        let c: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi -= c * ui;
        }
    }
}

fn orthogonalize(v: &mut CVector, basis: &[CVector]) {
    project_out(v, basis);
    project_out(v, basis);
}

/// Components along already deflated directions need no removal: the
/// working matrix annihilates them on the first product.
fn random_start(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
}

/// Deflated power method. Stops when an estimate falls to or below the noise
/// floor `noise_power * (1 + RANK_SLACK)`; the stopping pair is not kept.
pub fn clutter_subspace(r: &CMatrix, noise_power: f64, settings: &PowerSettings) -> Result<EigenBasis> {
    if !r.is_square() {
        return Err(Error::Argument("covariance must be square".into()));
    }
    let n = r.nrows();
    let threshold = rank_threshold(noise_power);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let original = SplitMatrix::new(r);
    let mut work = original.clone();
    let mut basis = EigenBasis::empty(n);
    let mut kept: Vec<CVector> = Vec::new();
    let cap = n.saturating_sub(1);

    for index in 1..=n {
        if kept.len() == cap {
            basis.hit_rank_cap = true;
            break;
        }
        let mut found = None;
        let mut failure = (0.0, f64::INFINITY);
        for _attempt in 0..2 {
            let v0 = random_start(n, &mut rng);
            match iterate(&work, &v0, settings.tolerance, settings.max_iter)? {
                Sweep::Converged(res) => {
                    found = Some(res);
                    break;
                }
                Sweep::Capped { last, residual, .. } if residual <= ACCEPT_RESIDUAL * last.value.abs() => {
                    // near-degenerate: any vector of the cluster spans the same subspace
                    found = Some(last);
                    break;
                }
                Sweep::Capped { last, change, .. } => {
                    basis.total_matvecs += last.iterations;
                    failure = (last.value, change);
                }
            }
        }
        let Some(found) = found else {
            return Err(Error::Convergence {
                index,
                iterations: settings.max_iter,
                last_estimate: failure.0,
                last_change: failure.1,
            });
        };
        basis.total_matvecs += found.iterations;
        if found.value <= threshold {
            break;
        }

        let lambda = found.value;
        let mut u = found.vector;
        orthogonalize(&mut u, &kept);
        let norm = u.norm();
        if norm == 0.0 {
            break;
        }
        u.unscale_mut(norm);
        let split_u = SplitVector::from_complex(&u);
        work.deflate(&split_u);

        let mut ru = SplitVector::zeros(n);
        original.matvec(&split_u, &mut ru);
        let residual = ru
            .re
            .iter()
            .zip(&split_u.re)
            .chain(ru.im.iter().zip(&split_u.im))
            .map(|(r, v)| (r - lambda * v).powi(2))
            .sum::<f64>()
            .sqrt();
        basis.relative_residuals.push(residual / lambda);
        basis.values.push(lambda);
        basis.iterations_per_eigenpair.push(found.iterations);
        kept.push(u);
    }

    if !kept.is_empty() {
        basis.vectors = CMatrix::from_columns(&kept);
    }
    Ok(basis)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Descending.
    pub values: Vec<f64>,
    /// Unitary, columns ordered like `values`.
    pub vectors: CMatrix,
}

pub fn reference_eig(a: &CMatrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::Argument("matrix must be square".into()));
    }
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    let asym = frobenius(&(a - a.adjoint()));
    if asym > 1e-10 * scale {
        return Err(Error::Domain(format!(
            "matrix is not Hermitian (asymmetry {:.3e} relative)",
            asym / scale
        )));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<CVector> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let vectors = if cols.is_empty() {
        CMatrix::zeros(0, 0)
    } else {
        CMatrix::from_columns(&cols)
    };
    Ok(Spectrum { values, vectors })
}

/// Top eigenvectors from the full decomposition: either the first `rank`, or
/// all above the noise floor when `rank` is `None`.
pub fn reference_subspace(r: &CMatrix, noise_power: f64, rank: Option<usize>) -> Result<EigenBasis> {
    let spec = reference_eig(r)?;
    let n = r.nrows();
    let l = rank
        .unwrap_or_else(|| crate::covariance::clutter_rank(&spec.values, noise_power))
        .min(n);
    let mut basis = EigenBasis::empty(n);
    basis.values = spec.values[..l].to_vec();
    basis.vectors = spec.vectors.columns(0, l).into_owned();
    basis.relative_residuals = vec![0.0; l];
    Ok(basis)
}
