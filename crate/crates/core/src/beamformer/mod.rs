//! Phase-modulated transmit beampattern design.
//!
//! Every weight vector keeps unit gain toward the target and places a
//! sidelobe of level `comm_level` with phase `(k - 1) 2 pi / K` toward the
//! communication receiver, while minimizing the peak sidelobe over the
//! discretized sidelobe region. Weights `k >= 2` are additionally held within
//! squared distance `similarity_bound` of the first one.
//!
//! Both equalities are eliminated before solving: with `C = [a_t, a_c]` the
//! feasible set is `w0 + F z` where `F` spans the orthogonal complement of
//! `range(C)`. Choosing `w0` as the feasible point closest to the reference
//! vector makes the similarity ball a plain ball in `z`.

mod socp;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::array::{spatial_steering, ArrayGeometry, CMatrix, CVector, C64};
use crate::error::{Error, Result};

pub use socp::{BarrierSettings, BarrierSolution};
use socp::{ConeRow, MinimaxProblem};

/// Closed angle interval in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval {
    pub start_deg: f64,
    pub end_deg: f64,
}

impl AngleInterval {
    pub fn new(start_deg: f64, end_deg: f64) -> Self {
        Self { start_deg, end_deg }
    }

    pub fn contains(&self, angle_deg: f64) -> bool {
        (self.start_deg..=self.end_deg).contains(&angle_deg)
    }

    /// Uniform samples from `start` to `end` inclusive, spaced `step` apart
    /// (the last step may be shorter).
    pub fn sample(&self, step: f64) -> Vec<f64> {
        let span = self.end_deg - self.start_deg;
        let count = (span / step + 1e-9).floor() as usize;
        let mut out: Vec<f64> = (0..=count)
            .map(|i| self.start_deg + i as f64 * step)
            .collect();
        if let Some(&last) = out.last() {
            if self.end_deg - last > 1e-9 * step.max(1.0) {
                out.push(self.end_deg);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub geom: ArrayGeometry,
    pub target_angle: f64,
    pub comm_angle: f64,
    pub sidelobe_region: Vec<AngleInterval>,
    pub sidelobe_grid_step: f64,
    pub comm_level: f64,
    pub num_symbols: usize,
    pub similarity_bound: f64,
    /// Absolute tolerance on the equality residuals and the similarity bound.
    pub feasibility_tolerance: f64,
}

impl DesignSpec {
    /// Ten-element half-wavelength array, target at broadside, receiver at
    /// -50 deg, four phase symbols.
    pub fn default_preset() -> Self {
        Self {
            geom: ArrayGeometry::half_wavelength(10).expect("valid geometry"),
            target_angle: 0.0,
            comm_angle: -50.0,
            sidelobe_region: vec![AngleInterval::new(-90.0, -10.0), AngleInterval::new(10.0, 90.0)],
            sidelobe_grid_step: 1.0,
            comm_level: 1e-2,
            num_symbols: 4,
            similarity_bound: 0.016,
            feasibility_tolerance: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |a: f64| (-90.0..=90.0).contains(&a);
        if !in_range(self.target_angle) || !in_range(self.comm_angle) {
            return Err(Error::Domain("design angles must lie in [-90, 90]".into()));
        }
        if self
            .sidelobe_region
            .iter()
            .any(|iv| iv.contains(self.target_angle))
        {
            return Err(Error::Domain(format!(
                "target angle {} lies inside the sidelobe region",
                self.target_angle
            )));
        }
        if self
            .sidelobe_region
            .iter()
            .any(|iv| !(iv.start_deg <= iv.end_deg && in_range(iv.start_deg) && in_range(iv.end_deg)))
        {
            return Err(Error::Domain("sidelobe intervals must be ordered within [-90, 90]".into()));
        }
        if !(self.sidelobe_grid_step > 0.0) {
            return Err(Error::Domain("sidelobe grid step must be positive".into()));
        }
        if !(self.comm_level > 0.0) {
            return Err(Error::Domain("communication sidelobe level must be positive".into()));
        }
        if !self.num_symbols.is_power_of_two() {
            return Err(Error::Domain(format!(
                "symbol count {} is not a power of two",
                self.num_symbols
            )));
        }
        if !(self.similarity_bound >= 0.0) {
            return Err(Error::Domain("similarity bound must be non-negative".into()));
        }
        Ok(())
    }

    /// Phase symbol of the 1-based index `k`.
    pub fn phase(&self, k: usize) -> f64 {
        (k - 1) as f64 * 2.0 * PI / self.num_symbols as f64
    }

    pub fn comm_response(&self, k: usize) -> C64 {
        C64::from_polar(self.comm_level, self.phase(k))
    }

    pub fn sidelobe_grid(&self) -> Vec<f64> {
        let mut grid: Vec<f64> = self
            .sidelobe_region
            .iter()
            .flat_map(|iv| iv.sample(self.sidelobe_grid_step))
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// |w^H a_t - 1|
    pub mainlobe: f64,
    /// |w^H a_c - Delta e^{j phi_k}|
    pub comm: f64,
    /// ||w_k - w_1||^2
    pub distance_sq: f64,
    /// max(0, ||w_k - w_1||^2 - delta)
    pub similarity_excess: f64,
}

impl ConstraintResiduals {
    pub fn max_violation(&self) -> f64 {
        self.mainlobe.max(self.comm).max(self.similarity_excess)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub weights: Vec<CVector>,
    /// Peak |w^H a(theta)| over the design grid, linear.
    pub peak_sidelobe: Vec<f64>,
    pub residuals: Vec<ConstraintResiduals>,
    pub duality_gaps: Vec<f64>,
}

impl WeightSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    /// Weight for the 1-based symbol `k`.
    pub fn weight(&self, k: usize) -> &CVector {
        &self.weights[k - 1]
    }

    /// Columns are the weight vectors, M x K.
    pub fn as_matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.weights)
    }

    /// Wraps externally supplied weights; constraint bookkeeping is left empty.
    pub fn from_weights(weights: Vec<CVector>) -> Result<Self> {
        let m = weights.first().map(|w| w.len()).unwrap_or(0);
        if m == 0 || weights.iter().any(|w| w.len() != m) {
            return Err(Error::Argument(
                "weight set needs equally sized, non-empty vectors".into(),
            ));
        }
        Ok(Self {
            peak_sidelobe: vec![f64::NAN; weights.len()],
            residuals: Vec::new(),
            duality_gaps: Vec::new(),
            weights,
        })
    }
}

/// The affine set `{ w : a_t^H w = 1, a_c^H w = conj(Delta e^{j phi_k}) }`
/// parameterized as `w0 + F z`.
struct AffineSet {
    offset: CVector,
    null_basis: CMatrix,
}

impl AffineSet {
    fn closest_to(spec: &DesignSpec, k: usize, reference: &CVector) -> Result<Self> {
        let a_t = spatial_steering(&spec.geom, spec.target_angle)?.into_inner();
        let a_c = spatial_steering(&spec.geom, spec.comm_angle)?.into_inner();
        let m = a_t.len();
        let c = CMatrix::from_columns(&[a_t, a_c]);
        // conj of the required responses w^H a
        let rhs = CVector::from_vec(vec![C64::new(1.0, 0.0), spec.comm_response(k).conj()]);

        let svd = c.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let s_max = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-10 * s_max)
            .count();

        // Minimum-norm correction d with C^H d = rhs - C^H reference.
        // C^H = V S U^H  =>  d = U_r S_r^-1 V_r^H h
        let h = &rhs - c.adjoint() * reference;
        let mut d = CVector::zeros(m);
        let v = v_t.adjoint();
        for i in 0..rank {
            let coeff = v.column(i).dotc(&h) / svd.singular_values[i];
            d.axpy(coeff, &u.column(i), C64::new(1.0, 0.0));
        }
        let offset = reference + d;
        let residual = (c.adjoint() * &offset - &rhs).norm();
        if residual > spec.feasibility_tolerance {
            return Err(Error::Infeasible {
                symbol: Some(k),
                reason: "mainlobe and communication constraints are inconsistent".into(),
                residual,
            });
        }

        let range = u.columns(0, rank).into_owned();
        let proj = CMatrix::identity(m, m) - &range * range.adjoint();
        let eig = SymmetricEigen::new(crate::array::hermitian_part(&proj));
        let cols: Vec<CVector> = (0..m)
            .filter(|&i| eig.eigenvalues[i] > 0.5)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let null_basis = if cols.is_empty() {
            CMatrix::zeros(m, 0)
        } else {
            CMatrix::from_columns(&cols)
        };
        Ok(Self { offset, null_basis })
    }

    fn free_dim(&self) -> usize {
        self.null_basis.ncols()
    }

    /// Real coordinates `x = [Re z; Im z]` to a weight vector.
    fn weight(&self, x: &DVector<f64>) -> CVector {
        let p = self.free_dim();
        let z = CVector::from_fn(p, |i, _| C64::new(x[i], x[p + i]));
        &self.offset + &self.null_basis * z
    }

    /// One 2 x 2p cone row per grid angle: `[Re; Im]` of `a^H w`.
    fn cone_rows(&self, geom: &ArrayGeometry, grid: &[f64]) -> Result<Vec<ConeRow>> {
        let p = self.free_dim();
        grid.iter()
            .map(|&theta| {
                let a = spatial_steering(geom, theta)?;
                let c = a.dotc(&self.offset);
                let q = a.adjoint() * &self.null_basis;
                let mut blk = DMatrix::<f64>::zeros(2, 2 * p);
                for j in 0..p {
                    blk[(0, j)] = q[j].re;
                    blk[(0, p + j)] = -q[j].im;
                    blk[(1, j)] = q[j].im;
                    blk[(1, p + j)] = q[j].re;
                }
                Ok(ConeRow {
                    a: blk,
                    b: [c.re, c.im],
                })
            })
            .collect()
    }
}

/// Solves for `w_1`: minimax sidelobe subject to the two equality constraints.
pub fn solve_first_weight(spec: &DesignSpec) -> Result<CVector> {
    solve_first_weight_with(spec, &BarrierSettings::default()).map(|(w, _)| w)
}

pub fn solve_first_weight_with(
    spec: &DesignSpec,
    settings: &BarrierSettings,
) -> Result<(CVector, BarrierSolution)> {
    spec.validate()?;
    let grid = spec.sidelobe_grid();
    if grid.is_empty() {
        return Err(Error::Argument("sidelobe grid is empty".into()));
    }
    let m = spec.geom.num_elements();
    let affine = AffineSet::closest_to(spec, 1, &CVector::zeros(m))?;
    let rows = affine.cone_rows(&spec.geom, &grid)?;
    let problem = MinimaxProblem {
        rows: &rows,
        ball_radius_sq: None,
        dim: 2 * affine.free_dim(),
    };
    let sol = problem.solve(settings)?;
    Ok((affine.weight(&sol.x), sol))
}

/// Solves for `w_2 .. w_K` under the similarity ball around `w1` and
/// returns the full set including `w1`.
pub fn solve_remaining_weights(spec: &DesignSpec, w1: &CVector) -> Result<WeightSet> {
    solve_remaining_weights_with(spec, w1, &BarrierSettings::default())
}

pub fn solve_remaining_weights_with(
    spec: &DesignSpec,
    w1: &CVector,
    settings: &BarrierSettings,
) -> Result<WeightSet> {
    spec.validate()?;
    let m = spec.geom.num_elements();
    if w1.len() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: w1.len(),
        });
    }
    let first = residuals(spec, 1, w1, w1)?;
    if first.mainlobe.max(first.comm) > spec.feasibility_tolerance {
        return Err(Error::Argument(format!(
            "w1 violates its equality constraints (residual {:.3e})",
            first.mainlobe.max(first.comm)
        )));
    }
    let grid = spec.sidelobe_grid();
    if grid.is_empty() {
        return Err(Error::Argument("sidelobe grid is empty".into()));
    }

    let mut weights = vec![w1.clone()];
    let mut gaps = vec![0.0];
    for k in 2..=spec.num_symbols {
        let affine = AffineSet::closest_to(spec, k, w1)?;
        let base_dist = (&affine.offset - w1).norm_squared();
        let radius_sq = spec.similarity_bound - base_dist;
        if radius_sq <= 0.0 {
            return Err(Error::Infeasible {
                symbol: Some(k),
                reason: format!(
                    "similarity bound {} is below the minimum squared distance {:.6e} needed for phase {:.4} rad",
                    spec.similarity_bound,
                    base_dist,
                    spec.phase(k)
                ),
                residual: -radius_sq,
            });
        }
        let rows = affine.cone_rows(&spec.geom, &grid)?;
        let problem = MinimaxProblem {
            rows: &rows,
            ball_radius_sq: Some(radius_sq),
            dim: 2 * affine.free_dim(),
        };
        let sol = problem.solve(settings)?;
        weights.push(affine.weight(&sol.x));
        gaps.push(sol.duality_gap);
    }
    finish(spec, weights, gaps, &grid)
}

/// P1 followed by P2.
pub fn design(spec: &DesignSpec) -> Result<WeightSet> {
    let settings = BarrierSettings::default();
    let (w1, sol) = solve_first_weight_with(spec, &settings)?;
    let mut set = solve_remaining_weights_with(spec, &w1, &settings)?;
    set.duality_gaps[0] = sol.duality_gap;
    Ok(set)
}

fn finish(spec: &DesignSpec, weights: Vec<CVector>, gaps: Vec<f64>, grid: &[f64]) -> Result<WeightSet> {
    let w1 = weights[0].clone();
    let mut res = Vec::with_capacity(weights.len());
    let mut peaks = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        let r = residuals(spec, i + 1, w, &w1)?;
        if r.max_violation() > spec.feasibility_tolerance {
            return Err(Error::Infeasible {
                symbol: Some(i + 1),
                reason: "solution violates its constraints beyond tolerance".into(),
                residual: r.max_violation(),
            });
        }
        res.push(r);
        peaks.push(peak_modulus(w, &spec.geom, grid)?);
    }
    Ok(WeightSet {
        weights,
        peak_sidelobe: peaks,
        residuals: res,
        duality_gaps: gaps,
    })
}

pub fn residuals(spec: &DesignSpec, k: usize, w: &CVector, w1: &CVector) -> Result<ConstraintResiduals> {
    let a_t = spatial_steering(&spec.geom, spec.target_angle)?;
    let a_c = spatial_steering(&spec.geom, spec.comm_angle)?;
    let distance_sq = (w - w1).norm_squared();
    Ok(ConstraintResiduals {
        mainlobe: (w.dotc(&a_t) - C64::new(1.0, 0.0)).norm(),
        comm: (w.dotc(&a_c) - spec.comm_response(k)).norm(),
        distance_sq,
        similarity_excess: if k == 1 {
            0.0
        } else {
            (distance_sq - spec.similarity_bound).max(0.0)
        },
    })
}

/// `w^H a(theta)` for each grid angle.
pub fn beampattern(w: &CVector, geom: &ArrayGeometry, angle_grid: &[f64]) -> Result<Vec<C64>> {
    angle_grid
        .iter()
        .map(|&theta| Ok(w.dotc(spatial_steering(geom, theta)?.as_vector())))
        .collect()
}

pub fn peak_modulus(w: &CVector, geom: &ArrayGeometry, angle_grid: &[f64]) -> Result<f64> {
    Ok(beampattern(w, geom, angle_grid)?
        .into_iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `w_k^H a_c` for every symbol.
pub fn constellation(set: &WeightSet, geom: &ArrayGeometry, comm_angle: f64) -> Result<Vec<C64>> {
    let a_c = spatial_steering(geom, comm_angle)?;
    Ok(set.weights.iter().map(|w| w.dotc(&a_c)).collect())
}
