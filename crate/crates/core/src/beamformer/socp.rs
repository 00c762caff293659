//! Small dense barrier solver for the epigraph form
//!
//! ```text
//! minimize    t
//! subject to  || A_g x + b_g ||_2 <= t     g = 1..G   (A_g is 2 x n)
//!             || x ||_2^2 <= rho^2                   (optional)
//! ```
//!
//! Each constraint gets the degree-2 log barrier `-ln(t^2 - ||u||^2)`, so after
//! centering at barrier weight `tau` the duality gap is exactly `nu / tau` with
//! `nu = 2 * (G + ball)`. Outer iterations raise `tau` until that gap is below
//! the requested tolerance.

use nalgebra::{Cholesky, DMatrix, DVector, LU};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConeRow {
    /// 2 x n real block.
    pub a: DMatrix<f64>,
    pub b: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierSettings {
    pub gap_tolerance: f64,
    pub max_newton_steps: usize,
    pub tau_growth: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-9,
            max_newton_steps: 5000,
            tau_growth: 12.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    pub t: f64,
    pub duality_gap: f64,
    pub newton_steps: usize,
}

pub struct MinimaxProblem<'a> {
    pub rows: &'a [ConeRow],
    pub ball_radius_sq: Option<f64>,
    pub dim: usize,
}

impl MinimaxProblem<'_> {
    fn cone_value(&self, row: &ConeRow, x: &DVector<f64>) -> [f64; 2] {
        let mut u = row.b;
        for j in 0..self.dim {
            u[0] += row.a[(0, j)] * x[j];
            u[1] += row.a[(1, j)] * x[j];
        }
        u
    }

    fn max_modulus(&self, x: &DVector<f64>) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let u = self.cone_value(r, x);
                u[0].hypot(u[1])
            })
            .fold(0.0, f64::max)
    }

    /// Barrier objective, or `None` outside the strict interior.
    fn objective(&self, tau: f64, t: f64, x: &DVector<f64>) -> Option<f64> {
        let mut f = tau * t;
        for row in self.rows {
            let u = self.cone_value(row, x);
            let s = t * t - u[0] * u[0] - u[1] * u[1];
            if !(s > 0.0) || t <= 0.0 {
                return None;
            }
            f -= s.ln();
        }
        if let Some(r2) = self.ball_radius_sq {
            let s = r2 - x.norm_squared();
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        Some(f)
    }

    /// Gradient and Hessian in the stacked variable `(t, x)`.
    fn derivatives(&self, tau: f64, t: f64, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim + 1;
        let mut grad = DVector::<f64>::zeros(n);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        grad[0] = tau;
        let mut ds = DVector::<f64>::zeros(n);
        for row in self.rows {
            let u = self.cone_value(row, x);
            let s = t * t - u[0] * u[0] - u[1] * u[1];
            ds[0] = 2.0 * t;
            for j in 0..self.dim {
                ds[j + 1] = -2.0 * (row.a[(0, j)] * u[0] + row.a[(1, j)] * u[1]);
            }
            grad.axpy(-1.0 / s, &ds, 1.0);
            hess.ger(1.0 / (s * s), &ds, &ds, 1.0);
            // -(d2 s)/s with d2 s = blockdiag(2, -2 A^T A)
            hess[(0, 0)] -= 2.0 / s;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let ata = row.a[(0, i)] * row.a[(0, j)] + row.a[(1, i)] * row.a[(1, j)];
                    hess[(i + 1, j + 1)] += 2.0 * ata / s;
                }
            }
        }
        if let Some(r2) = self.ball_radius_sq {
            let s = r2 - x.norm_squared();
            for j in 0..self.dim {
                ds[j + 1] = -2.0 * x[j];
            }
            ds[0] = 0.0;
            grad.axpy(-1.0 / s, &ds, 1.0);
            hess.ger(1.0 / (s * s), &ds, &ds, 1.0);
            for j in 0..self.dim {
                hess[(j + 1, j + 1)] += 2.0 / s;
            }
        }
        (grad, hess)
    }

    pub fn solve(&self, settings: &BarrierSettings) -> Result<BarrierSolution> {
        let mut x = DVector::<f64>::zeros(self.dim);
        let start = self.max_modulus(&x);
        if self.dim == 0 {
            return Ok(BarrierSolution {
                x,
                t: start,
                duality_gap: 0.0,
                newton_steps: 0,
            });
        }
        let mut t = 1.1 * start + 1e-3;
        let nu = 2.0 * (self.rows.len() + usize::from(self.ball_radius_sq.is_some())) as f64;
        let mut tau = nu / t.max(1e-6);
        let mut steps = 0usize;

        loop {
            self.center(tau, &mut t, &mut x, &mut steps, settings)?;
            let gap = nu / tau;
            if gap <= settings.gap_tolerance {
                return Ok(BarrierSolution {
                    t: self.max_modulus(&x),
                    x,
                    duality_gap: gap,
                    newton_steps: steps,
                });
            }
            tau *= settings.tau_growth;
        }
    }

    fn center(
        &self,
        tau: f64,
        t: &mut f64,
        x: &mut DVector<f64>,
        steps: &mut usize,
        settings: &BarrierSettings,
    ) -> Result<()> {
        let mut f = self
            .objective(tau, *t, x)
            .expect("centering starts from a strictly feasible point");
        loop {
            if *steps >= settings.max_newton_steps {
                return Err(Error::IterationLimit {
                    iterations: *steps,
                    gap: 2.0 * self.rows.len() as f64 / tau,
                });
            }
            *steps += 1;
            let (grad, hess) = self.derivatives(tau, *t, x);
            let rhs = -&grad;
            let step = match Cholesky::new(hess.clone()) {
                Some(ch) => ch.solve(&rhs),
                None => LU::new(hess).solve(&rhs).ok_or_else(|| Error::Conditioning {
                    what: "barrier Newton system".into(),
                    condition: f64::INFINITY,
                })?,
            };
            let decrement_sq = -grad.dot(&step);
            if decrement_sq / 2.0 <= 1e-10 {
                return Ok(());
            }
            let slack = 1e-13 * f.abs();
            let mut alpha = 1.0;
            let accepted = loop {
                let t_new = *t + alpha * step[0];
                let x_new = &*x + step.rows(1, self.dim).scale(alpha);
                if let Some(f_new) = self.objective(tau, t_new, &x_new) {
                    if f_new <= f - 0.01 * alpha * decrement_sq + slack {
                        let progressed = f - f_new > slack && alpha > 1e-6;
                        *t = t_new;
                        *x = x_new;
                        f = f_new;
                        break progressed;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break false;
                }
            };
            if !accepted {
                // stalled at working precision
                return Ok(());
            }
        }
    }
}
