//! Power method against the full decomposition on synthetic
//! low-rank-plus-identity matrices.

use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::array::{hermitian_part, CMatrix, CVector, C64};
use crate::eigen::{clutter_subspace, reference_eig, PowerSettings};
use crate::error::{Error, Result};
use crate::scene::{complex_gaussian, sub_seed};

/// Spectrum `1 + 10^(5 - 5 i / rank)` for `i < rank`, unit noise floor
/// elsewhere, rotated by a random unitary. Returns the matrix and its
/// eigenvalues in descending order.
pub fn low_rank_plus_identity(n: usize, rank: usize, seed: u64) -> (CMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(n, n, |_, _| complex_gaussian(&mut rng, 2.0));
    let q = g.qr().q();
    let values: Vec<f64> = (0..n)
        .map(|i| {
            if i < rank {
                1.0 + 10f64.powf(5.0 - 5.0 * i as f64 / rank as f64)
            } else {
                1.0
            }
        })
        .collect();
    let d = CMatrix::from_diagonal(&CVector::from_iterator(n, values.iter().map(|&v| C64::new(v, 0.0))));
    (hermitian_part(&(&q * d * q.adjoint())), values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRecord {
    pub method: String,
    pub n: usize,
    pub rank: usize,
    pub trials: usize,
    pub median_ns: f64,
    pub p90_ns: f64,
    pub mean_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub power: TimingRecord,
    pub reference: TimingRecord,
    /// Trials where the power method's rank differed from `rank`.
    pub rank_misses: usize,
    pub mean_matvecs: f64,
}

fn summarize(method: &str, n: usize, rank: usize, mut ns: Vec<f64>) -> TimingRecord {
    ns.sort_by(f64::total_cmp);
    let at = |q: f64| ns[((ns.len() - 1) as f64 * q).round() as usize];
    TimingRecord {
        method: method.to_string(),
        n,
        rank,
        trials: ns.len(),
        median_ns: at(0.5),
        p90_ns: at(0.9),
        mean_ns: ns.iter().sum::<f64>() / ns.len() as f64,
    }
}

/// Times both solvers on the same matrices, alternating which runs first.
/// Warm-up matrices are solved but not recorded.
pub fn bench_eigensolvers(
    n: usize,
    rank: usize,
    trials: usize,
    warmup: usize,
    seed: u64,
    settings: &PowerSettings,
) -> Result<BenchResult> {
    if rank >= n {
        return Err(Error::Argument(format!("rank {rank} must be below N = {n}")));
    }
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let mut power_ns = Vec::with_capacity(trials);
    let mut reference_ns = Vec::with_capacity(trials);
    let mut rank_misses = 0;
    let mut matvecs = 0usize;

    for t in 0..warmup + trials {
        let (m, _) = low_rank_plus_identity(n, rank, sub_seed(seed, t as u64));
        let run_power = || -> Result<(f64, usize, usize)> {
            let start = Instant::now();
            let basis = black_box(clutter_subspace(black_box(&m), 1.0, settings)?);
            Ok((start.elapsed().as_nanos() as f64, basis.rank(), basis.total_matvecs))
        };
        let run_reference = || -> Result<f64> {
            let start = Instant::now();
            black_box(reference_eig(black_box(&m))?);
            Ok(start.elapsed().as_nanos() as f64)
        };
        let (p, r) = if t % 2 == 0 {
            let p = run_power()?;
            (p, run_reference()?)
        } else {
            let r = run_reference()?;
            (run_power()?, r)
        };
        if t < warmup {
            continue;
        }
        power_ns.push(p.0);
        reference_ns.push(r);
        rank_misses += usize::from(p.1 != rank);
        matvecs += p.2;
    }

    Ok(BenchResult {
        power: summarize("power", n, rank, power_ns),
        reference: summarize("reference", n, rank, reference_ns),
        rank_misses,
        mean_matvecs: matvecs as f64 / trials as f64,
    })
}
