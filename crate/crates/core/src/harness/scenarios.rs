//! Scenario runners. Each fills CSV tables and summary metrics; the caller
//! owns staging and the report.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::array::{db10, C64};
use crate::beamformer::{beampattern, constellation, AngleInterval};
use crate::covariance::rank_threshold;
use crate::eigen::PowerSettings;
use crate::error::Result;
use crate::stap::{angle_doppler_map, doppler_grid, electrical_grid, output_sinr, sinr_curve, DopplerBank, FilterMethod};

use super::bench::bench_eigensolvers;
use super::config::Config;
use super::output::{fmt_f64, CsvTable, OutputDir};
use super::pipeline::{
    argmax_modulus, beam, canceler_suppression, circular_distance, design_weights, map_margin, median,
    nearest_index, prepare_stream, projection_suppression, StreamLabel, StreamSetup,
};

pub(crate) struct Context<'a> {
    pub config: &'a Config,
    pub trials: usize,
    pub out: &'a mut OutputDir,
    pub summary: Map<String, Value>,
}

impl Context<'_> {
    fn put(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }
}

fn int(x: usize) -> String {
    x.to_string()
}

fn prepare_both(config: &Config) -> Result<[StreamSetup; 2]> {
    let design = design_weights(config)?;
    Ok([
        prepare_stream(config, &design.weights, StreamLabel::Constant)?,
        prepare_stream(config, &design.weights, StreamLabel::Modulated)?,
    ])
}

pub(crate) fn fig2(ctx: &mut Context<'_>) -> Result<()> {
    let design = design_weights(ctx.config)?;
    let geom = design.spec.geom;
    let angles = AngleInterval::new(-90.0, 90.0).sample(0.1);

    let mut pattern = CsvTable::new(&["k", "angle_deg", "magnitude_db", "phase_rad"]);
    for (k, w) in design.weights.weights.iter().enumerate() {
        for (theta, g) in angles.iter().zip(beampattern(w, &geom, &angles)?) {
            pattern.push(vec![int(k + 1), fmt_f64(*theta), fmt_f64(db10(g.norm_sqr())), fmt_f64(g.arg())]);
        }
    }
    ctx.out.write_csv("beampattern.csv", &pattern)?;

    let mut points = CsvTable::new(&["k", "re", "im", "magnitude", "phase_rad"]);
    for (k, z) in constellation(&design.weights, &geom, design.spec.comm_angle)?.iter().enumerate() {
        points.push(vec![int(k + 1), fmt_f64(z.re), fmt_f64(z.im), fmt_f64(z.norm()), fmt_f64(wrap_phase(z.arg()))]);
    }
    ctx.out.write_csv("constellation.csv", &points)?;

    let mut weights = CsvTable::new(&["k", "element", "re", "im"]);
    for (k, w) in design.weights.weights.iter().enumerate() {
        for (m, z) in w.iter().enumerate() {
            weights.push(vec![int(k + 1), int(m), fmt_f64(z.re), fmt_f64(z.im)]);
        }
    }
    ctx.out.write_csv("weights.csv", &weights)?;

    let set = &design.weights;
    let peaks: Vec<f64> = set.peak_sidelobe.iter().map(|&p| 20.0 * p.log10()).collect();
    let violation = set.residuals.iter().map(|r| r.max_violation()).fold(0.0, f64::max);
    let distances: Vec<f64> = set.residuals.iter().map(|r| r.distance_sq).collect();
    ctx.put("peak_sidelobe_db", json!(peaks));
    ctx.put("max_constraint_violation", violation);
    ctx.put("distance_sq_to_first", json!(distances));
    ctx.put("max_duality_gap", set.duality_gaps.iter().copied().fold(0.0, f64::max));
    Ok(())
}

/// Phase in `[0, 2 pi)`, with values within 1e-9 below `2 pi` folded to ~0.
fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(2.0 * PI);
    if 2.0 * PI - w < 1e-9 {
        w - 2.0 * PI
    } else {
        w
    }
}

pub(crate) fn fig3(ctx: &mut Context<'_>) -> Result<()> {
    let [constant, modulated] = prepare_both(ctx.config)?;
    let mut table = CsvTable::new(&["index", "nonsm_db", "sm_db"]);
    for (i, (a, b)) in constant.spectrum.iter().zip(&modulated.spectrum).enumerate() {
        table.push(vec![int(i + 1), fmt_f64(db10(*a)), fmt_f64(db10(*b))]);
    }
    ctx.out.write_csv("eigenvalues.csv", &table)?;

    let mut power = CsvTable::new(&["stream", "index", "value_db", "iterations", "relative_residual"]);
    for setup in [&constant, &modulated] {
        let b = &setup.basis;
        for i in 0..b.rank() {
            power.push(vec![
                setup.label.as_str().into(),
                int(i + 1),
                fmt_f64(db10(b.values[i])),
                int(b.iterations_per_eigenpair[i]),
                fmt_f64(b.relative_residuals[i]),
            ]);
        }
    }
    ctx.out.write_csv("power_eigenvalues.csv", &power)?;

    for setup in [&constant, &modulated] {
        let tag = setup.label.as_str();
        ctx.put(format!("clutter_rank_{tag}"), setup.basis.rank());
        ctx.put(format!("reference_rank_{tag}"), setup.reference_rank);
        ctx.put(format!("matvecs_{tag}"), setup.basis.total_matvecs);
    }
    ctx.put("rank_threshold", rank_threshold(constant.scene.noise_power));
    Ok(())
}

/// Doppler response on the target beam, averaged over trials and normalized
/// by each filter's output noise power.
pub(crate) fn fig4(ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    let grid = doppler_grid(config.processing.doppler_bins);
    let target_cell = nearest_index(&grid, config.scene.target_doppler);
    let mut table = CsvTable::new(&["stream", "method", "psi", "power_db"]);

    for setup in prepare_both(config)? {
        let tag = setup.label.as_str();
        let banks = FilterMethod::ALL
            .iter()
            .map(|&m| setup.filter(m)?.bank(&grid))
            .collect::<Result<Vec<DopplerBank>>>()?;
        let sp_filter = setup.filter(FilterMethod::Subspace)?;
        let projector = sp_filter.projection().expect("subspace filter carries a projector");
        let mut power = vec![vec![0.0; grid.len()]; banks.len()];
        let mut hits = vec![0usize; banks.len()];
        let mut row_hits = 0usize;
        let mut sp_ratios = Vec::new();
        let mut tpc_ratios = Vec::new();

        for trial in 0..ctx.trials {
            let cube = setup.cube(config.seed, trial)?;
            let y = beam(&cube.samples, setup.geom(), config.design.target_angle)?;
            for (b, bank) in banks.iter().enumerate() {
                let out: Vec<C64> = bank.weights.iter().map(|w| w.dotc(&y)).collect();
                for (acc, z) in power[b].iter_mut().zip(&out) {
                    *acc += z.norm_sqr();
                }
                let peak = argmax_modulus(&out);
                hits[b] += usize::from(circular_distance(peak, target_cell, grid.len()) <= 1);
                if bank.method == FilterMethod::Subspace {
                    let row: Vec<C64> = bank.weights.iter().map(|w| w.dotc(&cube.row(0))).collect();
                    row_hits += usize::from(circular_distance(argmax_modulus(&row), target_cell, grid.len()) <= 1);
                }
            }
            let clutter = &cube.components.as_ref().expect("simulate keeps components").clutter;
            for m in 0..clutter.nrows() {
                let c = clutter.row(m).transpose();
                sp_ratios.push(projection_suppression(projector, &c)?);
                tpc_ratios.push(canceler_suppression(&c));
            }
        }

        let noise = setup.beam_noise_power();
        for (b, bank) in banks.iter().enumerate() {
            for (j, &psi) in grid.iter().enumerate() {
                let floor = noise * bank.weights[j].norm_squared();
                let avg = power[b][j] / ctx.trials as f64;
                table.push(vec![tag.into(), bank.method.to_string(), fmt_f64(psi), fmt_f64(db10(avg / floor))]);
            }
            ctx.put(
                format!("recovery_rate_{tag}_{}", bank.method),
                hits[b] as f64 / ctx.trials as f64,
            );
        }
        ctx.put(format!("recovery_rate_row0_{tag}_SP"), row_hits as f64 / ctx.trials as f64);
        ctx.put(format!("suppression_median_{tag}_SP"), median(&mut sp_ratios));
        ctx.put(format!("suppression_median_{tag}_DP_TPC"), median(&mut tpc_ratios));
        ctx.put(format!("suppression_rows_{tag}"), sp_ratios.len());
    }
    ctx.out.write_csv("doppler_response.csv", &table)?;
    Ok(())
}

pub(crate) fn fig5(ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    let grid = doppler_grid(config.processing.doppler_bins);
    let psi_t = config.scene.target_doppler;
    let amplitude = config.scene.target_amplitude.value();
    let mut table = CsvTable::new(&["stream", "method", "psi", "sinr_db"]);
    for setup in prepare_both(config)? {
        let tag = setup.label.as_str();
        let r = &setup.covariance.total;
        let mut at_target = Map::new();
        for method in FilterMethod::ALL {
            let filter = setup.filter(method)?;
            let bank = filter.bank(&grid)?;
            for (psi, sinr) in grid.iter().zip(sinr_curve(&bank, r, amplitude)?) {
                table.push(vec![tag.into(), method.to_string(), fmt_f64(*psi), fmt_f64(sinr)]);
            }
            let sinr = output_sinr(&filter.weight(psi_t)?, &filter.calibrated_steering(psi_t)?, r, amplitude)?;
            at_target.insert(method.to_string(), sinr.into());
            ctx.put(format!("sinr_{tag}_{method}_db"), sinr);
        }
        let get = |m: FilterMethod| at_target[m.as_str()].as_f64().unwrap_or(f64::NAN);
        ctx.put(
            format!("wiener_minus_sp_{tag}_db"),
            get(FilterMethod::Wiener) - get(FilterMethod::Subspace),
        );
        ctx.put(format!("clutter_rank_{tag}"), setup.basis.rank());
    }
    ctx.out.write_csv("sinr.csv", &table)?;
    Ok(())
}

const MAP_METHODS: [FilterMethod; 3] = [FilterMethod::Doppler, FilterMethod::TwoPulseCanceler, FilterMethod::Subspace];

fn angle_doppler(ctx: &mut Context<'_>, label: StreamLabel) -> Result<()> {
    let config = ctx.config;
    let design = design_weights(config)?;
    let setup = prepare_stream(config, &design.weights, label)?;
    let grid = doppler_grid(config.processing.doppler_bins);
    let angles = electrical_grid(config.processing.angle_bins);
    let target = (config.design.target_angle.to_radians().sin(), config.scene.target_doppler);
    let mut table = CsvTable::new(&["method", "u", "psi", "power_db"]);
    for method in MAP_METHODS {
        let bank = setup.filter(method)?.bank(&grid)?;
        let mut power = DMatrix::<f64>::zeros(angles.len(), grid.len());
        for trial in 0..ctx.trials {
            let cube = setup.cube(config.seed, trial)?;
            let map = angle_doppler_map(&cube.samples, setup.geom(), &bank, &angles)?;
            power += map.values.map(|z| z.norm_sqr());
        }
        power /= ctx.trials as f64;
        for (i, &u) in angles.iter().enumerate() {
            for (j, &psi) in grid.iter().enumerate() {
                table.push(vec![method.to_string(), fmt_f64(u), fmt_f64(psi), fmt_f64(db10(power[(i, j)]))]);
            }
        }
        let margin = map_margin(
            &power,
            &angles,
            &grid,
            target,
            config.scene.doppler_center,
            2.0 * config.scene.doppler_spread,
        );
        ctx.put(format!("target_db_{method}"), margin.target_db);
        ctx.put(format!("clutter_max_db_{method}"), margin.clutter_max_db);
        ctx.put(format!("margin_db_{method}"), margin.margin_db);
    }
    ctx.out.write_csv("angle_doppler.csv", &table)?;
    ctx.put("clutter_rank", setup.basis.rank());
    Ok(())
}

pub(crate) fn fig6(ctx: &mut Context<'_>) -> Result<()> {
    angle_doppler(ctx, StreamLabel::Constant)
}

pub(crate) fn fig7(ctx: &mut Context<'_>) -> Result<()> {
    angle_doppler(ctx, StreamLabel::Modulated)
}

/// Power method at its default tolerance against the full decomposition, at
/// `n` and `2 n`.
pub(crate) fn bench_eig(ctx: &mut Context<'_>) -> Result<()> {
    let b = &ctx.config.bench;
    let settings = PowerSettings {
        seed: ctx.config.seed,
        ..PowerSettings::default()
    };
    let mut table = CsvTable::new(&["method", "n", "rank", "trials", "median_ns", "p90_ns", "mean_ns"]);
    let mut medians = Vec::new();
    for n in [b.n, 2 * b.n] {
        let res = bench_eigensolvers(n, b.rank, ctx.trials, b.warmup, ctx.config.seed, &settings)?;
        for rec in [&res.power, &res.reference] {
            table.push(vec![
                rec.method.clone(),
                int(rec.n),
                int(rec.rank),
                int(rec.trials),
                fmt_f64(rec.median_ns),
                fmt_f64(rec.p90_ns),
                fmt_f64(rec.mean_ns),
            ]);
        }
        ctx.put(format!("median_ns_power_n{n}"), res.power.median_ns);
        ctx.put(format!("median_ns_reference_n{n}"), res.reference.median_ns);
        ctx.put(format!("mean_ns_power_n{n}"), res.power.mean_ns);
        ctx.put(format!("mean_ns_reference_n{n}"), res.reference.mean_ns);
        ctx.put(format!("rank_misses_n{n}"), res.rank_misses);
        ctx.put(format!("mean_matvecs_n{n}"), res.mean_matvecs);
        medians.push(res.power.median_ns);
    }
    ctx.put("scaling_ratio", medians[1] / medians[0]);
    ctx.out.write_csv("timing.csv", &table)?;
    Ok(())
}

/// Configured stream only: spectrum, SINR, one data cube and the covariance.
pub(crate) fn custom(ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    let design = design_weights(config)?;
    let setup = prepare_stream(config, &design.weights, StreamLabel::Modulated)?;
    let amplitude = config.scene.target_amplitude.value();
    let grid = doppler_grid(config.processing.doppler_bins);

    let mut eig = CsvTable::new(&["index", "value_db"]);
    for (i, v) in setup.spectrum.iter().enumerate() {
        eig.push(vec![int(i + 1), fmt_f64(db10(*v))]);
    }
    ctx.out.write_csv("eigenvalues.csv", &eig)?;

    let mut sinr = CsvTable::new(&["method", "psi", "sinr_db"]);
    for method in FilterMethod::ALL {
        let bank = setup.filter(method)?.bank(&grid)?;
        for (psi, s) in grid.iter().zip(sinr_curve(&bank, &setup.covariance.total, amplitude)?) {
            sinr.push(vec![method.to_string(), fmt_f64(*psi), fmt_f64(s)]);
        }
    }
    ctx.out.write_csv("sinr.csv", &sinr)?;

    let cube = setup.cube(config.seed, 0)?;
    ctx.out.write_matrix_csv("covariance.csv", &setup.covariance.total)?;
    ctx.out.write_matrix_binary("covariance.bin", &setup.covariance.total)?;
    ctx.out.write_matrix_csv("cube.csv", &cube.samples)?;
    ctx.out.write_matrix_binary("cube.bin", &cube.samples)?;

    ctx.put("clutter_rank", setup.basis.rank());
    ctx.put("reference_rank", setup.reference_rank);
    ctx.put("symbol_stream", json!(setup.scene.symbol_stream));
    Ok(())
}
