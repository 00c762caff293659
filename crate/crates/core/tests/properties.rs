use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use smstap::array::{frobenius, hermitian_part, spatial_steering, ArrayGeometry, CMatrix, CVector, C64};
use smstap::beamformer::{design, AngleInterval, DesignSpec, WeightSet};
use smstap::covariance::{clutter_covariance, clutter_covariance_by_patch, clutter_rank, doppler_kernel, total_covariance};
use smstap::eigen::{clutter_subspace, power_iterate, reference_eig, PowerSettings};
use smstap::scene::{clutter_patch_angles, random_symbol_stream, simulate, simulate_clutter, SceneConfig};

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize, k: usize) -> WeightSet {
    WeightSet::from_weights((0..k).map(|_| CVector::from_fn(m, |_, _| gaussian(rng) * 0.3)).collect()).unwrap()
}

fn preset_weights() -> &'static WeightSet {
    static W: OnceLock<WeightSet> = OnceLock::new();
    W.get_or_init(|| design(&DesignSpec::default_preset()).unwrap())
}

fn scene(weights: WeightSet, stream: Vec<usize>, patches: usize, seed: u64) -> SceneConfig {
    let m = weights.num_elements();
    SceneConfig {
        geom: ArrayGeometry::half_wavelength(m).unwrap(),
        num_pulses: stream.len(),
        weight_set: weights,
        symbol_stream: stream,
        target_angle: 0.0,
        target_doppler: 0.4,
        target_amplitude: C64::new(1.7, 0.3),
        clutter_region: AngleInterval::new(-60.0, 60.0),
        num_patches: patches,
        clutter_power: 10.0,
        doppler_centers: vec![0.0],
        doppler_spread: 0.02,
        noise_power: 1.0,
        rng_seed: seed,
    }
}

/// Spectrum with a known top part, as in the eigensolver oracle.
fn low_rank_plus_identity(rng: &mut ChaCha8Rng, n: usize, r: usize) -> (CMatrix, Vec<f64>) {
    let mut values = vec![1.0; n];
    let mut v = 4.0;
    for i in (0..r).rev() {
        values[i] = v;
        v *= 1.1 + rng.random::<f64>();
    }
    let q = CMatrix::from_fn(n, n, |_, _| gaussian(rng)).qr().q();
    let d = CMatrix::from_diagonal(&CVector::from_iterator(n, values.iter().map(|&x| C64::new(x, 0.0))));
    (hermitian_part(&(&q * d * q.adjoint())), values)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clutter_covariance_is_hermitian_psd_and_form_independent(
        seed in any::<u64>(),
        m in 2usize..8,
        k in prop::sample::select(vec![1usize, 2, 4]),
        n in 2usize..16,
        patches in 1usize..8,
        spread in 0.0f64..0.2,
        center in -0.3f64..0.3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = random_weights(&mut rng, m, k);
        let stream = random_symbol_stream(k, n, seed);
        let geom = ArrayGeometry::half_wavelength(m).unwrap();
        let angles = clutter_patch_angles(&AngleInterval::new(-70.0, 70.0), patches);
        let kernel = doppler_kernel(n, spread, center).unwrap();
        let rc = clutter_covariance(&weights, &stream, &geom, &angles, 3.0, &kernel).unwrap();
        let by_patch = clutter_covariance_by_patch(&weights, &stream, &geom, &angles, 3.0, &kernel).unwrap();

        prop_assert_eq!(frobenius(&(&rc - rc.adjoint())), 0.0);
        let scale = frobenius(&rc).max(1e-300);
        prop_assert!(frobenius(&(&rc - &by_patch)) <= 1e-12 * scale);
        let spectrum = reference_eig(&rc).unwrap().values;
        prop_assert!(spectrum[n - 1] >= -1e-8 * spectrum[0].abs().max(1e-300));
    }

    #[test]
    fn modulation_never_lowers_clutter_rank(seed in any::<u64>(), spread in 0.002f64..0.05) {
        let weights = preset_weights();
        let n = 24;
        let stream = random_symbol_stream(weights.len(), n, seed);
        prop_assume!(stream.iter().any(|&s| s != stream[0]));
        let geom = ArrayGeometry::half_wavelength(10).unwrap();
        let angles = clutter_patch_angles(&AngleInterval::new(-60.0, 60.0), 50);
        let kernel = doppler_kernel(n, spread, 0.0).unwrap();
        let rank = |stream: &[usize]| {
            let rc = clutter_covariance(weights, stream, &geom, &angles, 1e5, &kernel).unwrap();
            let r = total_covariance(rc, 1.0).unwrap().total;
            clutter_rank(&reference_eig(&r).unwrap().values, 1.0)
        };
        prop_assert!(rank(&vec![1; n]) <= rank(&stream));
    }

    #[test]
    fn deflation_exposes_second_eigenvalue(seed in any::<u64>(), n in 4usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, values) = low_rank_plus_identity(&mut rng, n, 3);
        let v0 = CVector::from_fn(n, |_, _| gaussian(&mut rng));
        let first = power_iterate(&m, &v0, 1e-12, 10_000).unwrap();
        prop_assert!((first.value - values[0]).abs() <= 1e-8 * values[0]);
        let u = &first.vector;
        let deflated = &m - u * u.adjoint() * C64::new(first.value, 0.0);
        let second = power_iterate(&hermitian_part(&deflated), &v0, 1e-12, 10_000).unwrap();
        prop_assert!((second.value - values[1]).abs() <= 1e-6 * values[1], "{} vs {}", second.value, values[1]);
    }

    #[test]
    fn clutter_subspace_is_deterministic(seed in any::<u64>(), n in 4usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, _) = low_rank_plus_identity(&mut rng, n, n / 3);
        let settings = PowerSettings { seed, ..PowerSettings::default() };
        let a = clutter_subspace(&m, 1.0, &settings).unwrap();
        let b = clutter_subspace(&m, 1.0, &settings).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn simulation_is_reproducible_and_linear_in_amplitude(seed in any::<u64>(), scale in -3.0f64..3.0) {
        prop_assume!(scale != 0.0);
        let weights = preset_weights().clone();
        let stream = random_symbol_stream(weights.len(), 12, seed);
        let base = scene(weights, stream, 9, seed);
        let a = simulate(&base).unwrap();
        prop_assert_eq!(&a, &simulate(&base).unwrap());

        let mut scaled = base.clone();
        scaled.target_amplitude *= scale;
        let b = simulate(&scaled).unwrap();
        let (ca, cb) = (a.components.unwrap(), b.components.unwrap());
        prop_assert_eq!(&ca.clutter, &cb.clutter);
        prop_assert_eq!(&ca.noise, &cb.noise);
        prop_assert!(frobenius(&(&ca.signal * C64::new(scale, 0.0) - &cb.signal)) <= 1e-14 * frobenius(&cb.signal));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn designed_weights_are_feasible(
        m in 6usize..13,
        comm in prop::sample::select(vec![-70.0, -50.0, -30.0, 25.0, 45.0]),
        k in prop::sample::select(vec![2usize, 4]),
        level in 0.005f64..0.1,
    ) {
        let spec = DesignSpec {
            geom: ArrayGeometry::half_wavelength(m).unwrap(),
            comm_angle: comm,
            num_symbols: k,
            comm_level: level,
            similarity_bound: 0.05,
            ..DesignSpec::default_preset()
        };
        let set = design(&spec).unwrap();
        let a_t = spatial_steering(&spec.geom, spec.target_angle).unwrap();
        let a_c = spatial_steering(&spec.geom, comm).unwrap();
        for (i, w) in set.weights.iter().enumerate() {
            prop_assert!((w.dotc(&a_t) - 1.0).norm() <= 1e-6);
            let z = w.dotc(&a_c);
            prop_assert!((z.norm() - level).abs() <= 1e-6);
            let phase = (z.arg() - 2.0 * PI * i as f64 / k as f64).rem_euclid(2.0 * PI);
            prop_assert!(phase.min(2.0 * PI - phase) <= 1e-3);
            prop_assert!((w - &set.weights[0]).norm_squared() <= spec.similarity_bound + 1e-6);
        }
    }
}

#[test]
fn analytic_covariance_is_the_same_for_every_antenna() {
    let weights = preset_weights().clone();
    let stream = random_symbol_stream(weights.len(), 6, 5);
    let config = scene(weights, stream, 4, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 40_000;
    let mut per_antenna = [CMatrix::zeros(6, 6), CMatrix::zeros(6, 6)];
    for _ in 0..draws {
        let c = simulate_clutter(&config, &mut rng).unwrap();
        for (acc, m) in per_antenna.iter_mut().zip([0, 7]) {
            let row = c.row(m).transpose();
            acc.gerc(C64::new(1.0 / draws as f64, 0.0), &row, &row, C64::new(1.0, 0.0));
        }
    }
    let diff = frobenius(&(&per_antenna[0] - &per_antenna[1])) / frobenius(&per_antenna[0]);
    assert!(diff < 0.03, "antennas 0 and 7 differ by {diff}");
}
