mod common;

use common::converter_run;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermid::estimate::{build_estimator, estimate_power, rmse_stats, rolling_rmse, simulate_temperature};
use thermid::identify::{fit_least_squares, LinearThermalModel};
use thermid::synth::ThermalNetwork;

fn random_model(rng: &mut ChaCha8Rng, m: usize, n: usize) -> LinearThermalModel<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let radius = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a = a * (rng.random_range(0.3..0.95) / radius.max(1e-3));
    let b = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    LinearThermalModel::from_matrices(a, b).unwrap()
}

#[test]
fn estimator_inverts_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut built = 0;
    while built < 100 {
        let m = rng.random_range(1..9);
        let n = rng.random_range(1..=m);
        let model = random_model(&mut rng, m, n);
        let Ok(gain) = build_estimator(&model) else { continue };
        built += 1;
        let power = DMatrix::from_fn(n, 200, |_, _| rng.random_range(0.0..5.0));
        let u0 = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let temps = simulate_temperature(&model, &power, &u0).unwrap();
        let recovered = estimate_power(&gain, &temps).unwrap();
        let expected = power.columns(0, 199);
        let err = (&recovered - expected).norm() / expected.norm();
        assert!(err <= 1e-8, "m {m} n {n}: {err:e}");
        let identity = &gain.gain * model.b_bar();
        assert!((identity - DMatrix::identity(n, n)).amax() <= 1e-10);
    }
}

#[test]
fn identified_converter_inverts_its_data() {
    let (_, data) = converter_run(1.0, 6_000, 0.0, 0);
    let model = fit_least_squares(&data.build_regression().unwrap(), 0.0).unwrap().model;
    let gain = build_estimator(&model).unwrap();
    let estimated = estimate_power(&gain, data.temperature()).unwrap();
    let reference = data.power().columns(0, data.len() - 1).into_owned();
    let report = rmse_stats(&estimated, &reference).unwrap();
    assert!(report.mu_rmse < 1e-6, "{}", report.mu_rmse);
}

#[test]
fn zero_power_decays_and_steady_state_is_reached() {
    let net = ThermalNetwork::<f64>::converter();
    let model = net.discretize(1.0).unwrap();
    let tau = net.time_constants().unwrap()[0];
    let horizon = (10.0 * tau) as usize;
    let hot = DVector::from_element(7, 10.0);
    let cooling = simulate_temperature(&model, &DMatrix::zeros(5, horizon), &hot).unwrap();
    assert!(cooling.column(horizon - 1).amax() < 10.0 * 1e-4);

    let x = DVector::from_vec(vec![2.0, 2.0, 1.25, 0.9, 1.125]);
    let (a_c, b_c) = net.continuous();
    let u_star = -a_c.lu().solve(&(b_c * &x)).unwrap();
    let power = DMatrix::from_fn(5, 3 * horizon, |i, _| x[i]);
    let heating = simulate_temperature(&model, &power, &DVector::zeros(7)).unwrap();
    let gap = (heating.column(3 * horizon - 1) - &u_star).amax();
    assert!(gap < 1e-8 * u_star.amax(), "{gap:e}");
}

#[test]
fn rolling_rmse_on_constant_error_is_flat() {
    let est = DMatrix::<f64>::from_element(3, 50, 1.5);
    let reference = DMatrix::from_element(3, 50, 1.0);
    let rolling = rolling_rmse(&est, &reference, 5.0, 0.5).unwrap();
    assert_eq!(rolling.window_samples, 10);
    assert!(rolling.mu.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    assert!(rolling.band.iter().all(|&v| (v - 0.5).abs() < 1e-12));
}

fn small_model() -> impl Strategy<Value = LinearThermalModel<f64>> {
    (1usize..5, any::<u64>()).prop_map(|(m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=m);
        random_model(&mut rng, m, n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_is_linear(model in small_model(), alpha in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (model.n_temps(), model.n_powers());
        let x1 = DMatrix::from_fn(n, 40, |_, _| rng.random_range(-1.0..1.0));
        let x2 = DMatrix::from_fn(n, 40, |_, _| rng.random_range(-1.0..1.0));
        let u1 = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let u2 = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let combined = simulate_temperature(&model, &(&x1 * alpha + &x2), &(&u1 * alpha + &u2)).unwrap();
        let separate = simulate_temperature(&model, &x1, &u1).unwrap() * alpha
            + simulate_temperature(&model, &x2, &u2).unwrap();
        prop_assert!((combined - &separate).amax() <= 1e-10 * separate.amax().max(1.0));
    }

    #[test]
    fn power_estimate_lags_by_one_sample(model in small_model(), at in 1usize..30) {
        prop_assume!(build_estimator(&model).is_ok());
        let (m, n) = (model.n_temps(), model.n_powers());
        let mut power = DMatrix::zeros(n, 40);
        power.column_mut(at).fill(1.0);
        let temps = simulate_temperature(&model, &power, &DVector::zeros(m)).unwrap();
        prop_assert!(temps.columns(0, at + 1).amax() == 0.0);
        prop_assert!(temps.column(at + 1).amax() > 0.0);
        let gain = build_estimator(&model).unwrap();
        let estimate = estimate_power(&gain, &temps).unwrap();
        prop_assert!((estimate.column(at).add_scalar(-1.0)).amax() < 1e-8);
    }

    #[test]
    fn rmse_ignores_channel_order(errors in proptest::collection::vec(-5.0f64..5.0, 4 * 12), shift in 1usize..4) {
        let est = DMatrix::from_vec(4, 12, errors);
        let zero = DMatrix::zeros(4, 12);
        let rolled = DMatrix::from_fn(4, 12, |i, j| est[((i + shift) % 4, j)]);
        let a = rmse_stats(&est, &zero).unwrap();
        let b = rmse_stats(&rolled, &zero).unwrap();
        prop_assert!((a.mu_rmse - b.mu_rmse).abs() < 1e-12);
        prop_assert!((a.sigma_rmse - b.sigma_rmse).abs() < 1e-12);
    }

    #[test]
    fn passive_network_stays_warm_under_heating(seed in 0u64..500, amp in 0.0f64..5.0) {
        let net = ThermalNetwork::<f64>::random(5, 3, seed).unwrap();
        let model = net.discretize(0.5).unwrap();
        prop_assert!(model.a_bar().iter().all(|&v| v >= -1e-12));
        prop_assert!(model.b_bar().iter().all(|&v| v >= -1e-12));
        let temps = simulate_temperature(&model, &DMatrix::from_element(3, 60, amp), &DVector::zeros(5)).unwrap();
        prop_assert!(temps.iter().all(|&v| v >= -1e-12));
    }
}
