#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use thermid::dataset::{RegressionMatrices, TimeSeriesDataset};
use thermid::identify::LinearThermalModel;
use thermid::synth::{converter_schedule, generate_excitation, simulate_with_noise, ExcitationStep, ThermalNetwork};

/// Converter oracle sampled at `dt` over roughly `samples` points, each
/// rest lasting five slowest time constants.
pub fn converter_run(
    dt: f64,
    samples: usize,
    noise: f64,
    seed: u64,
) -> (LinearThermalModel<f64>, TimeSeriesDataset<f64>) {
    let net = ThermalNetwork::<f64>::converter();
    let truth = net.discretize(dt).unwrap();
    let rest = 5.0 * net.time_constants().unwrap()[0];
    let pulse = (samples as f64 * dt - 4.0 * rest) / 5.0;
    let exc = generate_excitation(&converter_schedule(pulse, rest), 5, dt).unwrap();
    let data = simulate_with_noise(&truth, &exc.power, &exc.segments, &DVector::zeros(7), noise, seed).unwrap();
    (truth, data)
}

/// Random `m`-node network with each of its `n` sources stepped alone.
pub fn random_run(m: usize, n: usize, seed: u64, noise: f64) -> (LinearThermalModel<f64>, TimeSeriesDataset<f64>) {
    let net = ThermalNetwork::<f64>::random(m, n, seed).unwrap();
    let tau = net.time_constants().unwrap()[0];
    let dt = (tau / 50.0).max(0.05);
    let truth = net.discretize(dt).unwrap();
    let schedule: Vec<ExcitationStep<f64>> = (0..n)
        .map(|j| ExcitationStep {
            label: format!("step_{j}"),
            channels: vec![j],
            amplitude: 1.0 + j as f64 * 0.1,
            duration: 3.0 * tau,
            rest: 3.0 * tau,
        })
        .collect();
    let exc = generate_excitation(&schedule, n, dt).unwrap();
    let data = simulate_with_noise(&truth, &exc.power, &exc.segments, &DVector::zeros(m), noise, seed).unwrap();
    (truth, data)
}

pub fn residual(reg: &RegressionMatrices<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    &reg.next - w * &reg.z
}

/// Closed-form ridge solution through the normal equations.
pub fn normal_equation_solution(reg: &RegressionMatrices<f64>, eps: f64) -> DMatrix<f64> {
    let p = reg.z.nrows();
    let gram = &reg.z * reg.z.transpose() + DMatrix::identity(p, p) * eps;
    let rhs = &reg.z * reg.next.transpose();
    gram.lu().solve(&rhs).unwrap().transpose()
}
