//! Ground-truth RC thermal networks used to generate identification data.
//!
//! A network obeys `C u̇ = −G u + M x` with diagonal capacitances `C`,
//! a symmetric conductance matrix `G` (off-diagonals ≤ 0, row sums equal to
//! each node's leak to ambient) and a nonnegative injection map `M`.
//! Its exact zero-order-hold discretization lies inside the identified
//! model class, which makes recovery tests sharp.

mod excitation;
mod expm;
mod network_file;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use excitation::{
    converter_schedule, generate_excitation, CalibrationStage, Excitation, ExcitationSchedule, ExcitationStep,
    CONVERTER_STAGES,
};
pub use network_file::{load_network, parse_network, save_network, write_network};

use crate::dataset::{Segment, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::estimate::simulate_temperature;
use crate::identify::LinearThermalModel;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalNetwork<T: Real> {
    capacitance: DVector<T>,
    conductance: DMatrix<T>,
    injection: DMatrix<T>,
    temp_channels: Vec<String>,
    power_channels: Vec<String>,
}

fn net_error(key: &str, message: impl Into<String>) -> Error {
    Error::Network {
        key: key.to_string(),
        message: message.into(),
    }
}

impl<T: Real> ThermalNetwork<T> {
    /// Validates and builds a network. Channel names default to `T_i`/`P_j`.
    pub fn new(capacitance: DVector<T>, conductance: DMatrix<T>, injection: DMatrix<T>) -> Result<Self> {
        let m = capacitance.len();
        let n = injection.ncols();
        Self::with_names(
            capacitance,
            conductance,
            injection,
            (0..m).map(|i| format!("T_{i}")).collect(),
            (0..n).map(|j| format!("P_{j}")).collect(),
        )
    }

    pub fn with_names(
        capacitance: DVector<T>,
        conductance: DMatrix<T>,
        injection: DMatrix<T>,
        temp_channels: Vec<String>,
        power_channels: Vec<String>,
    ) -> Result<Self> {
        let m = capacitance.len();
        if m == 0 {
            return Err(net_error("m", "network needs at least one node"));
        }
        if let Some(i) = capacitance.iter().position(|&c| !(c > T::zero()) || !c.is_finite()) {
            return Err(net_error("C", format!("capacitance of node {i} must be positive")));
        }
        if conductance.shape() != (m, m) {
            return Err(net_error(
                "G",
                format!("expected {m}x{m}, got {:?}", conductance.shape()),
            ));
        }
        if injection.nrows() != m {
            return Err(net_error("M", format!("expected {m} rows, got {}", injection.nrows())));
        }
        let scale = conductance.amax().max(T::one());
        let tol = T::lit(1e-12) * scale;
        for i in 0..m {
            let mut row_sum = T::zero();
            for j in 0..m {
                let g = conductance[(i, j)];
                if !g.is_finite() {
                    return Err(net_error("G", format!("entry ({i}, {j}) is not finite")));
                }
                if (g - conductance[(j, i)]).abs() > tol {
                    return Err(net_error("G", format!("not symmetric at ({i}, {j})")));
                }
                if i != j && g > T::zero() {
                    return Err(net_error("G", format!("off-diagonal entry ({i}, {j}) must be <= 0")));
                }
                row_sum += g;
            }
            if row_sum < -tol {
                return Err(net_error("G", format!("row {i} sums to {row_sum}, must be >= 0")));
            }
        }
        if let Some(bad) = injection.iter().position(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(net_error("M", format!("entry ({}, {}) must be >= 0", bad % m, bad / m)));
        }
        if temp_channels.len() != m {
            return Err(net_error("temp_channels", format!("expected {m} names")));
        }
        if power_channels.len() != injection.ncols() {
            return Err(net_error(
                "power_channels",
                format!("expected {} names", injection.ncols()),
            ));
        }
        Ok(Self {
            capacitance,
            conductance,
            injection,
            temp_channels,
            power_channels,
        })
    }

    /// Builds `G` from per-node ambient leaks and symmetric node-to-node
    /// conductances `(i, j, g)` with `g > 0`.
    pub fn from_edges(
        capacitance: DVector<T>,
        leaks: &[T],
        edges: &[(usize, usize, T)],
        injection: DMatrix<T>,
    ) -> Result<Self> {
        let m = capacitance.len();
        if leaks.len() != m {
            return Err(net_error("leaks", format!("expected {m} entries, got {}", leaks.len())));
        }
        let mut g = DMatrix::from_diagonal(&DVector::from_column_slice(leaks));
        for &(i, j, value) in edges {
            if i >= m || j >= m || i == j {
                return Err(net_error("edges", format!("invalid edge ({i}, {j})")));
            }
            g[(i, j)] -= value;
            g[(j, i)] -= value;
            g[(i, i)] += value;
            g[(j, j)] += value;
        }
        Self::new(capacitance, g, injection)
    }

    /// Desk-scale oracle shaped after a synchronous buck converter: seven
    /// temperature nodes and five loss sources.
    pub fn converter() -> Self {
        let lit = T::lit;
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        // nodes: 0 Qh, 1 Ql, 2 loop tracks, 3 driver, 4 inductor, 5 output tracks, 6 board
        let capacitance = DVector::from_iterator(7, [2.0, 2.0, 5.0, 1.0, 10.0, 5.0, 40.0].into_iter().map(lit));
        let leaks: Vec<T> = [0.02, 0.02, 0.03, 0.02, 0.03, 0.03, 1.0].into_iter().map(lit).collect();
        let edges: Vec<(usize, usize, T)> = [
            (0, 2, 0.5),
            (1, 2, 0.5),
            (0, 6, 0.2),
            (1, 6, 0.2),
            (3, 0, 0.05),
            (3, 1, 0.05),
            (3, 6, 0.1),
            (2, 6, 0.4),
            (4, 5, 0.3),
            (5, 2, 0.2),
            (5, 6, 0.3),
            (4, 6, 0.05),
        ]
        .into_iter()
        .map(|(i, j, g)| (i, j, lit(g)))
        .collect();
        // sources: Qh, Ql, loop tracks, driver, inductor path
        let mut injection = DMatrix::zeros(7, 5);
        for (node, source, share) in [
            (0, 0, 1.0),
            (1, 1, 1.0),
            (2, 2, 0.8),
            (0, 2, 0.1),
            (1, 2, 0.1),
            (3, 3, 1.0),
            (4, 4, 0.7),
            (5, 4, 0.3),
        ] {
            injection[(node, source)] = lit(share);
        }
        let base = Self::from_edges(capacitance, &leaks, &edges, injection).expect("valid converter network");
        Self {
            temp_channels: names(&["T_Qh", "T_Ql", "T_loop", "T_driver", "T_inductor", "T_out", "T_board"]),
            power_channels: names(&["P_Qh", "P_Ql", "P_loop", "P_driver", "P_inductor"]),
            ..base
        }
    }

    /// Random connected network with `m` nodes and `n ≤ m` sources, each
    /// source heating its own node, every node leaking to ambient.
    pub fn random(m: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > m {
            return Err(net_error("n", format!("need 1 <= n <= m, got n = {n}, m = {m}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let capacitance = DVector::from_fn(m, |_, _| T::lit(rng.random_range(1.0..20.0)));
        let leaks: Vec<T> = (0..m).map(|_| T::lit(rng.random_range(0.02..0.5))).collect();
        let mut edges = Vec::new();
        for i in 1..m {
            let j = rng.random_range(0..i);
            edges.push((i, j, T::lit(rng.random_range(0.1..1.0))));
        }
        for _ in 0..m / 2 {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            if i != j {
                edges.push((i, j, T::lit(rng.random_range(0.05..0.5))));
            }
        }
        let mut injection = DMatrix::zeros(m, n);
        for j in 0..n {
            injection[(j, j)] = T::one();
            let spill = rng.random_range(0..m);
            if spill != j {
                injection[(spill, j)] = T::lit(rng.random_range(0.0..0.3));
            }
        }
        Self::from_edges(capacitance, &leaks, &edges, injection)
    }

    pub fn n_nodes(&self) -> usize {
        self.capacitance.len()
    }

    pub fn n_sources(&self) -> usize {
        self.injection.ncols()
    }

    pub fn capacitance(&self) -> &DVector<T> {
        &self.capacitance
    }

    pub fn conductance(&self) -> &DMatrix<T> {
        &self.conductance
    }

    pub fn injection(&self) -> &DMatrix<T> {
        &self.injection
    }

    pub fn temp_channels(&self) -> &[String] {
        &self.temp_channels
    }

    pub fn power_channels(&self) -> &[String] {
        &self.power_channels
    }

    /// `(A_c, B_c) = (−C⁻¹G, C⁻¹M)`.
    pub fn continuous(&self) -> (DMatrix<T>, DMatrix<T>) {
        let m = self.n_nodes();
        let a = DMatrix::from_fn(m, m, |i, j| -self.conductance[(i, j)] / self.capacitance[i]);
        let b = DMatrix::from_fn(m, self.n_sources(), |i, j| self.injection[(i, j)] / self.capacitance[i]);
        (a, b)
    }

    /// `C^{-1/2} G C^{-1/2}`: symmetric, with the eigenvalues of `−A_c`.
    fn symmetric_rate_matrix(&self) -> DMatrix<T> {
        let m = self.n_nodes();
        DMatrix::from_fn(m, m, |i, j| {
            self.conductance[(i, j)] / (self.capacitance[i] * self.capacitance[j]).sqrt()
        })
    }

    /// True when every mode decays (`G` positive definite).
    pub fn is_stable(&self) -> bool {
        let rates = self.symmetric_rate_matrix().symmetric_eigenvalues();
        let floor = rates.amax() * T::eps() * T::from_count(self.n_nodes());
        rates.min() > floor
    }

    /// Time constants `1/λ` of the modes, longest first.
    pub fn time_constants(&self) -> Result<Vec<T>> {
        let rates = self.symmetric_rate_matrix().symmetric_eigenvalues();
        let mut taus = Vec::with_capacity(rates.len());
        for &r in rates.iter() {
            if !(r > T::zero()) {
                return Err(Error::Discretization(
                    "network has a mode without decay (node isolated from ambient)".into(),
                ));
            }
            taus.push(T::one() / r);
        }
        taus.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        Ok(taus)
    }

    /// Exact zero-order-hold discretization at period `dt`:
    /// `Ā = exp(A_c dt)`, `B̄ = A_c⁻¹(Ā − I) B_c`.
    ///
    /// Both blocks come from one exponential of the augmented generator
    /// `[[A_c, B_c], [0, 0]]·dt`, which avoids inverting `A_c`.
    pub fn discretize(&self, dt: T) -> Result<LinearThermalModel<T>> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Argument(format!("sample period must be positive, got {dt}")));
        }
        if !self.is_stable() {
            return Err(Error::Discretization(
                "A_c is singular or unstable: every node needs a conductive path to ambient".into(),
            ));
        }
        let (a, b) = self.continuous();
        let m = self.n_nodes();
        let n = self.n_sources();
        let mut generator = DMatrix::zeros(m + n, m + n);
        generator.view_mut((0, 0), (m, m)).copy_from(&(a * dt));
        generator.view_mut((0, m), (m, n)).copy_from(&(b * dt));
        let phi = expm::expm(&generator);
        LinearThermalModel::new(
            phi.view((0, 0), (m, m)).into_owned(),
            phi.view((0, m), (m, n)).into_owned(),
            dt,
            self.temp_channels.clone(),
            self.power_channels.clone(),
        )
    }
}

/// Simulates `model` under `power` from `u0`, adds i.i.d. Gaussian noise of
/// standard deviation `noise_std` to the temperatures only, and packages the
/// result with `segments`. Deterministic for a given `seed`.
pub fn simulate_with_noise<T: Real>(
    model: &LinearThermalModel<T>,
    power: &DMatrix<T>,
    segments: &[Segment],
    u0: &DVector<T>,
    noise_std: T,
    seed: u64,
) -> Result<TimeSeriesDataset<T>> {
    if !(noise_std >= T::zero()) || !noise_std.is_finite() {
        return Err(Error::Argument(format!("noise std must be >= 0, got {noise_std}")));
    }
    let mut temperature = simulate_temperature(model, power, u0)?;
    if noise_std > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in temperature.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += noise_std * T::lit(z);
        }
    }
    TimeSeriesDataset::new(
        model.power_channels().to_vec(),
        model.temp_channels().to_vec(),
        power.clone(),
        temperature,
        model.dt(),
    )?
    .with_segments(segments.to_vec())
}
