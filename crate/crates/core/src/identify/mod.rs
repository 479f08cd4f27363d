//! Identification of the discrete temperature-power dynamics
//! `u(k+1) = Ā u(k) + B̄ x(k)`.
//!
//! Writing `W = [Ā B̄]` (m×(m+n)) and stacking snapshots as in
//! [`RegressionMatrices`], identification minimizes
//! `‖Uout − W Z‖²_F + ε‖W‖²_F`. [`fit_least_squares`] solves it in closed
//! form; [`fit_constrained`] adds per-entry sign and equality constraints.

mod constrained;
mod model_file;
mod rank;
mod tuning;

use nalgebra::{DMatrix, SVD};

pub use constrained::{
    fit_constrained, Block, ConstraintSpec, EqualityConstraint, IdentOptions, SignConstraint, SignKind,
};
pub use model_file::{load_model, parse_model, save_model, write_model};
pub use rank::{check_rank, RankReport};
pub use tuning::{default_epsilon_grid, tune_epsilon, EpsilonScan};

use crate::dataset::RegressionMatrices;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Identified pair `(Ā, B̄)` with its sample period and channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearThermalModel<T: Real> {
    a_bar: DMatrix<T>,
    b_bar: DMatrix<T>,
    dt: T,
    temp_channels: Vec<String>,
    power_channels: Vec<String>,
}

impl<T: Real> LinearThermalModel<T> {
    pub fn new(
        a_bar: DMatrix<T>,
        b_bar: DMatrix<T>,
        dt: T,
        temp_channels: Vec<String>,
        power_channels: Vec<String>,
    ) -> Result<Self> {
        let m = temp_channels.len();
        let n = power_channels.len();
        if a_bar.shape() != (m, m) {
            return Err(Error::Argument(format!(
                "A_bar is {:?}, expected ({m}, {m})",
                a_bar.shape()
            )));
        }
        if b_bar.shape() != (m, n) {
            return Err(Error::Argument(format!(
                "B_bar is {:?}, expected ({m}, {n})",
                b_bar.shape()
            )));
        }
        if a_bar.iter().chain(b_bar.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("model entries must be finite".into()));
        }
        if !(dt > T::zero()) {
            return Err(Error::Argument(format!("sample period must be positive, got {dt}")));
        }
        Ok(Self {
            a_bar,
            b_bar,
            dt,
            temp_channels,
            power_channels,
        })
    }

    /// Model with default channel names `T_i` / `P_j` and unit sample period.
    pub fn from_matrices(a_bar: DMatrix<T>, b_bar: DMatrix<T>) -> Result<Self> {
        let temps = (0..a_bar.nrows()).map(|i| format!("T_{i}")).collect();
        let powers = (0..b_bar.ncols()).map(|j| format!("P_{j}")).collect();
        Self::new(a_bar, b_bar, T::one(), temps, powers)
    }

    /// Splits a stacked `W = [Ā B̄]` using the regression's metadata.
    pub fn from_stacked(w: &DMatrix<T>, reg: &RegressionMatrices<T>) -> Result<Self> {
        let m = reg.n_temps;
        Self::new(
            w.columns(0, m).into_owned(),
            w.columns(m, reg.n_powers).into_owned(),
            reg.dt,
            reg.temp_channels.clone(),
            reg.power_channels.clone(),
        )
    }

    pub fn a_bar(&self) -> &DMatrix<T> {
        &self.a_bar
    }

    pub fn b_bar(&self) -> &DMatrix<T> {
        &self.b_bar
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn temp_channels(&self) -> &[String] {
        &self.temp_channels
    }

    pub fn power_channels(&self) -> &[String] {
        &self.power_channels
    }

    pub fn n_temps(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn n_powers(&self) -> usize {
        self.b_bar.ncols()
    }

    /// `W = [Ā B̄]`, m×(m+n).
    pub fn stacked(&self) -> DMatrix<T> {
        let m = self.n_temps();
        let n = self.n_powers();
        let mut w = DMatrix::zeros(m, m + n);
        w.columns_mut(0, m).copy_from(&self.a_bar);
        w.columns_mut(m, n).copy_from(&self.b_bar);
        w
    }

    /// `‖W_self − W_other‖_F / ‖W_other‖_F`.
    pub fn relative_error(&self, reference: &Self) -> T {
        let reference = reference.stacked();
        (self.stacked() - &reference).norm() / reference.norm()
    }
}

/// Outcome of an identification run.
#[derive(Debug, Clone)]
pub struct FitReport<T: Real> {
    pub model: LinearThermalModel<T>,
    /// Sum of squared residual norms `Σ‖u(k+1) − W z(k)‖²` at exit.
    pub final_objective: T,
    pub iterations_used: usize,
    pub converged: bool,
    /// Singular values of B̄, descending.
    pub singular_values_b: Vec<T>,
    /// Largest absolute violation of any sign or equality constraint.
    pub constraint_violation: T,
    /// `Some(false)` when full column rank of B̄ was required but not met.
    pub rank_condition_met: Option<bool>,
    /// Objective after every accepted iteration (empty for closed-form fits).
    pub objective_history: Vec<T>,
}

/// Residuals `e_j = Uout_j − W z_j` and their Euclidean norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals<T: Real> {
    pub errors: DMatrix<T>,
    pub norms: Vec<T>,
}

impl<T: Real> Residuals<T> {
    /// `Σ‖e_j‖²`.
    pub fn sum_of_squares(&self) -> T {
        self.errors.norm_squared()
    }
}

pub fn residual_series<T: Real>(model: &LinearThermalModel<T>, reg: &RegressionMatrices<T>) -> Result<Residuals<T>> {
    let w = model.stacked();
    if w.ncols() != reg.z.nrows() || w.nrows() != reg.next.nrows() || reg.z.ncols() != reg.next.ncols() {
        return Err(Error::Argument(format!(
            "model W is {:?} but regression has Z {:?} and Uout {:?}",
            w.shape(),
            reg.z.shape(),
            reg.next.shape()
        )));
    }
    let errors = &reg.next - &w * &reg.z;
    let norms = errors.column_iter().map(|c| c.norm()).collect();
    Ok(Residuals { errors, norms })
}

/// Singular value decomposition of the regressor, shared by the closed-form
/// solver and the warm start of the constrained solver.
pub(crate) struct RegressorSvd<T: Real> {
    svd: SVD<T, nalgebra::Dyn, nalgebra::Dyn>,
    rows: usize,
}

impl<T: Real> RegressorSvd<T> {
    pub(crate) fn new(z: &DMatrix<T>) -> Self {
        Self {
            svd: SVD::new(z.clone(), true, true),
            rows: z.nrows(),
        }
    }

    pub(crate) fn max_singular_value(&self) -> T {
        self.svd.singular_values.max()
    }

    /// Smallest singular value, counting the structural zeros when `Z` has
    /// fewer columns than rows.
    pub(crate) fn min_singular_value(&self) -> T {
        if self.svd.singular_values.len() < self.rows {
            T::zero()
        } else {
            self.svd.singular_values.min()
        }
    }

    /// `W = Uout Zᵀ (Z Zᵀ + εI)⁻¹`, evaluated as `Uout V diag(σ/(σ²+ε)) Uᵀ`.
    pub(crate) fn ridge_solution(&self, next: &DMatrix<T>, epsilon: T) -> DMatrix<T> {
        let u = self.svd.u.as_ref().expect("left singular vectors");
        let v_t = self.svd.v_t.as_ref().expect("right singular vectors");
        let mut projected = next * v_t.transpose();
        for (j, &s) in self.svd.singular_values.iter().enumerate() {
            let gain = if s > T::zero() {
                s / (s * s + epsilon)
            } else {
                T::zero()
            };
            projected.column_mut(j).scale_mut(gain);
        }
        projected * u.transpose()
    }
}

/// Ridge-regularized least squares for `W = [Ā B̄]`.
///
/// With `epsilon = 0` the Gram matrix `Z Zᵀ` must be numerically invertible:
/// if `σ_min(Z)² ≤ ε_mach σ_max(Z)²` an [`Error::IllConditioned`] is returned
/// instead of a minimum-norm solution.
pub fn fit_least_squares<T: Real>(reg: &RegressionMatrices<T>, epsilon: T) -> Result<FitReport<T>> {
    if !(epsilon >= T::zero()) || !epsilon.is_finite() {
        return Err(Error::Argument(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    if reg.z.ncols() == 0 {
        return Err(Error::InsufficientData("no transitions".into()));
    }
    let svd = RegressorSvd::new(&reg.z);
    if epsilon == T::zero() {
        let hi = svd.max_singular_value();
        let lo = svd.min_singular_value();
        if !(lo * lo > T::eps() * hi * hi) {
            return Err(Error::IllConditioned(format!(
                "Gram matrix of the {}x{} regressor is singular to working precision \
                 (singular values {lo:e} .. {hi:e})",
                reg.z.nrows(),
                reg.z.ncols()
            )));
        }
    }
    let w = svd.ridge_solution(&reg.next, epsilon);
    let model = LinearThermalModel::from_stacked(&w, reg)?;
    let residuals = residual_series(&model, reg)?;
    Ok(FitReport {
        singular_values_b: check_rank(&model, T::zero()).singular_values,
        final_objective: residuals.sum_of_squares(),
        model,
        iterations_used: 0,
        converged: true,
        constraint_violation: T::zero(),
        rank_condition_met: None,
        objective_history: Vec::new(),
    })
}
