//! Open-loop evaluation of an identified model.
//!
//! Forward: temperatures from powers, `û(k+1) = Ā û(k) + B̄ x(k)`.
//! Inverse: powers from temperatures,
//! `x̂(k−1) = (B̄ᵀB̄)⁻¹B̄ᵀ (u(k) − Ā u(k−1))`. The inverse needs the
//! temperature one step ahead, so power estimates lag by one sample.

mod export;
mod metrics;

use nalgebra::{DMatrix, DVector};

pub use export::{write_estimation_csv, write_summary};
pub use metrics::{rmse_stats, rolling_rmse, EstimationReport, RollingRmse};

use crate::error::{Error, Result};
use crate::identify::{check_rank, LinearThermalModel};
use crate::scalar::Real;

/// Relative singular-value floor below which B̄ counts as rank deficient.
pub const ESTIMATOR_RANK_TOLERANCE: f64 = 1e-10;

/// Free-running temperature trajectory driven by `power` (n×K) from `u0`.
///
/// Column 0 is `u0`; column `k+1` uses the power at column `k`, so the last
/// power column does not influence the result.
pub fn simulate_temperature<T: Real>(
    model: &LinearThermalModel<T>,
    power: &DMatrix<T>,
    u0: &DVector<T>,
) -> Result<DMatrix<T>> {
    let m = model.n_temps();
    if power.nrows() != model.n_powers() {
        return Err(Error::Argument(format!(
            "power has {} channels, model expects {}",
            power.nrows(),
            model.n_powers()
        )));
    }
    if u0.len() != m {
        return Err(Error::Argument(format!(
            "initial temperature has {} entries, model expects {m}",
            u0.len()
        )));
    }
    let k = power.ncols();
    if k == 0 {
        return Err(Error::Argument("power sequence is empty".into()));
    }
    let mut out = DMatrix::zeros(m, k);
    out.column_mut(0).copy_from(u0);
    let mut state = u0.clone();
    for step in 1..k {
        let next = model.a_bar() * &state + model.b_bar() * power.column(step - 1);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { step });
        }
        out.column_mut(step).copy_from(&next);
        state = next;
    }
    Ok(out)
}

/// Precomputed left inverse of B̄ and a copy of Ā.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorGain<T: Real> {
    /// `(B̄ᵀB̄)⁻¹B̄ᵀ`, n×m.
    pub gain: DMatrix<T>,
    pub a_bar: DMatrix<T>,
}

/// Builds the power estimator. Fails when B̄ lacks full column rank.
pub fn build_estimator<T: Real>(model: &LinearThermalModel<T>) -> Result<EstimatorGain<T>> {
    let rank = check_rank(model, T::lit(ESTIMATOR_RANK_TOLERANCE));
    if !rank.full_column_rank {
        return Err(Error::NotInvertible {
            rank: rank.rank,
            required: rank.required,
        });
    }
    // B̄ = U Σ Vᵀ (thin, full column rank) ⇒ (B̄ᵀB̄)⁻¹B̄ᵀ = V Σ⁻¹ Uᵀ
    let svd = model.b_bar().clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors");
    let v_t = svd.v_t.as_ref().expect("right singular vectors");
    let mut v_scaled = v_t.transpose();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        v_scaled.column_mut(j).unscale_mut(s);
    }
    Ok(EstimatorGain {
        gain: v_scaled * u.transpose(),
        a_bar: model.a_bar().clone(),
    })
}

impl<T: Real> EstimatorGain<T> {
    pub fn n_powers(&self) -> usize {
        self.gain.nrows()
    }

    pub fn n_temps(&self) -> usize {
        self.gain.ncols()
    }
}

/// Power estimates from a temperature sequence (m×K).
///
/// Returns n×(K−1); column `j` is `x̂(j) = G (u(j+1) − Ā u(j))`, the estimate
/// of the power applied at sample `j`, available once sample `j+1` arrives.
pub fn estimate_power<T: Real>(gain: &EstimatorGain<T>, temperature: &DMatrix<T>) -> Result<DMatrix<T>> {
    if temperature.nrows() != gain.n_temps() {
        return Err(Error::Argument(format!(
            "temperature has {} channels, estimator expects {}",
            temperature.nrows(),
            gain.n_temps()
        )));
    }
    let k = temperature.ncols();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "power estimation needs at least 2 temperature samples, got {k}"
        )));
    }
    let drift = temperature.columns(1, k - 1) - &gain.a_bar * temperature.columns(0, k - 1);
    Ok(&gain.gain * drift)
}
