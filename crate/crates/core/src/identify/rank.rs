use super::LinearThermalModel;
use crate::scalar::Real;

/// Numerical rank of the input map B̄.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport<T: Real> {
    pub rank: usize,
    /// Singular values of B̄, descending.
    pub singular_values: Vec<T>,
    /// Number of power channels `n`; the estimator needs `rank == n`.
    pub required: usize,
    pub full_column_rank: bool,
}

/// Counts singular values of B̄ at or above `tol · σ_max`.
///
/// `full_column_rank` holds when the rank equals the column count `n`.
pub fn check_rank<T: Real>(model: &LinearThermalModel<T>, tol: T) -> RankReport<T> {
    let b = model.b_bar();
    let required = b.ncols();
    let mut singular_values: Vec<T> = if b.is_empty() {
        Vec::new()
    } else {
        b.clone().singular_values().iter().copied().collect()
    };
    singular_values.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    let largest = singular_values.first().copied().unwrap_or_else(T::zero);
    let floor = tol * largest;
    let rank = if largest > T::zero() {
        singular_values.iter().filter(|&&s| s >= floor).count()
    } else {
        0
    };
    RankReport {
        rank,
        singular_values,
        required,
        full_column_rank: rank == required && required > 0,
    }
}
