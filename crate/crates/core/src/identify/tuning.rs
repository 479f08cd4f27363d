//! Ridge weight selection by blocked cross-validation.

use nalgebra::DMatrix;

use super::RegressorSvd;
use crate::dataset::RegressionMatrices;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cross-validation scores over a grid of ridge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonScan<T: Real> {
    /// Weight with the lowest score.
    pub epsilon: T,
    pub candidates: Vec<T>,
    /// Held-out one-step residual sum of squares per candidate; infinite
    /// where a training fold was singular.
    pub scores: Vec<T>,
}

/// `0` followed by `σ_max(Z)² · 10^k` for `k = -12 ..= -1`.
pub fn default_epsilon_grid<T: Real>(reg: &RegressionMatrices<T>) -> Vec<T> {
    let top = reg.z.clone().singular_values().max();
    let mut grid = vec![T::zero()];
    grid.extend((-12..=-1).map(|k| top * top * T::lit(10f64.powi(k))));
    grid
}

/// Picks the ridge weight minimizing held-out one-step prediction error.
///
/// Transitions are split into `folds` contiguous blocks in column order;
/// each block is predicted by the fit on the others.
pub fn tune_epsilon<T: Real>(reg: &RegressionMatrices<T>, grid: &[T], folds: usize) -> Result<EpsilonScan<T>> {
    if grid.is_empty() {
        return Err(Error::Argument("epsilon grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|e| !(**e >= T::zero()) || !e.is_finite()) {
        return Err(Error::Argument(format!("epsilon must be finite and >= 0, got {bad}")));
    }
    let k = reg.z.ncols();
    if folds < 2 || folds > k {
        return Err(Error::Argument(format!("need between 2 and {k} folds, got {folds}")));
    }
    let mut scores = vec![T::zero(); grid.len()];
    for fold in 0..folds {
        let (lo, hi) = (fold * k / folds, (fold + 1) * k / folds);
        let train: Vec<usize> = (0..lo).chain(hi..k).collect();
        let z_train = reg.z.select_columns(&train);
        let next_train = reg.next.select_columns(&train);
        let z_test = reg.z.columns(lo, hi - lo);
        let next_test = reg.next.columns(lo, hi - lo);
        let svd = RegressorSvd::new(&z_train);
        let singular = {
            let (top, bottom) = (svd.max_singular_value(), svd.min_singular_value());
            !(bottom * bottom > T::eps() * top * top)
        };
        for (score, &eps) in scores.iter_mut().zip(grid) {
            if eps == T::zero() && singular {
                *score = T::max_value().expect("bounded scalar");
                continue;
            }
            let w: DMatrix<T> = svd.ridge_solution(&next_train, eps);
            *score += (next_test - w * z_test).norm_squared();
        }
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if *s < scores[best] { i } else { best });
    Ok(EpsilonScan {
        epsilon: grid[best],
        candidates: grid.to_vec(),
        scores,
    })
}
