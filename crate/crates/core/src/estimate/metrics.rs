use nalgebra::DMatrix;

use crate::dataset::window_samples;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Error statistics of an open-loop estimate against its reference.
///
/// `mu_rmse` is the mean of the per-channel RMSEs and `sigma_rmse` their
/// sample standard deviation (divisor N−1, zero for a single channel).
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport<T: Real> {
    pub estimated: DMatrix<T>,
    pub reference: Option<DMatrix<T>>,
    pub per_channel_rmse: Vec<T>,
    pub mu_rmse: T,
    pub sigma_rmse: T,
    /// `mu_rmse + 2 sigma_rmse`.
    pub band_upper: T,
    /// Samples by which the estimate lags the signal it reconstructs.
    pub delay_steps: usize,
}

impl<T: Real> EstimationReport<T> {
    pub fn with_delay(mut self, delay_steps: usize) -> Self {
        self.delay_steps = delay_steps;
        self
    }

    /// Fraction of channels whose RMSE lies strictly below the band.
    pub fn fraction_within_band(&self) -> f64 {
        if self.per_channel_rmse.is_empty() {
            return 1.0;
        }
        let inside = self.per_channel_rmse.iter().filter(|&&r| r < self.band_upper).count();
        inside as f64 / self.per_channel_rmse.len() as f64
    }
}

/// Mean and sample standard deviation.
pub(crate) fn mean_and_std<T: Real>(values: &[T]) -> (T, T) {
    if values.is_empty() {
        return (T::zero(), T::zero());
    }
    let count = T::from_count(values.len());
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / count;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let ss = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
    (mean, (ss / (count - T::one())).sqrt())
}

/// Per-channel RMSE over time and its spread across channels.
pub fn rmse_stats<T: Real>(estimated: &DMatrix<T>, reference: &DMatrix<T>) -> Result<EstimationReport<T>> {
    if estimated.shape() != reference.shape() {
        return Err(Error::Argument(format!(
            "estimate is {:?} but reference is {:?}",
            estimated.shape(),
            reference.shape()
        )));
    }
    if estimated.ncols() == 0 {
        return Err(Error::InsufficientData("no samples to compare".into()));
    }
    let steps = T::from_count(estimated.ncols());
    let per_channel_rmse: Vec<T> = (estimated - reference)
        .row_iter()
        .map(|r| (r.norm_squared() / steps).sqrt())
        .collect();
    let (mu_rmse, sigma_rmse) = mean_and_std(&per_channel_rmse);
    Ok(EstimationReport {
        estimated: estimated.clone(),
        reference: Some(reference.clone()),
        per_channel_rmse,
        mu_rmse,
        sigma_rmse,
        band_upper: mu_rmse + sigma_rmse * T::lit(2.0),
        delay_steps: 0,
    })
}

/// Trailing-window RMSE statistics, one entry per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingRmse<T: Real> {
    pub window_samples: usize,
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
    /// `mu + 2 sigma`.
    pub band: Vec<T>,
}

/// Per-channel RMSE over the trailing `window_seconds` (prefix windows at the
/// start), reduced to mean and mean + 2σ across channels at every sample.
pub fn rolling_rmse<T: Real>(
    estimated: &DMatrix<T>,
    reference: &DMatrix<T>,
    window_seconds: T,
    dt: T,
) -> Result<RollingRmse<T>> {
    if estimated.shape() != reference.shape() {
        return Err(Error::Argument(format!(
            "estimate is {:?} but reference is {:?}",
            estimated.shape(),
            reference.shape()
        )));
    }
    let window = window_samples(window_seconds, dt)?;
    let squared = (estimated - reference).map(|e| e * e);
    let channels = squared.nrows();
    let steps = squared.ncols();
    let mut mu = Vec::with_capacity(steps);
    let mut sigma = Vec::with_capacity(steps);
    let mut band = Vec::with_capacity(steps);
    let mut rmse = vec![T::zero(); channels];
    for t in 0..steps {
        let lo = (t + 1).saturating_sub(window);
        let count = T::from_count(t + 1 - lo);
        for (c, slot) in rmse.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in lo..=t {
                acc += squared[(c, k)];
            }
            *slot = (acc / count).sqrt();
        }
        let (m, s) = mean_and_std(&rmse);
        mu.push(m);
        sigma.push(s);
        band.push(m + s * T::lit(2.0));
    }
    Ok(RollingRmse {
        window_samples: window,
        mu,
        sigma,
        band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_have_zero_error() {
        let x = DMatrix::from_fn(3, 7, |i, j| (i * j) as f64);
        let r = rmse_stats(&x, &x).unwrap();
        assert!(r.per_channel_rmse.iter().all(|&v| v == 0.0));
        assert_eq!((r.mu_rmse, r.sigma_rmse, r.band_upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_channels_with_constant_errors() {
        let reference = DMatrix::<f64>::zeros(2, 5);
        let estimated = DMatrix::from_fn(2, 5, |i, _| if i == 0 { 1.0 } else { 3.0 });
        let r = rmse_stats(&estimated, &reference).unwrap();
        assert_eq!(r.per_channel_rmse, vec![1.0, 3.0]);
        assert!((r.mu_rmse - 2.0).abs() < 1e-12);
        assert!((r.sigma_rmse - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.band_upper - 4.828_427_124_746_19).abs() < 1e-12);
    }

    #[test]
    fn single_channel_three_four() {
        let r = rmse_stats(&DMatrix::from_row_slice(1, 2, &[3.0, 4.0]), &DMatrix::zeros(1, 2)).unwrap();
        assert!((r.per_channel_rmse[0] - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.sigma_rmse, 0.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(rmse_stats(&DMatrix::<f64>::zeros(2, 3), &DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn rolling_zero_error() {
        let x = DMatrix::from_element(2, 10, 1.5);
        let r = rolling_rmse(&x, &x, 3.0, 1.0).unwrap();
        assert!(r.mu.iter().chain(&r.band).all(|&v| v == 0.0));
    }

    #[test]
    fn rolling_constant_error() {
        let reference = DMatrix::<f64>::zeros(1, 20);
        let estimated = DMatrix::from_element(1, 20, 0.7);
        let r = rolling_rmse(&estimated, &reference, 100.0, 1.0).unwrap();
        assert!(r.mu.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn rolling_rejects_sub_sample_window() {
        let x = DMatrix::<f64>::zeros(1, 4);
        assert!(matches!(rolling_rmse(&x, &x, 0.1, 1.0), Err(Error::Argument(_))));
    }
}
