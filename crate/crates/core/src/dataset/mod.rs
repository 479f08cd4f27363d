//! Power/temperature time series and their preprocessing.
//!
//! A [`TimeSeriesDataset`] stores power channels `X` (n×K, watts) and
//! temperature channels `U` (m×K, kelvin) sampled on a common grid, plus
//! optional calibration segments. Preprocessing steps are pure and return a
//! new dataset. [`TimeSeriesDataset::build_regression`] stacks snapshot pairs
//! into the least-squares form consumed by [`crate::identify`].

mod csv_io;

use std::ops::Range;

use nalgebra::DMatrix;

pub use csv_io::{load_csv, load_segments, write_csv, write_segments, CsvSchema};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Half-open sample range `[start, end)` labelled with a calibration step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(label: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset<T: Real> {
    power_channels: Vec<String>,
    temp_channels: Vec<String>,
    power: DMatrix<T>,
    temperature: DMatrix<T>,
    dt: T,
    segments: Vec<Segment>,
    ambient: T,
}

/// Snapshot pairs of one-step transitions.
///
/// Column `j` of `z` is `[u(k); x(k)]` and column `j` of `next` is `u(k+1)`,
/// where `k = source_index[j]` in the originating dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMatrices<T: Real> {
    pub z: DMatrix<T>,
    pub next: DMatrix<T>,
    pub source_index: Vec<usize>,
    pub n_temps: usize,
    pub n_powers: usize,
    pub dt: T,
    pub temp_channels: Vec<String>,
    pub power_channels: Vec<String>,
}

impl<T: Real> RegressionMatrices<T> {
    pub fn new(z: DMatrix<T>, next: DMatrix<T>, n_temps: usize) -> Result<Self> {
        if z.ncols() != next.ncols() {
            return Err(Error::Argument(format!(
                "regressor has {} columns but targets have {}",
                z.ncols(),
                next.ncols()
            )));
        }
        if next.nrows() != n_temps || z.nrows() < n_temps {
            return Err(Error::Argument(format!(
                "regressor rows {} / target rows {} inconsistent with {} temperatures",
                z.nrows(),
                next.nrows(),
                n_temps
            )));
        }
        if z.ncols() == 0 {
            return Err(Error::InsufficientData("no transitions".into()));
        }
        let n_powers = z.nrows() - n_temps;
        let source_index = (0..z.ncols()).collect();
        Ok(Self {
            z,
            next,
            source_index,
            n_temps,
            n_powers,
            dt: T::one(),
            temp_channels: (0..n_temps).map(|i| format!("T_{i}")).collect(),
            power_channels: (0..n_powers).map(|i| format!("P_{i}")).collect(),
        })
    }

    pub fn n_transitions(&self) -> usize {
        self.z.ncols()
    }
}

impl<T: Real> TimeSeriesDataset<T> {
    /// Builds a dataset with relative ambient 0 and no segments.
    pub fn new(
        power_channels: Vec<String>,
        temp_channels: Vec<String>,
        power: DMatrix<T>,
        temperature: DMatrix<T>,
        dt: T,
    ) -> Result<Self> {
        let ds = Self {
            power_channels,
            temp_channels,
            power,
            temperature,
            dt,
            segments: Vec::new(),
            ambient: T::zero(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_segments(mut self, segments: Vec<Segment>) -> Result<Self> {
        self.segments = segments;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.power.nrows() != self.power_channels.len() {
            return Err(Error::Argument(format!(
                "{} power channel names for {} power rows",
                self.power_channels.len(),
                self.power.nrows()
            )));
        }
        if self.temperature.nrows() != self.temp_channels.len() {
            return Err(Error::Argument(format!(
                "{} temperature channel names for {} temperature rows",
                self.temp_channels.len(),
                self.temperature.nrows()
            )));
        }
        if self.power.ncols() != self.temperature.ncols() {
            return Err(Error::Argument(format!(
                "power has {} samples, temperature has {}",
                self.power.ncols(),
                self.temperature.ncols()
            )));
        }
        if self.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 samples, got {}",
                self.len()
            )));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::Argument(format!(
                "sample period must be positive, got {}",
                self.dt
            )));
        }
        if let Some(bad) = self.temperature.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite temperature at sample {}",
                bad / self.temperature.nrows().max(1)
            )));
        }
        if self.power.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite power value".into()));
        }
        let mut prev_end = 0;
        for seg in &self.segments {
            if seg.start >= seg.end || seg.end > self.len() {
                return Err(Error::Argument(format!(
                    "segment `{}` [{}, {}) out of range for {} samples",
                    seg.label,
                    seg.start,
                    seg.end,
                    self.len()
                )));
            }
            if seg.start < prev_end {
                return Err(Error::Argument(format!(
                    "segment `{}` overlaps or precedes its predecessor",
                    seg.label
                )));
            }
            prev_end = seg.end;
        }
        Ok(())
    }

    /// Number of samples `K`.
    pub fn len(&self) -> usize {
        self.power.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_powers(&self) -> usize {
        self.power.nrows()
    }

    pub fn n_temps(&self) -> usize {
        self.temperature.nrows()
    }

    pub fn power(&self) -> &DMatrix<T> {
        &self.power
    }

    pub fn temperature(&self) -> &DMatrix<T> {
        &self.temperature
    }

    pub fn power_channels(&self) -> &[String] {
        &self.power_channels
    }

    pub fn temp_channels(&self) -> &[String] {
        &self.temp_channels
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Cumulative ambient offset removed from the temperature channels.
    pub fn ambient(&self) -> T {
        self.ambient
    }

    /// Explicit segments, or a single implicit segment spanning the dataset.
    pub fn segment_ranges(&self) -> Vec<Segment> {
        if self.segments.is_empty() {
            vec![Segment::new("all", 0, self.len())]
        } else {
            self.segments.clone()
        }
    }

    /// Copy of the samples in `range` with segment indices rebased.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start >= range.end {
            return Err(Error::Argument(format!(
                "slice {:?} invalid for {} samples",
                range,
                self.len()
            )));
        }
        let segments = self
            .segments
            .iter()
            .filter_map(|s| {
                let start = s.start.max(range.start);
                let end = s.end.min(range.end);
                (start < end).then(|| Segment::new(s.label.clone(), start - range.start, end - range.start))
            })
            .collect();
        let ds = Self {
            power: self.power.columns(range.start, range.len()).into_owned(),
            temperature: self.temperature.columns(range.start, range.len()).into_owned(),
            segments,
            ..self.clone()
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Zero-order-hold oversampling: every sample is repeated `factor` times.
    pub fn resample_hold(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Argument("oversampling factor must be >= 1".into()));
        }
        let hold = |m: &DMatrix<T>| DMatrix::from_fn(m.nrows(), m.ncols() * factor, |i, j| m[(i, j / factor)]);
        Ok(Self {
            power: hold(&self.power),
            temperature: hold(&self.temperature),
            dt: self.dt / T::from_count(factor),
            segments: self
                .segments
                .iter()
                .map(|s| Segment::new(s.label.clone(), s.start * factor, s.end * factor))
                .collect(),
            ..self.clone()
        })
    }

    /// Keeps every `factor`-th sample, starting with the first.
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Argument("decimation factor must be >= 1".into()));
        }
        let kept = self.len().div_ceil(factor);
        let pick = |m: &DMatrix<T>| DMatrix::from_fn(m.nrows(), kept, |i, j| m[(i, j * factor)]);
        let segments = self
            .segments
            .iter()
            .map(|s| Segment::new(s.label.clone(), s.start.div_ceil(factor), s.end.div_ceil(factor)))
            .filter(|s| !s.is_empty())
            .collect();
        let ds = Self {
            power: pick(&self.power),
            temperature: pick(&self.temperature),
            dt: self.dt * T::from_count(factor),
            segments,
            ..self.clone()
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Trailing moving average over `round(window_seconds / dt)` samples,
    /// applied to every power and temperature channel. The first `w - 1`
    /// outputs average the available prefix.
    pub fn moving_average(&self, window_seconds: T) -> Result<Self> {
        let window = window_samples(window_seconds, self.dt)?;
        Ok(Self {
            power: trailing_mean(&self.power, window),
            temperature: trailing_mean(&self.temperature, window),
            ..self.clone()
        })
    }

    /// Shifts every temperature channel by `-ambient`; power is untouched.
    pub fn baseline_ambient(&self, ambient: T) -> Result<Self> {
        if !ambient.is_finite() {
            return Err(Error::Argument("ambient temperature must be finite".into()));
        }
        Ok(Self {
            temperature: self.temperature.map(|v| v - ambient),
            ambient: self.ambient + ambient,
            ..self.clone()
        })
    }

    /// Splits every segment into a leading training part holding
    /// `floor(train_fraction * len)` samples and a trailing test part.
    ///
    /// Fails when either part of a segment would hold fewer than two
    /// samples.
    pub fn split_per_segment(&self, train_fraction: T) -> Result<(Self, Self)> {
        if !(train_fraction > T::zero() && train_fraction < T::one()) {
            return Err(Error::Argument(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for seg in self.segment_ranges() {
            let len = seg.len();
            let n_train = (train_fraction * T::from_count(len))
                .floor()
                .to_usize()
                .unwrap_or(0)
                .min(len);
            let n_test = len - n_train;
            if n_train < 2 || n_test < 2 {
                return Err(Error::Split {
                    segment: seg.label.clone(),
                    message: format!(
                        "{len} samples give {n_train} training and {n_test} test samples; both need at least 2"
                    ),
                });
            }
            let mid = seg.start + n_train;
            train.push(Segment::new(seg.label.clone(), seg.start, mid));
            test.push(Segment::new(seg.label, mid, seg.end));
        }
        Ok((self.gather(&train), self.gather(&test)))
    }

    /// Concatenates the given segments into a new dataset.
    fn gather(&self, parts: &[Segment]) -> Self {
        let total: usize = parts.iter().map(Segment::len).sum();
        let mut power = DMatrix::zeros(self.n_powers(), total);
        let mut temperature = DMatrix::zeros(self.n_temps(), total);
        let mut segments = Vec::with_capacity(parts.len());
        let mut at = 0;
        for part in parts {
            power
                .columns_mut(at, part.len())
                .copy_from(&self.power.columns(part.start, part.len()));
            temperature
                .columns_mut(at, part.len())
                .copy_from(&self.temperature.columns(part.start, part.len()));
            segments.push(Segment::new(part.label.clone(), at, at + part.len()));
            at += part.len();
        }
        Self {
            power,
            temperature,
            segments,
            ..self.clone()
        }
    }

    /// Stacks `z(k) = [u(k); x(k)]` against `u(k+1)` for every transition
    /// inside a segment. Transitions crossing a segment boundary, and samples
    /// outside all segments, are skipped.
    pub fn build_regression(&self) -> Result<RegressionMatrices<T>> {
        let m = self.n_temps();
        let n = self.n_powers();
        let source_index: Vec<usize> = self
            .segment_ranges()
            .iter()
            .flat_map(|s| s.start..s.end.saturating_sub(1))
            .collect();
        if source_index.is_empty() {
            return Err(Error::InsufficientData(
                "no segment holds two consecutive samples".into(),
            ));
        }
        let cols = source_index.len();
        let mut z = DMatrix::zeros(m + n, cols);
        let mut next = DMatrix::zeros(m, cols);
        for (j, &k) in source_index.iter().enumerate() {
            z.view_mut((0, j), (m, 1)).copy_from(&self.temperature.column(k));
            z.view_mut((m, j), (n, 1)).copy_from(&self.power.column(k));
            next.column_mut(j).copy_from(&self.temperature.column(k + 1));
        }
        Ok(RegressionMatrices {
            z,
            next,
            source_index,
            n_temps: m,
            n_powers: n,
            dt: self.dt,
            temp_channels: self.temp_channels.clone(),
            power_channels: self.power_channels.clone(),
        })
    }
}

/// Converts a window length in seconds to a sample count.
pub(crate) fn window_samples<T: Real>(window_seconds: T, dt: T) -> Result<usize> {
    let ratio = window_seconds / dt;
    if !ratio.is_finite() || ratio < T::one() - T::lit(1e-9) {
        return Err(Error::Argument(format!(
            "window of {window_seconds} s is shorter than one sample ({dt} s)"
        )));
    }
    Ok(ratio.round().to_usize().unwrap_or(1).max(1))
}

/// Row-wise trailing mean over `window` samples with prefix averaging.
pub(crate) fn trailing_mean<T: Real>(data: &DMatrix<T>, window: usize) -> DMatrix<T> {
    let cols = data.ncols();
    DMatrix::from_fn(data.nrows(), cols, |i, j| {
        let lo = (j + 1).saturating_sub(window);
        let mut acc = T::zero();
        for k in lo..=j {
            acc += data[(i, k)];
        }
        acc / T::from_count(j + 1 - lo)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_dataset(k: usize, dt: f64) -> TimeSeriesDataset<f64> {
        let power = DMatrix::from_fn(1, k, |_, j| j as f64);
        let temperature = DMatrix::from_fn(2, k, |i, j| (i * 100 + j) as f64);
        TimeSeriesDataset::new(
            vec!["P_a".into()],
            vec!["T_a".into(), "T_b".into()],
            power,
            temperature,
            dt,
        )
        .unwrap()
    }

    #[test]
    fn rejects_mismatched_columns() {
        let err = TimeSeriesDataset::new(
            vec!["P".into()],
            vec!["T".into()],
            DMatrix::<f64>::zeros(1, 3),
            DMatrix::zeros(1, 4),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn rejects_single_sample() {
        let err = TimeSeriesDataset::new(
            vec!["P".into()],
            vec!["T".into()],
            DMatrix::<f64>::zeros(1, 1),
            DMatrix::zeros(1, 1),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn rejects_overlapping_segments() {
        let ds = ramp_dataset(10, 1.0);
        let err = ds
            .with_segments(vec![Segment::new("a", 0, 5), Segment::new("b", 4, 8)])
            .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn resample_identity_and_ramp() {
        let ds = ramp_dataset(3, 1.0);
        assert_eq!(ds.resample_hold(1).unwrap(), ds);
        let up = ds.resample_hold(3).unwrap();
        let row: Vec<f64> = up.power().row(0).iter().copied().collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert!(matches!(ds.resample_hold(0), Err(Error::Argument(_))));
    }

    #[test]
    fn resample_by_ten() {
        let ds = ramp_dataset(5, 1.0)
            .with_segments(vec![Segment::new("s", 1, 4)])
            .unwrap();
        let up = ds.resample_hold(10).unwrap();
        assert_eq!(up.len(), 50);
        assert!((up.dt() - 0.1).abs() < 1e-15);
        assert_eq!(up.segments()[0], Segment::new("s", 10, 40));
        for j in 0..50 {
            assert_eq!(up.temperature()[(1, j)], ds.temperature()[(1, j / 10)]);
        }
        assert_eq!(up.decimate(10).unwrap(), ds);
    }

    #[test]
    fn moving_average_hand_example() {
        let values = [0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0, 10.0];
        let ds = TimeSeriesDataset::new(
            vec!["P".into()],
            vec!["T".into()],
            DMatrix::from_row_slice(1, 10, &values),
            DMatrix::from_row_slice(1, 10, &values),
            1.0,
        )
        .unwrap();
        let out = ds.moving_average(5.0).unwrap();
        let tail: Vec<f64> = out.temperature().row(0).iter().skip(4).copied().collect();
        assert_eq!(tail, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ds.moving_average(1.0).unwrap(), ds);
        assert!(matches!(ds.moving_average(0.5), Err(Error::Argument(_))));
    }

    #[test]
    fn moving_average_prefix_and_constant() {
        let ds = TimeSeriesDataset::new(
            vec!["P".into()],
            vec!["T".into()],
            DMatrix::from_element(1, 7, 3.5),
            DMatrix::from_row_slice(1, 7, &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]),
            0.5,
        )
        .unwrap();
        let out = ds.moving_average(1.5).unwrap();
        assert!(out.power().iter().all(|&v| v == 3.5));
        let row: Vec<f64> = out.temperature().row(0).iter().copied().collect();
        assert_eq!(row, vec![2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }

    #[test]
    fn baseline_shifts_temperatures_only() {
        let ds = TimeSeriesDataset::<f64>::new(
            vec!["P".into()],
            vec!["T".into()],
            DMatrix::from_element(1, 2, 5.0),
            DMatrix::from_element(1, 2, 308.15),
            1.0,
        )
        .unwrap();
        let rel = ds.baseline_ambient(298.15).unwrap();
        assert!((rel.temperature()[(0, 0)] - 10.0).abs() < 1e-12);
        assert_eq!(rel.power(), ds.power());
        assert_eq!(rel.ambient(), 298.15);
        assert_eq!(ds.baseline_ambient(0.0).unwrap(), ds);
        let back = rel.baseline_ambient(-298.15).unwrap();
        assert!((back.temperature()[(0, 1)] - 308.15).abs() < 1e-12);
        assert_eq!(back.ambient(), 0.0);
        assert!(ds.baseline_ambient(f64::NAN).is_err());
    }

    #[test]
    fn split_single_segment() {
        let ds = ramp_dataset(10, 1.0);
        let (train, test) = ds.split_per_segment(0.8).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        assert_eq!(test.power()[(0, 0)], 8.0);
    }

    #[test]
    fn split_keeps_every_label() {
        let labels = ["transistors", "tracks", "driver", "inductor"];
        let segments = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Segment::new(*l, i * 20, i * 20 + 15))
            .collect();
        let ds = ramp_dataset(80, 1.0).with_segments(segments).unwrap();
        let (train, test) = ds.split_per_segment(0.8).unwrap();
        for part in [&train, &test] {
            let got: Vec<&str> = part.segments().iter().map(|s| s.label.as_str()).collect();
            assert_eq!(got, labels);
        }
        assert_eq!(train.len() + test.len(), 60);
        // every sample lands on exactly one side
        let mut seen: Vec<f64> = train.power().iter().chain(test.power().iter()).copied().collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), 60);
    }

    #[test]
    fn split_rejects_empty_test_side() {
        let ds = ramp_dataset(10, 1.0)
            .with_segments(vec![Segment::new("a", 0, 5), Segment::new("short", 5, 10)])
            .unwrap();
        match ds.split_per_segment(0.9) {
            Err(Error::Split { segment, .. }) => assert_eq!(segment, "a"),
            other => panic!("expected split error, got {other:?}"),
        }
    }

    #[test]
    fn regression_single_transition() {
        let ds = ramp_dataset(2, 1.0);
        let reg = ds.build_regression().unwrap();
        assert_eq!(reg.z.shape(), (3, 1));
        assert_eq!(reg.next.shape(), (2, 1));
        assert_eq!(reg.next[(1, 0)], 101.0);
    }

    #[test]
    fn regression_skips_segment_boundaries() {
        let ds = ramp_dataset(6, 1.0)
            .with_segments(vec![Segment::new("a", 0, 3), Segment::new("b", 3, 6)])
            .unwrap();
        let reg = ds.build_regression().unwrap();
        assert_eq!(reg.n_transitions(), 4);
        assert_eq!(reg.source_index, vec![0, 1, 3, 4]);
        for (j, &k) in reg.source_index.iter().enumerate() {
            assert_eq!(reg.next.column(j), ds.temperature().column(k + 1));
            assert_eq!(reg.z[(2, j)], ds.power()[(0, k)]);
        }
    }

    #[test]
    fn regression_needs_a_transition() {
        let ds = ramp_dataset(4, 1.0)
            .with_segments(vec![Segment::new("a", 0, 1), Segment::new("b", 2, 3)])
            .unwrap();
        assert!(matches!(ds.build_regression(), Err(Error::InsufficientData(_))));
    }
}
