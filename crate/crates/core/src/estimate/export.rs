use std::fmt::Write as _;
use std::path::Path;

use super::EstimationReport;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Writes `time, est_<ch>…, ref_<ch>…, err_<ch>…` with one row per sample.
///
/// `time[j]` labels column `j` of the estimate. Without a reference only the
/// estimate columns are written.
pub fn write_estimation_csv<T: Real>(
    path: impl AsRef<Path>,
    time: &[T],
    channels: &[String],
    report: &EstimationReport<T>,
) -> Result<()> {
    let path = path.as_ref();
    let est = &report.estimated;
    if time.len() != est.ncols() || channels.len() != est.nrows() {
        return Err(Error::Argument(format!(
            "{} time stamps and {} channel names for a {:?} estimate",
            time.len(),
            channels.len(),
            est.shape()
        )));
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string()];
    header.extend(channels.iter().map(|c| format!("est_{c}")));
    if report.reference.is_some() {
        header.extend(channels.iter().map(|c| format!("ref_{c}")));
        header.extend(channels.iter().map(|c| format!("err_{c}")));
    }
    writer.write_record(&header)?;
    for (j, t) in time.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(est.column(j).iter().map(|v| v.to_string()));
        if let Some(reference) = &report.reference {
            row.extend(reference.column(j).iter().map(|v| v.to_string()));
            row.extend(
                est.column(j)
                    .iter()
                    .zip(reference.column(j).iter())
                    .map(|(&e, &r)| (e - r).to_string()),
            );
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the summary statistics as `key = value` lines.
pub fn write_summary<T: Real>(path: impl AsRef<Path>, channels: &[String], report: &EstimationReport<T>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "mu_rmse = {:.16e}", report.mu_rmse);
    let _ = writeln!(out, "sigma_rmse = {:.16e}", report.sigma_rmse);
    let _ = writeln!(out, "band_upper = {:.16e}", report.band_upper);
    let _ = writeln!(out, "delay_steps = {}", report.delay_steps);
    let _ = writeln!(out, "\n[per_channel_rmse]");
    for (name, rmse) in channels.iter().zip(&report.per_channel_rmse) {
        let _ = writeln!(out, "{} = {:.16e}", toml::Value::String(name.clone()), rmse);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
