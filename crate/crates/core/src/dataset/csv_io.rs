use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::{Segment, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Roles of the CSV columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub time: String,
    pub power: Vec<String>,
    pub temperature: Vec<String>,
}

impl CsvSchema {
    pub const TIME_COLUMN: &'static str = "t";
    pub const POWER_PREFIX: &'static str = "P_";
    pub const TEMP_PREFIX: &'static str = "T_";

    pub fn new(time: impl Into<String>, power: Vec<String>, temperature: Vec<String>) -> Self {
        Self {
            time: time.into(),
            power,
            temperature,
        }
    }

    /// Infers roles from a header: `t`, then `P_*` and `T_*` columns.
    pub fn from_header<S: AsRef<str>>(header: &[S]) -> Result<Self> {
        let names: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        if !names.contains(&Self::TIME_COLUMN) {
            return Err(Error::MissingColumn(Self::TIME_COLUMN.into()));
        }
        let with_prefix = |p: &str| -> Vec<String> {
            names
                .iter()
                .filter(|n| n.starts_with(p))
                .map(|n| n.to_string())
                .collect()
        };
        let schema = Self::new(
            Self::TIME_COLUMN,
            with_prefix(Self::POWER_PREFIX),
            with_prefix(Self::TEMP_PREFIX),
        );
        if schema.power.is_empty() {
            return Err(Error::Schema(format!(
                "no power column (prefix `{}`)",
                Self::POWER_PREFIX
            )));
        }
        if schema.temperature.is_empty() {
            return Err(Error::Schema(format!(
                "no temperature column (prefix `{}`)",
                Self::TEMP_PREFIX
            )));
        }
        Ok(schema)
    }
}

fn column_index(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_cell<T: Real>(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<T> {
    let cell = record.get(idx).unwrap_or("");
    let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{cell}` is not a number"),
    })?;
    T::from_f64(value).ok_or_else(|| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{cell}` not representable"),
    })
}

/// Reads a dataset from CSV. `schema = None` infers roles from the header.
///
/// The sample period is the median of successive time differences. Rows whose
/// time does not exceed the previous accepted row are dropped with a warning.
/// Row numbers in errors count data rows from 1.
pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: Option<&CsvSchema>) -> Result<TimeSeriesDataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    let inferred;
    let schema = match schema {
        Some(s) => s,
        None => {
            let names: Vec<&str> = header.iter().collect();
            inferred = CsvSchema::from_header(&names)?;
            &inferred
        }
    };
    if schema.power.is_empty() || schema.temperature.is_empty() {
        return Err(Error::Schema(
            "schema needs at least one power and one temperature column".into(),
        ));
    }
    let t_idx = column_index(&header, &schema.time)?;
    let p_idx = schema
        .power
        .iter()
        .map(|c| column_index(&header, c))
        .collect::<Result<Vec<_>>>()?;
    let u_idx = schema
        .temperature
        .iter()
        .map(|c| column_index(&header, c))
        .collect::<Result<Vec<_>>>()?;

    let mut times: Vec<T> = Vec::new();
    let mut power: Vec<T> = Vec::new();
    let mut temps: Vec<T> = Vec::new();
    let mut dropped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let t: T = parse_cell(&record, t_idx, row, &schema.time)?;
        if let Some(&last) = times.last() {
            if !(t > last) {
                dropped += 1;
                continue;
            }
        }
        times.push(t);
        for (&idx, name) in p_idx.iter().zip(&schema.power) {
            power.push(parse_cell(&record, idx, row, name)?);
        }
        for (&idx, name) in u_idx.iter().zip(&schema.temperature) {
            temps.push(parse_cell(&record, idx, row, name)?);
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with non-increasing time", path.display());
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} holds {} usable rows, need at least 2",
            path.display(),
            times.len()
        )));
    }
    let dt = median_step(&times);
    let k = times.len();
    let n = schema.power.len();
    let m = schema.temperature.len();
    TimeSeriesDataset::new(
        schema.power.clone(),
        schema.temperature.clone(),
        DMatrix::from_column_slice(n, k, &power),
        DMatrix::from_column_slice(m, k, &temps),
        dt,
    )
}

fn median_step<T: Real>(times: &[T]) -> T {
    let mut steps: Vec<T> = times.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(|a, b| a.partial_cmp(b).expect("finite time steps"));
    let mid = steps.len() / 2;
    let median = if steps.len() % 2 == 1 {
        steps[mid]
    } else {
        (steps[mid - 1] + steps[mid]) / T::lit(2.0)
    };
    let limit = median * T::lit(0.01);
    if steps.iter().any(|&s| (s - median).abs() > limit) {
        log::warn!("irregular sampling: some time steps deviate more than 1% from the median {median}");
    }
    median
}

/// Writes a dataset as CSV with columns `t`, power channels, temperature
/// channels. Values use the shortest representation that parses back to the
/// same bits.
pub fn write_csv<T: Real>(path: impl AsRef<Path>, data: &TimeSeriesDataset<T>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![CsvSchema::TIME_COLUMN.to_string()];
    header.extend(data.power_channels().iter().cloned());
    header.extend(data.temp_channels().iter().cloned());
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..data.len() {
        row.clear();
        row.push((T::from_count(k) * data.dt()).to_string());
        row.extend(data.power().column(k).iter().map(|v| v.to_string()));
        row.extend(data.temperature().column(k).iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a segment table with columns `label,start_index,end_index`
/// (`end_index` exclusive).
pub fn load_segments(path: impl AsRef<Path>) -> Result<Vec<Segment>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    let label = column_index(&header, "label")?;
    let start = column_index(&header, "start_index")?;
    let end = column_index(&header, "end_index")?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let index = |idx: usize, name: &str| -> Result<usize> {
            let cell = record.get(idx).unwrap_or("");
            cell.parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: name.to_string(),
                message: format!("`{cell}` is not a sample index"),
            })
        };
        out.push(Segment::new(
            record.get(label).unwrap_or(""),
            index(start, "start_index")?,
            index(end, "end_index")?,
        ));
    }
    Ok(out)
}

pub fn write_segments(path: impl AsRef<Path>, segments: &[Segment]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("label,start_index,end_index\n");
    for s in segments {
        text.push_str(&format!("{},{},{}\n", s.label, s.start, s.end));
    }
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
