//! Plain-text model document.
//!
//! ```text
//! dt = 1.0000000000000000e0
//! temp_channels = ["T_a", "T_b"]
//! power_channels = ["P_q"]
//! A_bar = [
//!   [9.0000000000000002e-1, 0.0000000000000000e0],
//!   ...
//! ]
//! B_bar = [...]
//! ```
//!
//! Matrices are row-major arrays of rows. Values carry 17 significant digits
//! so `f64` models round-trip bit for bit. The document is valid TOML.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::LinearThermalModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

fn number<T: Real>(v: T) -> String {
    format!("{v:.16e}")
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn write_matrix<T: Real>(out: &mut String, key: &str, m: &DMatrix<T>) {
    let _ = writeln!(out, "{key} = [");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| number(v)).collect();
        let _ = writeln!(out, "  [{}],", cells.join(", "));
    }
    let _ = writeln!(out, "]");
}

/// Renders a model as the plain-text document.
pub fn write_model<T: Real>(model: &LinearThermalModel<T>) -> String {
    let mut out = String::new();
    let names = |v: &[String]| v.iter().map(|s| quoted(s)).collect::<Vec<_>>().join(", ");
    let _ = writeln!(out, "dt = {}", number(model.dt()));
    let _ = writeln!(out, "temp_channels = [{}]", names(model.temp_channels()));
    let _ = writeln!(out, "power_channels = [{}]", names(model.power_channels()));
    write_matrix(&mut out, "A_bar", model.a_bar());
    write_matrix(&mut out, "B_bar", model.b_bar());
    out
}

pub fn save_model<T: Real>(path: impl AsRef<Path>, model: &LinearThermalModel<T>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<LinearThermalModel<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

fn key_error(key: &str, message: impl Into<String>) -> Error {
    Error::ModelFile {
        key: key.to_string(),
        message: message.into(),
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn read_names(table: &toml::Table, key: &str) -> Result<Vec<String>> {
    let arr = table
        .get(key)
        .ok_or_else(|| key_error(key, "missing"))?
        .as_array()
        .ok_or_else(|| key_error(key, "expected an array of strings"))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| key_error(key, "expected an array of strings"))
        })
        .collect()
}

fn read_matrix<T: Real>(table: &toml::Table, key: &str, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    let arr = table
        .get(key)
        .ok_or_else(|| key_error(key, "missing"))?
        .as_array()
        .ok_or_else(|| key_error(key, "expected an array of rows"))?;
    if arr.len() != rows {
        return Err(key_error(key, format!("expected {rows} rows, found {}", arr.len())));
    }
    let mut out = DMatrix::zeros(rows, cols);
    for (i, row) in arr.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| key_error(key, format!("row {i} is not an array")))?;
        if row.len() != cols {
            return Err(key_error(
                key,
                format!("row {i} has {} entries, expected {cols}", row.len()),
            ));
        }
        for (j, v) in row.iter().enumerate() {
            let x = as_f64(v).ok_or_else(|| key_error(key, format!("entry ({i}, {j}) is not a number")))?;
            out[(i, j)] = T::from_f64(x).ok_or_else(|| key_error(key, "value not representable"))?;
        }
    }
    Ok(out)
}

pub fn parse_model<T: Real>(text: &str) -> Result<LinearThermalModel<T>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| key_error("<document>", e.to_string()))?;
    let dt = table
        .get("dt")
        .and_then(as_f64)
        .ok_or_else(|| key_error("dt", "missing or not a number"))?;
    let temp_channels = read_names(&table, "temp_channels")?;
    let power_channels = read_names(&table, "power_channels")?;
    let m = temp_channels.len();
    let n = power_channels.len();
    let a_bar = read_matrix(&table, "A_bar", m, m)?;
    let b_bar = read_matrix(&table, "B_bar", m, n)?;
    LinearThermalModel::new(a_bar, b_bar, T::lit(dt), temp_channels, power_channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> LinearThermalModel<f64> {
        LinearThermalModel::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.01, 1.0 / 3.0, -2.5e-300]),
            DMatrix::from_row_slice(2, 1, &[0.1, 7.0e12]),
            0.1,
            vec!["T_a".into(), "T \"quoted\"".into()],
            vec!["P_q".into()],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = sample();
        let text = write_model(&model);
        assert!(text.contains("A_bar = ["));
        assert_eq!(parse_model::<f64>(&text).unwrap(), model);
    }

    #[test]
    fn wrong_row_length_names_key() {
        let text = write_model(&sample()).replace("[1.0000000000000001e-1],", "[1.0, 2.0],");
        match parse_model::<f64>(&text) {
            Err(Error::ModelFile { key, .. }) => assert_eq!(key, "B_bar"),
            other => panic!("expected model file error, got {other:?}"),
        }
    }

    #[test]
    fn missing_dt() {
        let text: String = write_model(&sample())
            .lines()
            .skip(1)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(parse_model::<f64>(&text), Err(Error::ModelFile { key, .. }) if key == "dt"));
    }

    proptest! {
        #[test]
        fn any_finite_model_round_trips(
            a in proptest::collection::vec(-1e6f64..1e6, 9),
            b in proptest::collection::vec(-1e-6f64..1e-6, 6),
            dt in 1e-4f64..1e3,
        ) {
            let model = LinearThermalModel::new(
                DMatrix::from_row_slice(3, 3, &a),
                DMatrix::from_row_slice(3, 2, &b),
                dt,
                vec!["a".into(), "b".into(), "c".into()],
                vec!["p".into(), "q".into()],
            ).unwrap();
            prop_assert_eq!(parse_model::<f64>(&write_model(&model)).unwrap(), model);
        }
    }
}
