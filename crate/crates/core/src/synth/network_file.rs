//! Key-value network definition (TOML syntax).
//!
//! ```toml
//! m = 2
//! n = 1
//! C = [1.0, 4.0]
//! G = [[0, 0, 1.5], [0, 1, -0.5], [1, 0, -0.5], [1, 1, 0.7]]   # row, col, value
//! M = [[0, 0, 1.0]]
//! temp_channels = ["T_a", "T_b"]   # optional
//! power_channels = ["P_a"]         # optional
//! ```
//!
//! Sparse triplets left out are zero. Every error names the offending key.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::ThermalNetwork;
use crate::error::{Error, Result};
use crate::scalar::Real;

const KNOWN_KEYS: [&str; 7] = ["m", "n", "C", "G", "M", "temp_channels", "power_channels"];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Network {
        key: key.to_string(),
        message: message.into(),
    }
}

fn number(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn count(table: &toml::Table, key: &str) -> Result<usize> {
    match table.get(key) {
        Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
        Some(_) => Err(bad(key, "expected a nonnegative integer")),
        None => Err(bad(key, "missing")),
    }
}

fn triplets<T: Real>(table: &toml::Table, key: &str, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    let list = table
        .get(key)
        .ok_or_else(|| bad(key, "missing"))?
        .as_array()
        .ok_or_else(|| bad(key, "expected an array of [row, col, value] triplets"))?;
    let mut out = DMatrix::zeros(rows, cols);
    let mut seen = DMatrix::from_element(rows, cols, false);
    for (k, item) in list.iter().enumerate() {
        let t = item
            .as_array()
            .filter(|t| t.len() == 3)
            .ok_or_else(|| bad(key, format!("entry {k} is not a [row, col, value] triplet")))?;
        let index = |v: &toml::Value| v.as_integer().filter(|&i| i >= 0).map(|i| i as usize);
        let (Some(i), Some(j), Some(v)) = (index(&t[0]), index(&t[1]), number(&t[2])) else {
            return Err(bad(key, format!("entry {k} is malformed")));
        };
        if i >= rows || j >= cols {
            return Err(bad(key, format!("entry {k} index ({i}, {j}) outside {rows}x{cols}")));
        }
        if seen[(i, j)] {
            return Err(bad(key, format!("duplicate entry ({i}, {j})")));
        }
        seen[(i, j)] = true;
        out[(i, j)] = T::lit(v);
    }
    Ok(out)
}

fn names(table: &toml::Table, key: &str, expected: usize, prefix: &str) -> Result<Vec<String>> {
    let Some(value) = table.get(key) else {
        return Ok((0..expected).map(|i| format!("{prefix}{i}")).collect());
    };
    let list = value
        .as_array()
        .ok_or_else(|| bad(key, "expected an array of strings"))?;
    if list.len() != expected {
        return Err(bad(key, format!("expected {expected} names, got {}", list.len())));
    }
    list.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| bad(key, "expected strings"))
        })
        .collect()
}

pub fn parse_network<T: Real>(text: &str) -> Result<ThermalNetwork<T>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| bad("<document>", e.message().to_string()))?;
    if let Some(unknown) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(bad(unknown, "unknown key"));
    }
    let m = count(&table, "m")?;
    let n = count(&table, "n")?;
    let c_list = table
        .get("C")
        .ok_or_else(|| bad("C", "missing"))?
        .as_array()
        .ok_or_else(|| bad("C", "expected an array of capacitances"))?;
    if c_list.len() != m {
        return Err(bad("C", format!("expected {m} capacitances, got {}", c_list.len())));
    }
    let c = c_list
        .iter()
        .map(|v| number(v).map(T::lit).ok_or_else(|| bad("C", "expected numbers")))
        .collect::<Result<Vec<T>>>()?;
    let g = triplets(&table, "G", m, m)?;
    let injection = triplets(&table, "M", m, n)?;
    ThermalNetwork::with_names(
        DVector::from_vec(c),
        g,
        injection,
        names(&table, "temp_channels", m, "T_")?,
        names(&table, "power_channels", n, "P_")?,
    )
}

pub fn load_network<T: Real>(path: impl AsRef<Path>) -> Result<ThermalNetwork<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text)
}

/// Renders a network, listing the nonzero entries of `G` and `M`.
pub fn write_network<T: Real>(net: &ThermalNetwork<T>) -> String {
    let mut out = String::new();
    let quote = |v: &[String]| {
        v.iter()
            .map(|s| toml::Value::String(s.clone()).to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let trip = |m: &DMatrix<T>| {
        let mut cells = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != T::zero() {
                    cells.push(format!("[{i}, {j}, {:.16e}]", m[(i, j)]));
                }
            }
        }
        cells.join(", ")
    };
    let _ = writeln!(out, "m = {}", net.n_nodes());
    let _ = writeln!(out, "n = {}", net.n_sources());
    let _ = writeln!(out, "temp_channels = [{}]", quote(net.temp_channels()));
    let _ = writeln!(out, "power_channels = [{}]", quote(net.power_channels()));
    let caps: Vec<String> = net.capacitance().iter().map(|c| format!("{c:.16e}")).collect();
    let _ = writeln!(out, "C = [{}]", caps.join(", "));
    let _ = writeln!(out, "G = [{}]", trip(net.conductance()));
    let _ = writeln!(out, "M = [{}]", trip(net.injection()));
    out
}

pub fn save_network<T: Real>(path: impl AsRef<Path>, net: &ThermalNetwork<T>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_network(net)).map_err(|e| Error::io(path, e))
}
