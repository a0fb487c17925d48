//! Plain-text coefficient tables for diagonal-norm SBP operators.
//!
//! One operator per file. Every line is `key = value` or a `#` comment;
//! the final line carries `checksum = sha256:<hex>` over all preceding
//! lines (each terminated by `\n`). Numbers may be written as `a/b`.
//! All entries are for unit grid spacing.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const ORDER2: &str = include_str!("../../data/sbp_d2_order2.txt");
const ORDER4: &str = include_str!("../../data/sbp_d2_order4.txt");
const ORDER6: &str = include_str!("../../data/sbp_d2_order6.txt");

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub order: usize,
    pub closure_rows: usize,
    pub closure_cols: usize,
    /// Leading entries of `H/h`; the rest of the diagonal is 1.
    pub norm: Vec<f64>,
    /// Central stencil `a_0..a_{2p}` of `h^2 D` on interior rows.
    pub interior: Vec<f64>,
    /// First row of `h S` (boundary first derivative at `x = 0`).
    pub boundary_derivative: Vec<f64>,
    /// Closure rows of `h M`, each `closure_cols` wide.
    pub m_rows: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn builtin(order: usize) -> Result<Self> {
        match order {
            2 => Self::parse(ORDER2),
            4 => Self::parse(ORDER4),
            6 => Self::parse(ORDER6),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut hasher = Sha256::new();
        let mut expected = None;
        let mut format = None;
        let mut order = None;
        let mut closure_rows = None;
        let mut closure_cols = None;
        let mut norm = None;
        let mut interior = None;
        let mut s = None;
        let mut m_rows = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if expected.is_some() {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Table(format!("line {}: content after checksum", lineno + 1)));
            }
            if let Some(rest) = line.trim().strip_prefix("checksum") {
                let value = rest.trim_start().strip_prefix('=').map(str::trim).unwrap_or("");
                let hex = value
                    .strip_prefix("sha256:")
                    .ok_or_else(|| Error::Table(format!("line {}: malformed checksum", lineno + 1)))?;
                expected = Some(hex.to_ascii_lowercase());
                continue;
            }
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::Table(format!("line {}: expected key = value", lineno + 1)))?;
            let value = value.trim();
            match key.trim() {
                "format" => format = Some(parse_int(value, lineno)?),
                "order" => order = Some(parse_int(value, lineno)?),
                "closure_rows" => closure_rows = Some(parse_int(value, lineno)?),
                "closure_cols" => closure_cols = Some(parse_int(value, lineno)?),
                "h" => norm = Some(parse_row(value, lineno)?),
                "interior" => interior = Some(parse_row(value, lineno)?),
                "s" => s = Some(parse_row(value, lineno)?),
                "m" => m_rows.push(parse_row(value, lineno)?),
                other => return Err(Error::Table(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }

        let expected = expected.ok_or_else(|| Error::Table("missing checksum line".into()))?;
        let computed = hex_string(&hasher.finalize());
        if computed != expected {
            return Err(Error::Checksum { expected, computed });
        }
        if format != Some(FORMAT_VERSION as usize) {
            return Err(Error::Table(format!("unsupported format {format:?}")));
        }
        let missing = |k: &str| Error::Table(format!("missing `{k}`"));
        let table = Self {
            order: order.ok_or_else(|| missing("order"))?,
            closure_rows: closure_rows.ok_or_else(|| missing("closure_rows"))?,
            closure_cols: closure_cols.ok_or_else(|| missing("closure_cols"))?,
            norm: norm.ok_or_else(|| missing("h"))?,
            interior: interior.ok_or_else(|| missing("interior"))?,
            boundary_derivative: s.ok_or_else(|| missing("s"))?,
            m_rows,
        };
        table.check_shape()?;
        Ok(table)
    }

    fn check_shape(&self) -> Result<()> {
        if self.interior.len() != self.order + 1 {
            return Err(Error::Table(format!(
                "interior stencil has {} entries, expected {}",
                self.interior.len(),
                self.order + 1
            )));
        }
        if self.m_rows.len() != self.closure_rows || self.norm.len() != self.closure_rows {
            return Err(Error::Table("closure row count mismatch".into()));
        }
        if self.m_rows.iter().any(|r| r.len() != self.closure_cols) {
            return Err(Error::Table("closure block rows must have closure_cols entries".into()));
        }
        if self.boundary_derivative.len() > self.closure_cols {
            return Err(Error::Table("boundary derivative wider than closure".into()));
        }
        Ok(())
    }
}

fn parse_int(value: &str, lineno: usize) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Table(format!("line {}: expected integer, got `{value}`", lineno + 1)))
}

fn parse_row(value: &str, lineno: usize) -> Result<Vec<f64>> {
    value.split_whitespace().map(|tok| parse_number(tok, lineno)).collect()
}

fn parse_number(tok: &str, lineno: usize) -> Result<f64> {
    let bad = || Error::Table(format!("line {}: bad number `{tok}`", lineno + 1));
    match tok.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.parse().map_err(|_| bad())?;
            let den: f64 = den.parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => tok.parse().map_err(|_| bad()),
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
