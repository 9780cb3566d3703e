//! File formats: price CSV in, parameter JSON in and out, hashed artifacts out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use qvar_core::calibration::{CalibrationError, ParamOverrides, PriceSeries};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

fn data_error(path: &Path, line: Option<u64>, msg: impl std::fmt::Display) -> CliError {
    match line {
        Some(l) => CliError::Data(format!("{}:{l}: {msg}", path.display())),
        None => CliError::Data(format!("{}: {msg}", path.display())),
    }
}

/// Reads a `date,close` CSV with a header row. Extra columns are ignored.
pub fn load_prices(path: &Path) -> Result<PriceSeries> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| data_error(path, Some(1), e))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| data_error(path, Some(1), format!("missing column `{name}`")))
    };
    let (date_col, close_col) = (column("date")?, column("close")?);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            data_error(path, line, e)
        })?;
        let line = record.position().map(|p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(date_col), "%Y-%m-%d")
            .map_err(|e| data_error(path, line, format!("bad date `{}`: {e}", field(date_col))))?;
        let close: f64 = field(close_col)
            .parse()
            .map_err(|_| data_error(path, line, format!("bad close `{}`", field(close_col))))?;
        rows.push((date, close));
    }
    PriceSeries::new(rows).map_err(|e| data_error(path, None, e))
}

/// Reads a possibly partial parameter record.
pub fn load_overrides(path: &Path) -> Result<ParamOverrides> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| data_error(path, None, e))
}

pub fn calibration_error(e: CalibrationError) -> CliError {
    match e {
        CalibrationError::MissingParameters(_) | CalibrationError::Params(_) => {
            CliError::Params(e.to_string())
        }
        other => CliError::Data(other.to_string()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

/// Output directory that records the hash of everything written to it.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `name` (relative, `/`-separated) and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn hashes(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }
}
