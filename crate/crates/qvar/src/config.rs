//! Parameter layering and flag parsing.

use qvar_core::calibration::ParamOverrides;
use qvar_core::simulation::StrategyMode;
use qvar_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Built-in parameter record: the baseline table with r = 0.00014,
/// (psi, psi0) = (0.6, 0.8), gamma = 0.3, beta = 0.001 and T = 795.
pub fn defaults() -> ParamOverrides {
    ParamOverrides {
        p1: Some(0.05),
        p2: Some(0.5),
        f1: Some(47.63579),
        f2: Some(68.43975),
        b2: Some(0.00599),
        r: Some(0.00014),
        beta: Some(0.001),
        gamma: Some(0.3),
        alpha: Some(10.0),
        epsilon: Some(0.00001),
        q05: Some(0.00077),
        psi: Some(0.6),
        psi0: Some(0.8),
        horizon: Some(795.0),
    }
}

fn number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_nan() {
        return Err(format!("`{s}` is not a number"));
    }
    Ok(v)
}

fn known_field(name: &str) -> std::result::Result<String, String> {
    if ParamOverrides::FIELDS.contains(&name) {
        Ok(name.to_string())
    } else {
        Err(format!(
            "unknown parameter `{name}` (expected one of {})",
            ParamOverrides::FIELDS.join(", ")
        ))
    }
}

/// `key=value` for `--set`.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    Ok((known_field(k.trim())?, number(v)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// `name=v1,v2,...` for `--sweep`.
pub fn parse_sweep(s: &str) -> std::result::Result<SweepAxis, String> {
    let (k, vs) = s.split_once('=').ok_or("expected name=v1,v2,...")?;
    let values = vs.split(',').map(number).collect::<std::result::Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("sweep needs at least one value".into());
    }
    Ok(SweepAxis {
        name: known_field(k.trim())?,
        values,
    })
}

/// `approx`, `full`, or `const:<pi>`.
pub fn parse_mode(s: &str) -> std::result::Result<StrategyMode, String> {
    match s {
        "approx" => Ok(StrategyMode::Approx),
        "full" => Ok(StrategyMode::FullWithFallback),
        _ => match s.strip_prefix("const:") {
            Some(v) => Ok(StrategyMode::Constant(number(v)?)),
            None => Err(format!("unknown mode `{s}` (approx, full, const:<pi>)")),
        },
    }
}

pub fn mode_name(mode: StrategyMode) -> String {
    match mode {
        StrategyMode::Approx => "approx".into(),
        StrategyMode::FullWithFallback => "full".into(),
        StrategyMode::Constant(pi) => format!("const:{pi}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(pub Vec<f64>);

/// Either `t1,t2,...` or `start:stop:step` (inclusive of `stop` when it
/// lies on the grid).
pub fn parse_times(s: &str) -> std::result::Result<TimeGrid, String> {
    grid_values(s).map(TimeGrid)
}

fn grid_values(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h) = (number(start)?, number(stop)?, number(step)?);
            if h.is_nan() || h <= 0.0 || b < a {
                return Err("range needs start <= stop and step > 0".into());
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + h * i as f64).collect())
        }
        [_] => s.split(',').map(number).collect(),
        _ => Err("expected t1,t2,... or start:stop:step".into()),
    }
}

/// Applies `--set` pairs in order; later pairs win.
pub fn apply_sets(mut base: ParamOverrides, sets: &[(String, f64)]) -> ParamOverrides {
    for (k, v) in sets {
        if let Some(slot) = base.field_mut(k) {
            *slot = Some(*v);
        }
    }
    base
}

/// Defaults, then the parameter file, then flags.
pub fn layered(file: Option<ParamOverrides>, sets: &[(String, f64)]) -> ParamOverrides {
    let base = match file {
        Some(f) => defaults().merged(&f),
        None => defaults(),
    };
    apply_sets(base, sets)
}

pub fn complete(overrides: &ParamOverrides) -> Result<ModelParams> {
    overrides
        .complete()
        .map_err(|e| CliError::Params(e.to_string()))
}

/// `params` with one field replaced. Sweeping either multiplier weight sets
/// its partner so that the pair stays on the unit circle.
pub fn with_field(params: &ModelParams, name: &str, value: f64) -> Result<ModelParams> {
    let mut o = ParamOverrides::from_params(params);
    *o.field_mut(name)
        .ok_or_else(|| CliError::Params(format!("unknown parameter `{name}`")))? = Some(value);
    let partner = (1.0 - value * value).max(0.0).sqrt();
    match name {
        "psi" => o.psi0 = Some(partner),
        "psi0" => o.psi = Some(partner),
        _ => {}
    }
    complete(&o)
}
