//! Command implementations. Each takes a fully resolved spec, writes its
//! artifacts and a manifest into the output directory, and returns the
//! manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qvar_core::calibration::{calibrate_with_report, compute_returns, CalibrationOptions};
use qvar_core::simulation::{simulate_ensemble, Ensemble, SimulationError};
use qvar_core::strategy::{
    solve_pi, solve_pi_approx, StrategyError, StrategyQuery, DEFAULT_BRACKET, DEFAULT_TOL,
};
use qvar_core::{ModelParams, SimConfig};
use serde::Serialize;

use crate::config::{self, mode_name};
use crate::error::{CliError, Result};
use crate::io::{self, calibration_error, sha256_hex, to_json, ArtifactDir};
use crate::manifest::{
    self, CalibrateSpec, Manifest, RunSpec, SimulateSpec, SolveSpec, SweepSpec,
};

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn finish(dir: ArtifactDir, run: RunSpec) -> Result<Manifest> {
    let m = Manifest::new(run, dir.hashes().clone());
    let path = dir.root().join(manifest::FILE_NAME);
    fs::write(&path, to_json(&m)).map_err(|e| CliError::io(&path, e))?;
    Ok(m)
}

pub fn run(spec: &RunSpec, out: &Path) -> Result<Manifest> {
    match spec {
        RunSpec::Calibrate(s) => calibrate(s, out),
        RunSpec::Solve(s) => solve(s, out),
        RunSpec::Simulate(s) => simulate(s, out),
        RunSpec::Sweep(s) => sweep(s, out),
    }
}

pub fn calibrate(spec: &CalibrateSpec, out: &Path) -> Result<Manifest> {
    let prices = io::load_prices(&spec.data)?;
    let raw = fs::read(&spec.data).map_err(|e| CliError::io(&spec.data, e))?;
    if sha256_hex(&raw) != spec.data_sha256 {
        return Err(CliError::Data(format!(
            "{} changed since the run was recorded",
            spec.data.display()
        )));
    }
    let returns = compute_returns(&prices);
    // estimates sit between the defaults and the overrides, so the
    // estimated fields are dropped from the defaults
    let mut layered = config::defaults();
    for name in ["f1", "f2", "b2", "q05"] {
        *layered.field_mut(name).expect("known field") = None;
    }
    let layered = layered.merged(&spec.overrides);
    let options = CalibrationOptions {
        bandwidth: spec.bandwidth,
    };
    let (params, report) =
        calibrate_with_report(&returns, &layered, &options).map_err(calibration_error)?;

    let mut text = String::new();
    let _ = writeln!(text, "observations        {}", report.n);
    let _ = writeln!(text, "p1, p2              {}, {}", report.p1, report.p2);
    let _ = writeln!(text, "quantile at p1      {}", report.quantile_p1);
    let _ = writeln!(text, "quantile at p2      {}", report.quantile_p2);
    let _ = writeln!(text, "bandwidth           {}", report.bandwidth);
    let _ = writeln!(text, "estimated f1        {}", report.f1);
    let _ = writeln!(text, "estimated f2        {}", report.f2);
    let _ = writeln!(text, "estimated b2        {}", report.b2);
    let _ = writeln!(text, "estimated q05       {}", report.q05);
    let _ = writeln!(text, "implied rho         {}", report.rho);
    let _ = writeln!(text);
    let _ = writeln!(text, "written after overrides:");
    let _ = writeln!(
        text,
        "f1 {}  f2 {}  b2 {}  q05 {}  rho {}",
        params.f1(),
        params.f2(),
        params.b2(),
        params.q05(),
        qvar_core::model::implied_correlation(&params)
    );

    let mut dir = ArtifactDir::create(out)?;
    dir.write("params.json", &to_json(&params))?;
    dir.write("report.txt", text.as_bytes())?;
    finish(dir, RunSpec::Calibrate(spec.clone()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn solve(spec: &SolveSpec, out: &Path) -> Result<Manifest> {
    let p = &spec.params;
    if p.b2() == p.r() {
        return Err(CliError::Params("b2 equals r; the explicit strategy is undefined".into()));
    }
    if spec.times.is_empty() {
        return Err(CliError::Params("empty time grid".into()));
    }
    let mut rows = Vec::with_capacity(spec.times.len());
    let mut previous = None;
    for &t in &spec.times {
        let q = StrategyQuery::new(t, spec.l1, spec.l2, *p)
            .map_err(|e| CliError::Params(format!("t = {t}: {e}")))?;
        let approx = match solve_pi_approx(&q) {
            Ok(r) => Some(r),
            Err(e) => {
                eprintln!("warning: t = {t}: {e}");
                None
            }
        };
        let full = match solve_pi(&q, previous, DEFAULT_BRACKET, DEFAULT_TOL) {
            Ok(r) => Some(r),
            Err(StrategyError::NoRoot { .. }) | Err(StrategyError::Indeterminate) => None,
            Err(e) => {
                eprintln!("warning: t = {t}: {e}");
                None
            }
        };
        previous = full.map(|r| r.pi).or(previous);
        let residual = full.or(approx).map(|r| r.residual);
        rows.push(vec![
            t.to_string(),
            fmt_opt(approx.map(|r| r.pi)),
            fmt_opt(full.map(|r| r.pi)),
            fmt_opt(residual),
        ]);
    }
    let mut dir = ArtifactDir::create(out)?;
    dir.write(
        "solve.csv",
        &csv_bytes(&["t", "pi_approx", "pi_full", "residual"], rows),
    )?;
    finish(dir, RunSpec::Solve(spec.clone()))
}

#[derive(Serialize)]
struct Terminal {
    t: f64,
    mean_pi: f64,
    sd_pi: f64,
    mean_l1: f64,
    sd_l1: f64,
    mean_l2: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    mode: String,
    config: &'a SimConfig,
    params: &'a ModelParams,
    terminal: Terminal,
    constraint_fraction: f64,
    surviving_paths: usize,
    bankrupt_paths: usize,
}

fn ensemble(params: &ModelParams, sim: &SimConfig) -> Result<Ensemble> {
    simulate_ensemble(sim, params).map_err(|e| match e {
        SimulationError::Config(_) => CliError::Params(e.to_string()),
        other => CliError::Ensemble(other.to_string()),
    })
}

// bands.csv and summary.json under `prefix`
fn write_ensemble(
    dir: &mut ArtifactDir,
    prefix: &str,
    params: &ModelParams,
    sim: &SimConfig,
    e: &Ensemble,
) -> Result<()> {
    let s = &e.summary;
    let rows = (0..s.times.len()).map(|k| {
        [
            s.times[k],
            s.mean_pi[k],
            s.band_lo_pi[k],
            s.band_hi_pi[k],
            s.mean_l1[k],
            s.band_lo_l1[k],
            s.band_hi_l1[k],
        ]
        .iter()
        .map(f64::to_string)
        .collect()
    });
    let header = ["t", "mean_pi", "lo_pi", "hi_pi", "mean_l1", "lo_l1", "hi_l1"];
    dir.write(&format!("{prefix}bands.csv"), &csv_bytes(&header, rows))?;
    let last = s.times.len() - 1;
    let summary = Summary {
        seed: sim.seed,
        mode: mode_name(sim.strategy_mode),
        config: sim,
        params,
        terminal: Terminal {
            t: s.times[last],
            mean_pi: s.mean_pi[last],
            sd_pi: s.sd_pi[last],
            mean_l1: s.mean_l1[last],
            sd_l1: s.sd_l1[last],
            mean_l2: s.mean_l2[last],
        },
        constraint_fraction: s.constraint_fraction,
        surviving_paths: s.surviving_paths,
        bankrupt_paths: s.bankrupt_paths,
    };
    dir.write(&format!("{prefix}summary.json"), &to_json(&summary))
}

pub fn simulate(spec: &SimulateSpec, out: &Path) -> Result<Manifest> {
    let e = ensemble(&spec.params, &spec.sim)?;
    if e.summary.bankrupt_paths > 0 {
        eprintln!(
            "warning: {} of {} paths went bankrupt and are excluded from the bands",
            e.summary.bankrupt_paths, spec.sim.n_paths
        );
    }
    let mut dir = ArtifactDir::create(out)?;
    write_ensemble(&mut dir, "", &spec.params, &spec.sim, &e)?;
    finish(dir, RunSpec::Simulate(spec.clone()))
}

pub fn sweep(spec: &SweepSpec, out: &Path) -> Result<Manifest> {
    let name = &spec.axis.name;
    let mut dir = ArtifactDir::create(out)?;
    let mut rows = Vec::new();
    for &value in &spec.axis.values {
        let params = config::with_field(&spec.params, name, value)?;
        let e = ensemble(&params, &spec.sim)?;
        let s = &e.summary;
        let last = s.times.len() - 1;
        write_ensemble(&mut dir, &format!("{name}={value}/"), &params, &spec.sim, &e)?;
        rows.push(vec![
            value.to_string(),
            s.mean_pi[last].to_string(),
            s.mean_l1[last].to_string(),
            s.constraint_fraction.to_string(),
            s.bankrupt_paths.to_string(),
        ]);
    }
    let header = [
        name.as_str(),
        "terminal_mean_pi",
        "terminal_mean_l1",
        "constraint_fraction",
        "bankrupt_paths",
    ];
    dir.write("sweep.csv", &csv_bytes(&header, rows))?;
    finish(dir, RunSpec::Sweep(spec.clone()))
}

/// Re-runs a recorded manifest into `out` and lists the artifacts whose
/// hashes differ from the recording.
pub fn replay(recorded: &Manifest, out: &Path) -> Result<Vec<String>> {
    let fresh = run(&recorded.run, out)?;
    let mut differing: Vec<String> = recorded
        .artifacts
        .iter()
        .filter(|(name, hash)| fresh.artifacts.get(*name) != Some(*hash))
        .map(|(name, _)| name.clone())
        .collect();
    differing.extend(
        fresh
            .artifacts
            .keys()
            .filter(|k| !recorded.artifacts.contains_key(*k))
            .cloned(),
    );
    Ok(differing)
}
