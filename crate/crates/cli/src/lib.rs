//! Command implementations behind the `collapse` binary.
//!
//! Each command resolves a [`RunConfig`], writes its CSV files into
//! `config.out`, and finishes with `<command>.json`: the resolved config,
//! seed, wall time, unit conventions and the headline numbers. Passing that
//! summary back through `--config` repeats the run with identical CSVs.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use collapse_core::calibration::born_relation_b0;
use collapse_core::ensemble::BORN_CURVE_HEADER;
use collapse_core::{
    born_deviation, calibrate_b0, flow_grid, integrate_trajectory, interior_fixed_point,
    macroscopic_probability, min_correlation_time, run_ensemble, CalibrationSpec, DeviationMetric,
    EnsembleStats, IntegratorConfig, ModelParams, NoiseConfig, NoiseMode,
};
use serde_json::{json, Value};

pub use config::{resolve, CommandKind, Overrides, RunConfig};
use output::{csv_bytes, write_atomic};

/// What a finished command produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary_path: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn units(cfg: &RunConfig) -> Value {
    json!({
        "time": "physical; the collapse rate is J N eps / hbar",
        "collapse_rate": cfg.model.collapse_rate(),
        "crossover_time": cfg.model.crossover_time(),
        "field_ratio": cfg.model.field_ratio(),
        "outcome_up_down": "theta -> 0",
        "born_target": "cos^2(theta0 / 2)",
        "field_distribution": "cos(chi) uniform on [-1, 1]",
    })
}

fn noise_config(cfg: &RunConfig) -> NoiseConfig<f64> {
    NoiseConfig {
        mode: cfg.noise.mode,
        tau_r: cfg.noise.tau_r,
        seed: cfg.seed,
        stream_id: 0,
    }
}

fn deviation_summary(stats: &EnsembleStats) -> Value {
    json!({
        "max_abs": born_deviation(stats, DeviationMetric::MaxAbs),
        "l2": born_deviation(stats, DeviationMetric::L2),
        "signed_mean": born_deviation(stats, DeviationMetric::SignedMean),
        "oriented_mean": born_deviation(stats, DeviationMetric::OrientedMean),
        "unresolved_fraction": stats.unresolved_fraction(),
    })
}

fn write_ensemble_csv(path: &Path, stats: &EnsembleStats) -> anyhow::Result<()> {
    write_atomic(path, &csv_bytes(&BORN_CURVE_HEADER, stats.to_csv_rows())?)
}

/// Runs `cmd` under `cfg` on a pool of `cfg.threads` workers.
pub fn run(cmd: CommandKind, cfg: &RunConfig) -> anyhow::Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("building thread pool")?;
    let start = Instant::now();
    let (files, results) = pool.install(|| match cmd {
        CommandKind::FlowDiagram => flow_diagram(cfg),
        CommandKind::Simulate => simulate(cfg),
        CommandKind::Ensemble => ensemble(cfg),
        CommandKind::BornCurve => born_curve(cfg),
        CommandKind::Calibrate => calibrate(cfg),
        CommandKind::StabilityBound => stability_bound(cfg),
    })?;
    let summary = json!({
        "command": cmd.name(),
        "config": cfg,
        "seed": cfg.seed,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "units": units(cfg),
        "outputs": files.iter().map(|f: &PathBuf| f.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "results": results,
    });
    let summary_path = cfg.out.join(format!("{}.json", cmd.name()));
    write_atomic(&summary_path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(RunReport {
        summary_path,
        files,
        summary,
    })
}

type CmdResult = anyhow::Result<(Vec<PathBuf>, Value)>;

fn flow_diagram(cfg: &RunConfig) -> CmdResult {
    let n_chi = cfg.flow.chi_count;
    let chis: Vec<f64> = if n_chi == 1 {
        vec![0.0]
    } else {
        (0..n_chi)
            .map(|k| std::f64::consts::PI * k as f64 / (n_chi - 1) as f64)
            .collect()
    };
    let samples = flow_grid(&cfg.model, cfg.flow.theta_count, &chis);
    let path = cfg.out.join("flow_diagram.csv");
    let rows = samples
        .iter()
        .map(|s| [s.chi.to_string(), s.theta.to_string(), s.theta_dot.to_string()]);
    write_atomic(&path, &csv_bytes(&["chi", "theta", "theta_dot"], rows)?)?;
    let fixed: Vec<Value> = chis
        .iter()
        .map(|&chi| {
            let fp = interior_fixed_point(&cfg.model, chi);
            json!({ "chi": chi, "interior_theta": fp.interior })
        })
        .collect();
    Ok((vec![path], json!({ "fixed_points": fixed })))
}

fn simulate(cfg: &RunConfig) -> CmdResult {
    let theta0 = cfg.simulate.theta0.context("missing required key `simulate.theta0`")?;
    let noise = noise_config(cfg);
    let rec = integrate_trajectory(theta0, cfg.simulate.phi0, &cfg.model, &noise, &cfg.integrator)?;
    let path = cfg.out.join("trajectory.csv");
    let mut buf = Vec::new();
    rec.write_path_csv(&mut buf)?;
    write_atomic(&path, &buf)?;
    let frozen_probability = match cfg.noise.mode {
        NoiseMode::Frozen => macroscopic_probability(theta0, &cfg.model).ok(),
        _ => None,
    };
    let results = json!({
        "outcome": rec.outcome,
        "hemisphere_outcome": rec.hemisphere_outcome(),
        "steps_used": rec.steps_used,
        "final_state": rec.final_state,
        "born_target": collapse_core::born_weight(theta0),
        "frozen_up_down_probability": frozen_probability,
    });
    Ok((vec![path], results))
}

fn ensemble(cfg: &RunConfig) -> CmdResult {
    let stats = run_ensemble(
        &cfg.ensemble.theta0,
        cfg.ensemble.trials,
        &cfg.model,
        &noise_config(cfg),
        &cfg.integrator,
    )?;
    let path = cfg.out.join("ensemble.csv");
    write_ensemble_csv(&path, &stats)?;
    Ok((vec![path], json!({ "deviation": deviation_summary(&stats), "points": stats.points })))
}

/// File name used by `born-curve` for one field amplitude.
pub fn born_curve_file(b0: f64) -> String {
    format!("born_curve_b0_{b0}.csv")
}

fn born_curve(cfg: &RunConfig) -> CmdResult {
    let noise = noise_config(cfg);
    let mut files = Vec::new();
    let mut curves = Vec::new();
    for &b0 in &cfg.born_curve.b0_values {
        let params = cfg.model.with_b0(b0);
        let integ = cfg.integrator.with_stable_substeps(&params, cfg.born_curve.substep_product);
        let stats = run_ensemble(&cfg.ensemble.theta0, cfg.ensemble.trials, &params, &noise, &integ)?;
        let path = cfg.out.join(born_curve_file(b0));
        write_ensemble_csv(&path, &stats)?;
        files.push(path);
        curves.push(json!({
            "b0": b0,
            "substeps": integ.substeps,
            "deviation": deviation_summary(&stats),
        }));
    }
    Ok((files, json!({ "curves": curves })))
}

/// Integrator used for one calibration cell: `steps_per_tau` steps per
/// correlation time, a budget of `horizon` collapse times, and enough
/// sub-steps to stay stable up to `b0_hi`.
pub fn calibration_integrator(cfg: &RunConfig, params: &ModelParams<f64>, tau_r: f64) -> IntegratorConfig<f64> {
    let c = &cfg.calibrate;
    let dt = tau_r / c.steps_per_tau;
    let base = IntegratorConfig {
        dt,
        max_steps: (c.horizon / (params.collapse_rate() * dt)).ceil() as u64,
        ..cfg.integrator
    };
    base.with_stable_substeps(&params.with_b0(c.b0_hi), 0.25)
}

const CALIBRATION_HEADER: [&str; 10] = [
    "kind",
    "n_spins",
    "tau_r",
    "tau_over_crossover",
    "b0_star",
    "b0_relation",
    "relation_quotient",
    "oriented_deviation",
    "max_abs_deviation",
    "evaluations",
];

fn calibrate(cfg: &RunConfig) -> CmdResult {
    let c = &cfg.calibrate;
    let spec = CalibrationSpec {
        b0_lo: c.b0_lo,
        b0_hi: c.b0_hi,
        rel_tol: c.rel_tol,
        trials: c.trials,
    };
    let grid = collapse_core::ensemble::theta_grid(c.grid_points);
    let mut cells: Vec<(&str, u64, f64)> = Vec::new();
    for &n in &c.n_spins {
        for &x in &c.tau_over_crossover {
            cells.push(("grid", n, x));
        }
    }
    // continuity point: correlation time equal to the crossover time
    cells.push(("crossover", cfg.model.n_spins, 1.0));

    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (kind, n, x) in cells {
        let params = cfg.model.with_n_spins(n);
        let tau_r = x * params.crossover_time();
        let noise = NoiseConfig::poisson(tau_r, cfg.seed);
        let integ = calibration_integrator(cfg, &params, tau_r);
        let r = calibrate_b0(&params, &noise, &integ, &grid, &spec)
            .with_context(|| format!("calibrating N = {n}, tau_r = {tau_r}"))?;
        let b0_relation = born_relation_b0(&params, tau_r);
        rows.push([
            kind.to_string(),
            n.to_string(),
            tau_r.to_string(),
            x.to_string(),
            r.b0_star.to_string(),
            b0_relation.to_string(),
            r.relation_quotient.to_string(),
            r.deviation.to_string(),
            r.max_abs_deviation.to_string(),
            r.evaluations.len().to_string(),
        ]);
        results.push(json!({
            "kind": kind,
            "tau_over_crossover": x,
            "b0_relation": b0_relation,
            "dt": integ.dt,
            "substeps": integ.substeps,
            "max_steps": integ.max_steps,
            "result": r,
        }));
    }
    let path = cfg.out.join("calibration.csv");
    write_atomic(&path, &csv_bytes(&CALIBRATION_HEADER, rows)?)?;
    Ok((vec![path], json!({ "cells": results })))
}

fn stability_bound(cfg: &RunConfig) -> CmdResult {
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    for &rate in &cfg.stability.collapse_rate {
        for &tau_u in &cfg.stability.tau_u {
            let b = min_correlation_time(rate, tau_u)?;
            rows.push([
                b.collapse_rate.to_string(),
                b.tau_u.to_string(),
                b.tau_r_min.to_string(),
                b.residual.to_string(),
            ]);
            bounds.push(b);
        }
    }
    let path = cfg.out.join("stability_bound.csv");
    write_atomic(
        &path,
        &csv_bytes(&["collapse_rate", "tau_u", "tau_r_min", "residual"], rows)?,
    )?;
    Ok((vec![path], json!({ "bounds": bounds })))
}
