//! Acceptance suite: one line per criterion, PASS or FAIL, with the numbers
//! behind the verdict.
//!
//! Criteria listed in `KNOWN_RED` are run in full and reported as FAIL when
//! they fail; the process only exits nonzero when a criterion's outcome
//! differs from that list (an unexpected failure, or a known failure that
//! starts passing).

use std::f64::consts::{FRAC_PI_3, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use collapse_core::diagnostics::{fit_correlation_time, kolmogorov_pvalue, ks_statistic_uniform};
use collapse_core::integrator::evolve;
use collapse_core::noise::make_noise_path;
use collapse_core::stability::stability_function;
use collapse_core::{
    born_weight, integrate_amplitudes, min_correlation_time, sample_stationary_chi,
    step_rk4, AmplitudeState, BlochState, ModelParams, NoiseConfig, NoiseSource,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// The field-amplitude relation fails with the stated field distribution:
/// `cos chi` uniform on `[-1, 1]` has variance 1/3, and Born statistics come
/// out at a quotient near 0.3 rather than 1. The relation matches a field of
/// unit variance.
const KNOWN_RED: &[u8] = &[4];

const BORN_B0: [f64; 7] = [1.0, 2.0, 5.0, 7.0, 10.0, 50.0, 100.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn collapse(args: &[&str]) -> anyhow::Result<()> {
    let out = Command::new(env!("CARGO_BIN_EXE_collapse")).args(args).output()?;
    anyhow::ensure!(
        out.status.success(),
        "collapse {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Rows of a CSV file with a header, parsed as `f64` where possible.
fn read_csv(path: &Path) -> anyhow::Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.records().collect::<Result<_, _>>()?)
}

fn num(rec: &csv::StringRecord, i: usize) -> f64 {
    rec[i].parse().expect("numeric CSV field")
}

fn frozen_born(dir: &Path) -> anyhow::Result<Verdict> {
    let out = dir.join("c1");
    let t = Instant::now();
    collapse(&["ensemble", "--out", out.to_str().unwrap()])?;
    let secs = t.elapsed().as_secs_f64();
    let s = read_json(&out.join("ensemble.json"))?;
    let cfg = &s["config"];
    anyhow::ensure!(cfg["model"]["j_coupling"] == cfg["model"]["b0"] && cfg["noise"]["mode"] == "frozen");
    let max_abs = s["results"]["deviation"]["max_abs"].as_f64().unwrap();
    let unresolved = s["results"]["deviation"]["unresolved_fraction"].as_f64().unwrap();
    let trials = cfg["ensemble"]["trials"].as_u64().unwrap();
    let points = cfg["ensemble"]["theta0"].as_array().unwrap().len();
    Ok(Verdict {
        pass: max_abs <= 0.02 && unresolved < 0.01 && trials == 10_000 && points == 11,
        detail: format!("max|dev| = {max_abs:.4} (<= 0.02), unresolved = {unresolved:.4} (< 0.01), {secs:.1} s"),
    })
}

fn off_born(dir: &Path) -> anyhow::Result<Verdict> {
    let out = dir.join("c2");
    let cfg = dir.join("c2.toml");
    fs::write(&cfg, format!("[ensemble]\ntheta0 = [{FRAC_PI_3:?}]\ntrials = 100000\n"))?;
    collapse(&["ensemble", "--config", cfg.to_str().unwrap(), "--b0", "2", "--seed", "2", "--out", out.to_str().unwrap()])?;
    let rows = read_csv(&out.join("ensemble.csv"))?;
    let p = num(&rows[0], 3);
    Ok(Verdict {
        pass: (p - 0.625).abs() <= 0.005,
        detail: format!("p_hat = {p:.5} (0.625 +- 0.005)"),
    })
}

/// `p_hat` per angle for each field amplitude, in `BORN_B0` order.
fn born_curves(out: &Path) -> anyhow::Result<Vec<Vec<(f64, f64, u64)>>> {
    BORN_B0
        .iter()
        .map(|&b0| {
            let rows = read_csv(&out.join(collapse_cli::born_curve_file(b0)))?;
            Ok(rows.iter().map(|r| (num(r, 0), num(r, 3), num(r, 2) as u64)).collect())
        })
        .collect()
}

fn born_family(out: &Path, secs: f64) -> anyhow::Result<Verdict> {
    let curves = born_curves(out)?;
    let summary = read_json(&out.join("born-curve.json"))?;
    let dt = summary["config"]["integrator"]["dt"].as_f64().unwrap();
    let max_steps = summary["config"]["integrator"]["max_steps"].as_u64().unwrap();
    let trials = summary["config"]["ensemble"]["trials"].as_u64().unwrap();

    let sd = |p: f64, n: u64| (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
    let mut worst_rise = f64::NEG_INFINITY;
    for pair in curves.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            let s = (sd(a.1, a.2).powi(2) + sd(b.1, b.2).powi(2)).sqrt();
            let rise = ((b.1 - 0.5).abs() - (a.1 - 0.5).abs()) / s;
            worst_rise = worst_rise.max(rise);
        }
    }
    let flat = curves[6].iter().map(|c| (c.1 - 0.5).abs()).fold(0.0, f64::max);
    let born = curves[0].iter().map(|c| (c.1 - born_weight(c.0)).abs()).fold(0.0, f64::max);
    Ok(Verdict {
        pass: worst_rise < 3.0 && flat <= 0.02 && born <= 0.05 && trials == 10_000 && max_steps <= 8000,
        detail: format!(
            "max step away from 0.5 = {worst_rise:.2} sigma (< 3), B0=100 max|p-0.5| = {flat:.4} (<= 0.02), \
             B0=1 max|p-born| = {born:.4} (<= 0.05), step = {dt} collapse times, {secs:.1} s"
        ),
    })
}

fn field_relation(dir: &Path) -> anyhow::Result<Verdict> {
    let out = dir.join("c4");
    let t = Instant::now();
    collapse(&["calibrate", "--out", out.to_str().unwrap()])?;
    let secs = t.elapsed().as_secs_f64();
    let rows = read_csv(&out.join("calibration.csv"))?;
    let summary = read_json(&out.join("calibrate.json"))?;
    let j = summary["config"]["model"]["j_coupling"].as_f64().unwrap();
    let quotients: Vec<f64> = rows.iter().filter(|r| &r[0] == "grid").map(|r| num(r, 6)).collect();
    let crossover = rows.iter().find(|r| &r[0] == "crossover").map(|r| num(r, 4)).unwrap();
    let in_band = quotients.iter().all(|q| (0.5..=2.0).contains(q));
    let lo = quotients.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = quotients.iter().cloned().fold(0.0, f64::max);
    let cont = (crossover / j - 1.0).abs();
    Ok(Verdict {
        pass: quotients.len() == 9 && in_band && cont <= 0.15,
        detail: format!(
            "r in [{lo:.3}, {hi:.3}] over {} cells (want [0.5, 2]), b0*/J at crossover = {:.3} (want 1 +- 0.15), {secs:.1} s",
            quotients.len(),
            crossover / j
        ),
    })
}

/// Max `|theta_bloch - theta_amplitude|` along a matched noise path.
fn oracle_gap(theta0: f64, b: f64, tau_r: f64, seed: u64, dt: f64, horizon: f64) -> anyhow::Result<f64> {
    let params = ModelParams::dimensionless(b);
    let path = make_noise_path(horizon, dt, &NoiseConfig::poisson(tau_r, seed))?;
    let n = (horizon / dt).round() as u64;
    let initial = BlochState::new(theta0, 0.0);
    let bloch = evolve(initial, &params, &path, dt, n)?;
    let amps = integrate_amplitudes(AmplitudeState::from_bloch(&initial), &params, &path, dt)?;
    anyhow::ensure!(bloch.len() == amps.len());
    Ok(bloch
        .iter()
        .zip(&amps)
        .map(|(s, a)| (s.theta - collapse_core::extract_bloch(a).theta).abs())
        .fold(0.0, f64::max))
}

fn oracle() -> anyhow::Result<Verdict> {
    let headline = oracle_gap(1.0, 0.8, 1.0, 1, 1e-4, 10.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let theta0 = rng.random_range(0.05..PI - 0.05);
        let b = rng.random_range(0.0..3.0);
        let tau_r = rng.random_range(0.05..2.0);
        worst = worst.max(oracle_gap(theta0, b, tau_r, case, 1e-4, 1.0)?);
    }
    Ok(Verdict {
        pass: headline < 1e-6 && worst < 1e-5,
        detail: format!("matched run max|dtheta| = {headline:.2e} (< 1e-6), 100 random cases max = {worst:.2e} (< 1e-5)"),
    })
}

fn conservation() -> anyhow::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let params = ModelParams::new(
            rng.random_range(0.2..2.0),
            rng.random_range(0.0..4.0),
            2 * rng.random_range(1..100u64),
            rng.random_range(0.005..0.05),
        );
        let noise = NoiseConfig::poisson(rng.random_range(0.01..1.0), case);
        let mut source = NoiseSource::new(&noise)?;
        let mut state = BlochState::new(rng.random_range(0.1..PI - 0.1), rng.random_range(-PI..PI));
        let start = state.log_conserved();
        for step in 0..20_000u64 {
            let chi = if step == 0 { source.current() } else { source.advance(dt) };
            let next = step_rk4(&state, chi, &params, dt);
            if !(0.1..=PI - 0.1).contains(&next.theta) {
                break;
            }
            state = next;
            worst = worst.max((state.log_conserved() - start).exp_m1().abs());
        }
    }
    Ok(Verdict {
        pass: worst < 1e-6,
        detail: format!("max relative drift of n^2 sin(theta) = {worst:.2e} (< 1e-6)"),
    })
}

fn noise_process() -> anyhow::Result<Verdict> {
    let mut rng = NoiseConfig::<f64>::frozen(7).rng();
    let cosines: Vec<f64> = (0..100_000).map(|_| sample_stationary_chi::<f64, _>(&mut rng).cos()).collect();
    let d = ks_statistic_uniform(&cosines, -1.0, 1.0);
    let p = kolmogorov_pvalue(d, cosines.len());

    let (tau, dt) = (0.1f64, 1e-3f64);
    let mut source = NoiseSource::new(&NoiseConfig::poisson(tau, 8))?;
    let series: Vec<f64> = (0..1_000_000).map(|_| source.advance(dt).cos()).collect();
    let fitted = fit_correlation_time(&series, dt, (0.5 * tau / dt) as usize);
    let rel = (fitted / tau - 1.0).abs();
    Ok(Verdict {
        pass: p > 0.01 && rel < 0.05,
        detail: format!("KS d = {d:.5}, p = {p:.3} (> 0.01); fitted tau = {fitted:.5} vs 0.1 ({:.2}% < 5%)", rel * 100.0),
    })
}

fn stability() -> anyhow::Result<Verdict> {
    let rates: Vec<f64> = (0..=9).map(|k| 10f64.powi(k)).collect();
    let mut tau_us: Vec<f64> = (1..=17).step_by(2).map(|k| 10f64.powi(k)).collect();
    tau_us.push(4.4e17);
    let mut worst: f64 = 0.0;
    for &rate in &rates {
        for &tau_u in &tau_us {
            let b = min_correlation_time(rate, tau_u)?;
            let g = stability_function(rate, b.tau_r_min, tau_u).abs();
            worst = worst.max(g).max(b.residual.abs());
        }
    }
    let headline = min_correlation_time(1e6, 4.4e17)?;
    Ok(Verdict {
        pass: worst < 1e-10,
        detail: format!(
            "max residual = {worst:.2e} over {} pairs (< 1e-10); rate 1e6, tau_u 4.4e17 -> tau_r >= {:e}",
            rates.len() * tau_us.len(),
            headline.tau_r_min
        ),
    })
}

fn determinism(a: &Path, b: &Path) -> anyhow::Result<Verdict> {
    let mut same = 0;
    for &b0 in &BORN_B0 {
        let name = collapse_cli::born_curve_file(b0);
        if fs::read(a.join(&name))? == fs::read(b.join(&name))? {
            same += 1;
        }
    }
    Ok(Verdict {
        pass: same == BORN_B0.len(),
        detail: format!("{same}/{} born-curve CSVs byte-identical between 1 and 2 threads", BORN_B0.len()),
    })
}

fn main() {
    // cargo passes harness flags such as --quiet; listing support keeps
    // `cargo test -- --list` working.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();

    let one = d.join("born_t1");
    let two = d.join("born_t2");
    let t = Instant::now();
    let born_run = collapse(&["born-curve", "--threads", "1", "--out", one.to_str().unwrap()]);
    let born_secs = t.elapsed().as_secs_f64();
    let born_run2 = born_run
        .as_ref()
        .map_err(|e| anyhow::anyhow!("{e}"))
        .and_then(|_| collapse(&["born-curve", "--threads", "2", "--out", two.to_str().unwrap()]));

    let checks: Vec<(u8, &str, anyhow::Result<Verdict>)> = vec![
        (1, "Born rule, frozen field, J = B0", frozen_born(d)),
        (2, "off-Born frozen field, J/B0 = 0.5", off_born(d)),
        (3, "field-amplitude family, per-step field", born_run.and_then(|_| born_family(&one, born_secs))),
        (4, "field amplitude vs correlation time", field_relation(d)),
        (5, "amplitude oracle equivalence", oracle()),
        (6, "conservation of n^2 sin(theta)", conservation()),
        (7, "field marginal and correlation time", noise_process()),
        (8, "stability bound root", stability()),
        (9, "thread-count determinism", born_run2.and_then(|_| determinism(&one, &two))),
    ];

    let mut unexpected = Vec::new();
    for (id, name, result) in checks {
        let (pass, detail) = match result {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        let known = KNOWN_RED.contains(&id);
        let tag = match (pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        println!("criterion {id}: {tag:<17} {name}: {detail}");
        if pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance outcome differs from expectation for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
