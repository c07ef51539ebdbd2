//! Run configuration: per-command defaults, then a TOML (or JSON) file, then
//! flag / environment overrides. The resolved config is echoed into every
//! run summary, and a summary can be fed back in with `--config` to repeat
//! the run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use collapse_core::ensemble::theta_grid;
use collapse_core::{IntegratorConfig, ModelParams, NoiseMode};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    FlowDiagram,
    Simulate,
    Ensemble,
    BornCurve,
    Calibrate,
    StabilityBound,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FlowDiagram => "flow-diagram",
            Self::Simulate => "simulate",
            Self::Ensemble => "ensemble",
            Self::BornCurve => "born-curve",
            Self::Calibrate => "calibrate",
            Self::StabilityBound => "stability-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub mode: NoiseMode,
    /// Correlation time, read in `poisson_resample` mode only.
    pub tau_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub theta0: Vec<f64>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Required by `simulate`; no default.
    pub theta0: Option<f64>,
    pub phi0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub theta_count: usize,
    /// Number of evenly spaced field angles on `[0, pi]`.
    pub chi_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornCurveSection {
    pub b0_values: Vec<f64>,
    /// Sub-steps per step are chosen so `sub_dt * rate * (1 + b)` stays below this.
    pub substep_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub n_spins: Vec<u64>,
    /// Correlation times as fractions of the crossover time `hbar / (2 J N eps)`.
    pub tau_over_crossover: Vec<f64>,
    pub b0_lo: f64,
    pub b0_hi: f64,
    pub rel_tol: f64,
    pub trials: u64,
    /// Integration steps per correlation time.
    pub steps_per_tau: f64,
    /// Step budget, in collapse times `hbar / (J N eps)`.
    pub horizon: f64,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    /// Collapse rates `J N eps / hbar`; every pairing with `tau_u` is solved.
    pub collapse_rate: Vec<f64>,
    pub tau_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out: PathBuf,
    pub model: ModelParams<f64>,
    pub noise: NoiseSection,
    pub integrator: IntegratorConfig<f64>,
    pub ensemble: EnsembleSection,
    pub simulate: SimulateSection,
    pub flow: FlowSection,
    pub born_curve: BornCurveSection,
    pub calibrate: CalibrateSection,
    pub stability: StabilitySection,
}

impl RunConfig {
    pub fn defaults(cmd: CommandKind) -> Self {
        let mut cfg = Self {
            seed: 1,
            threads: 0,
            out: PathBuf::from("out"),
            model: ModelParams::dimensionless(1.0),
            noise: NoiseSection {
                mode: NoiseMode::Frozen,
                tau_r: 1.0,
            },
            integrator: IntegratorConfig::default(),
            ensemble: EnsembleSection {
                theta0: theta_grid(11),
                trials: 10_000,
            },
            simulate: SimulateSection {
                theta0: None,
                phi0: 0.0,
            },
            flow: FlowSection {
                theta_count: 512,
                chi_count: 9,
            },
            born_curve: BornCurveSection {
                b0_values: vec![1.0, 2.0, 5.0, 7.0, 10.0, 50.0, 100.0],
                substep_product: 0.25,
            },
            calibrate: CalibrateSection {
                n_spins: vec![50, 100, 200],
                tau_over_crossover: vec![0.2, 0.4, 0.8],
                b0_lo: 0.5,
                b0_hi: 20.0,
                rel_tol: 0.03,
                trials: 1000,
                steps_per_tau: 10.0,
                horizon: 60.0,
                grid_points: 11,
            },
            stability: StabilitySection {
                collapse_rate: vec![1e6],
                tau_u: vec![4.4e17],
            },
        };
        match cmd {
            CommandKind::Ensemble => cfg.integrator.dt = 0.01,
            CommandKind::BornCurve => {
                // One field draw per step. Eight collapse times per step is the shortest
                // interval whose weak-field curve sits on the Born line.
                cfg.noise.mode = NoiseMode::PerStep;
                cfg.integrator.dt = 8.0;
            }
            CommandKind::Calibrate => {
                cfg.noise.mode = NoiseMode::PoissonResample;
                cfg.integrator.max_steps = 100_000;
            }
            _ => {}
        }
        cfg
    }

    /// Every violated constraint, one line each.
    pub fn violations(&self, cmd: CommandKind) -> Vec<String> {
        let mut v = Vec::new();
        let mut absorb = |prefix: &str, r: collapse_core::Result<()>| {
            if let Err(collapse_core::Error::InvalidParams(list)) = r {
                v.extend(list.into_iter().map(|m| format!("{prefix}: {m}")));
            }
        };
        absorb("model", self.model.validate());
        absorb("integrator", self.integrator.validate());
        if self.noise.mode == NoiseMode::PoissonResample
            && !(self.noise.tau_r > 0.0 && self.noise.tau_r.is_finite())
        {
            v.push(format!("noise: tau_r must be finite and > 0 (got {})", self.noise.tau_r));
        }
        let in_range = |t: &f64| (0.0..=std::f64::consts::PI).contains(t);
        match cmd {
            CommandKind::Simulate => match self.simulate.theta0 {
                None => v.push("missing required key `simulate.theta0` (or --theta0)".into()),
                Some(t) if !in_range(&t) => v.push(format!("simulate.theta0 must lie in [0, pi] (got {t})")),
                _ => {}
            },
            CommandKind::Ensemble | CommandKind::BornCurve => {
                if self.ensemble.trials == 0 {
                    v.push("ensemble.trials must be >= 1".into());
                }
                if self.ensemble.theta0.is_empty() || !self.ensemble.theta0.iter().all(in_range) {
                    v.push("ensemble.theta0 must be a nonempty list of angles in [0, pi]".into());
                }
                if cmd == CommandKind::BornCurve {
                    if self.born_curve.b0_values.is_empty()
                        || self.born_curve.b0_values.iter().any(|b| !(*b >= 0.0 && b.is_finite()))
                    {
                        v.push("born_curve.b0_values must be a nonempty list of finite values >= 0".into());
                    }
                    if !(self.born_curve.substep_product > 0.0) {
                        v.push("born_curve.substep_product must be > 0".into());
                    }
                }
            }
            CommandKind::FlowDiagram => {
                if self.flow.theta_count < 2 {
                    v.push("flow.theta_count must be >= 2".into());
                }
                if self.flow.chi_count < 1 {
                    v.push("flow.chi_count must be >= 1".into());
                }
            }
            CommandKind::Calibrate => {
                let c = &self.calibrate;
                if self.noise.mode != NoiseMode::PoissonResample {
                    v.push("calibrate requires noise.mode = poisson_resample".into());
                }
                if c.n_spins.is_empty() || c.n_spins.iter().any(|&n| n < 2 || !n.is_multiple_of(2)) {
                    v.push("calibrate.n_spins must be a nonempty list of even counts >= 2".into());
                }
                if c.tau_over_crossover.is_empty() || c.tau_over_crossover.iter().any(|&x| !(x > 0.0)) {
                    v.push("calibrate.tau_over_crossover must be a nonempty list of positive values".into());
                }
                if !(c.b0_lo > 0.0 && c.b0_hi > c.b0_lo) {
                    v.push("calibrate needs 0 < b0_lo < b0_hi".into());
                }
                if !(c.rel_tol > 0.0) {
                    v.push("calibrate.rel_tol must be > 0".into());
                }
                if c.trials == 0 || c.grid_points == 0 {
                    v.push("calibrate.trials and calibrate.grid_points must be >= 1".into());
                }
                if !(c.steps_per_tau > 0.0 && c.horizon > 0.0) {
                    v.push("calibrate.steps_per_tau and calibrate.horizon must be > 0".into());
                }
            }
            CommandKind::StabilityBound => {
                let s = &self.stability;
                let ok = |xs: &[f64]| !xs.is_empty() && xs.iter().all(|&x| x > 0.0 && x.is_finite());
                if !ok(&s.collapse_rate) || !ok(&s.tau_u) {
                    v.push("stability.collapse_rate and stability.tau_u must be nonempty lists of positive values".into());
                }
            }
        }
        v
    }
}

/// Flag and environment overrides; `None` leaves the value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<u64>,
    pub threads: Option<usize>,
    pub b0: Option<f64>,
    pub j: Option<f64>,
    pub n_spins: Option<u64>,
    pub epsilon: Option<f64>,
    pub tau_r: Option<f64>,
    pub noise_mode: Option<NoiseMode>,
    pub dt: Option<f64>,
    pub max_steps: Option<u64>,
    pub delta_theta: Option<f64>,
    pub record_stride: Option<u64>,
    pub substeps: Option<u32>,
    pub theta0: Option<f64>,
    pub phi0: Option<f64>,
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn set(root: &mut Value, path: &[&str], v: Value) {
    let mut cur = root;
    for key in &path[..path.len() - 1] {
        cur = cur
            .as_object_mut()
            .expect("config sections are objects")
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    cur.as_object_mut()
        .expect("config sections are objects")
        .insert(path[path.len() - 1].to_string(), v);
}

/// Reads a TOML config, a JSON config, or a JSON run summary (whose
/// `config` member is used).
pub fn read_config_file(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let value: Value = if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let t: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(t)?
    };
    match value {
        Value::Object(mut m) if m.contains_key("command") && m.contains_key("config") => {
            Ok(m.remove("config").unwrap())
        }
        v @ Value::Object(_) => Ok(v),
        _ => bail!("{}: top level must be a table", path.display()),
    }
}

pub fn resolve(cmd: CommandKind, file: Option<&Path>, o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut value = serde_json::to_value(RunConfig::defaults(cmd))?;
    if let Some(path) = file {
        merge(&mut value, read_config_file(path)?);
    }
    macro_rules! apply {
        ($field:ident, $($path:literal).+) => {
            if let Some(x) = &o.$field {
                set(&mut value, &[$($path),+], serde_json::to_value(x)?);
            }
        };
    }
    apply!(seed, "seed");
    apply!(out, "out");
    apply!(threads, "threads");
    apply!(b0, "model"."b0");
    apply!(j, "model"."j_coupling");
    apply!(n_spins, "model"."n_spins");
    apply!(epsilon, "model"."epsilon");
    apply!(tau_r, "noise"."tau_r");
    apply!(noise_mode, "noise"."mode");
    apply!(dt, "integrator"."dt");
    apply!(max_steps, "integrator"."max_steps");
    apply!(delta_theta, "integrator"."pole_threshold");
    apply!(record_stride, "integrator"."record_stride");
    apply!(substeps, "integrator"."substeps");
    apply!(theta0, "simulate"."theta0");
    apply!(phi0, "simulate"."phi0");
    if let Some(t) = o.trials {
        set(&mut value, &["ensemble", "trials"], t.into());
        if cmd == CommandKind::Calibrate {
            set(&mut value, &["calibrate", "trials"], t.into());
        }
    }

    let cfg: RunConfig = serde_json::from_value(value).context("invalid configuration")?;
    let violations = cfg.violations(cmd);
    if !violations.is_empty() {
        bail!("invalid configuration:\n  {}", violations.join("\n  "));
    }
    Ok(cfg)
}
