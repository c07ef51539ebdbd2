//! Statistical properties of outcome ensembles, checked against the
//! closed-form frozen-field probability and symmetry of the noise.

use std::f64::consts::PI;

use collapse_core::ensemble::{theta_grid, wilson_interval, Z95};
use collapse_core::noise::NoiseSource;
use collapse_core::{
    macroscopic_probability, run_ensemble, step_rk4, BlochState, EnsembleStats, IntegratorConfig,
    ModelParams, NoiseConfig,
};

/// Long step budget: runs that stall near the unstable interior fixed point
/// would otherwise be classified by hemisphere, which biases the extreme
/// grid points by a few standard errors at large trial counts.
fn frozen_integrator(params: &ModelParams<f64>) -> IntegratorConfig<f64> {
    IntegratorConfig {
        dt: 0.01,
        max_steps: 50_000,
        ..IntegratorConfig::default()
    }
    .with_stable_substeps(params, 0.25)
}

fn per_step_stats(b0: f64, grid: &[f64], trials: u64) -> EnsembleStats {
    let params = ModelParams::dimensionless(b0);
    let integ = IntegratorConfig {
        dt: 4.0,
        ..IntegratorConfig::default()
    }
    .with_stable_substeps(&params, 0.25);
    run_ensemble(grid, trials, &params, &NoiseConfig::per_step(7), &integ).unwrap()
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64)
}

/// Smallest `k` with `P(Binomial(n, p) <= k) >= q`.
fn binomial_quantile(n: u64, p: f64, q: f64) -> u64 {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut cdf = pmf;
    let mut k = 0;
    while cdf < q {
        pmf *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
        k += 1;
        cdf += pmf;
    }
    k
}

/// Nominal 95% intervals miss about one point in twenty, so the miss count
/// over the grid is itself binomial. The coverage claim fails only when the
/// count is implausible at 95% coverage (beyond its 99th percentile).
#[test]
fn frozen_frequencies_sit_inside_wilson_intervals() {
    let grid = theta_grid(21);
    let mut misses = 0;
    let mut total = 0;
    for b0 in [1.0, 2.0] {
        let params = ModelParams::dimensionless(b0);
        let stats = run_ensemble(&grid, 2000, &params, &NoiseConfig::frozen(11), &frozen_integrator(&params)).unwrap();
        for p in &stats.points {
            let exact = macroscopic_probability(p.theta0, &params).unwrap();
            let (lo, hi) = p.wilson();
            total += 1;
            if !(lo <= exact && exact <= hi) {
                misses += 1;
            }
        }
    }
    let allowed = binomial_quantile(total, 0.05, 0.99);
    assert!(misses <= allowed, "{misses}/{total} points outside their interval (allowed {allowed})");
}

#[test]
fn binomial_quantile_matches_tables() {
    assert_eq!(binomial_quantile(42, 0.05, 0.99), 6);
    assert_eq!(binomial_quantile(10, 0.5, 0.5), 5);
}

#[test]
fn mirrored_angles_have_complementary_frequencies() {
    let stats = per_step_stats(2.0, &theta_grid(11), 4000);
    let pts = &stats.points;
    for k in 0..pts.len() / 2 {
        let (a, b) = (&pts[k], &pts[pts.len() - 1 - k]);
        assert!((a.theta0 + b.theta0 - PI).abs() < 1e-12);
        let s = (sigma(a.frequency(), a.trials).powi(2) + sigma(b.frequency(), b.trials).powi(2)).sqrt();
        let miss = (a.frequency() + b.frequency() - 1.0).abs();
        assert!(miss < 3.0 * s, "theta0 = {}: sum off by {miss} (3 sigma = {})", a.theta0, 3.0 * s);
    }
}

#[test]
fn frequencies_do_not_increase_with_angle() {
    for b0 in [1.0, 5.0] {
        let stats = per_step_stats(b0, &theta_grid(11), 4000);
        for w in stats.points.windows(2) {
            let rise = w[1].frequency() - w[0].frequency();
            let s = (sigma(w[0].frequency(), w[0].trials).powi(2) + sigma(w[1].frequency(), w[1].trials).powi(2)).sqrt();
            assert!(rise < 3.0 * s, "b0 = {b0}: rise {rise} between {} and {}", w[0].theta0, w[1].theta0);
        }
    }
}

#[test]
fn strong_field_flattens_and_weak_field_sharpens() {
    // An even grid count keeps the equator out.
    let grid = theta_grid(10);

    let strong = ModelParams::dimensionless(1e3);
    let stats = run_ensemble(&grid, 2000, &strong, &NoiseConfig::frozen(3), &frozen_integrator(&strong)).unwrap();
    for p in &stats.points {
        let (lo, hi) = wilson_interval(p.up_down, p.trials, 3.0);
        assert!(lo <= 0.5 && 0.5 <= hi, "strong field at {}: {}", p.theta0, p.frequency());
        assert_eq!(p.unresolved, 0);
    }

    let weak = ModelParams::dimensionless(1e-3);
    let stats = run_ensemble(&grid, 2000, &weak, &NoiseConfig::frozen(3), &frozen_integrator(&weak)).unwrap();
    for p in &stats.points {
        let step = if p.theta0 < PI / 2.0 { 1.0 } else { 0.0 };
        let (lo, hi) = wilson_interval(p.up_down, p.trials, Z95);
        assert!(lo <= step && step <= hi, "weak field at {}: {}", p.theta0, p.frequency());
    }
}

/// Fraction of runs started at the pole threshold that leave `[0, 2 delta]`
/// within `10^4` correlation times, with `2 J N eps tau_r = 20` and `J = B0`.
#[test]
fn collapsed_states_rarely_escape() {
    let delta = 1e-3;
    let params = ModelParams::dimensionless(1.0);
    let tau_r = 10.0 / params.collapse_rate();
    let dt = tau_r / 10.0;
    let substeps = 8;
    let horizon_steps = (1e4 * tau_r / dt) as u64;
    let trials = 20_000u64;

    let mut escaped = 0u64;
    for trial in 0..trials {
        let noise = NoiseConfig::poisson(tau_r, 5).with_stream(trial);
        let mut source = NoiseSource::new(&noise).unwrap();
        let mut state = BlochState::new(delta, 0.0);
        for step in 0..horizon_steps {
            let chi = if step == 0 { source.current() } else { source.advance(dt) };
            for _ in 0..substeps {
                state = step_rk4(&state, chi, &params, dt / substeps as f64);
            }
            if state.theta > 2.0 * delta {
                escaped += 1;
                break;
            }
            // Deep in the pole region the escape chance per draw is
            // sin^2(theta/2) < 1e-22: nothing more can happen.
            if state.theta < delta * 1e-8 {
                break;
            }
        }
    }
    let bound = collapse_core::escape_probability(delta) * 1e4 * 10.0;
    let frac = escaped as f64 / trials as f64;
    assert!(frac < bound, "escape fraction {frac} >= {bound}");
}
