//! Sample statistics used to check the noise process and ensemble output.

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the uniform law on `[lo, hi]`.
pub fn ks_statistic_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS distance `d` from `n` samples, with Stephens'
/// small-sample correction.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square statistic of `cosines` against the uniform law on
/// `[-1, 1]` over `bins` equal bins.
pub fn chi_square_cosine_bins(cosines: &[f64], bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for &c in cosines {
        let idx = (((c + 1.0) / 2.0) * bins as f64).floor() as isize;
        counts[idx.clamp(0, bins as isize - 1) as usize] += 1;
    }
    let expected = cosines.len() as f64 / bins as f64;
    counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum()
}

/// Normalised autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
    (0..=max_lag.min(n - 1))
        .map(|lag| {
            let s: f64 = centred[..n - lag]
                .iter()
                .zip(&centred[lag..])
                .map(|(a, b)| a * b)
                .sum();
            s / (n - lag) as f64 / var
        })
        .collect()
}

/// Weighted least-squares fit of `ln rho(lag) = -lag dt / tau` through the
/// origin over lags `1..=max_lag` with positive autocorrelation. Returns
/// `tau`.
///
/// The sampling error of `rho` is roughly flat across lags, so the error of
/// `ln rho` grows like `1 / rho`; weighting by `rho^2` keeps the noisy tail
/// from dominating. For jump processes most of the information sits at short
/// lags: a window of half a correlation time gives about 2% spread at `10^4`
/// correlation times, against 3% for two correlation times.
pub fn fit_correlation_time(series: &[f64], dt: f64, max_lag: usize) -> f64 {
    let rho = autocorrelation(series, max_lag);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (lag, &r) in rho.iter().enumerate().skip(1) {
        if r <= 0.0 {
            break;
        }
        let x = lag as f64 * dt;
        let w = r * r;
        sxy += w * x * r.ln();
        sxx += w * x * x;
    }
    -sxx / sxy
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
