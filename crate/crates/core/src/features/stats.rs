//! Per-channel statistical and time-domain descriptors.
//!
//! The order is fixed: mean, std, variance, skewness, excess kurtosis,
//! Shannon entropy (bits, equal-width histogram), Hjorth activity, mobility
//! and complexity, zero-crossing rate of the centred signal, Willison
//! amplitude, slope sign changes, RMS, mean absolute value, waveform length,
//! peak-to-peak, median, interquartile range, line-length rate (waveform
//! length per second).

use serde::{Deserialize, Serialize};

pub const N_STATS: usize = 19;

pub const STAT_NAMES: [&str; N_STATS] = [
    "mean",
    "std",
    "var",
    "skew",
    "kurtosis",
    "entropy",
    "hjorth_activity",
    "hjorth_mobility",
    "hjorth_complexity",
    "zcr",
    "wamp",
    "ssc",
    "rms",
    "mav",
    "wl",
    "ptp",
    "median",
    "iqr",
    "ll_rate",
];

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatConfig {
    pub entropy_bins: usize,
    /// Willison amplitude threshold on successive differences (uV).
    pub wamp_threshold: f64,
    /// Slope sign change threshold on each adjacent difference (uV).
    pub ssc_threshold: f64,
}

impl Default for StatConfig {
    fn default() -> Self {
        StatConfig {
            entropy_bins: 50,
            wamp_threshold: 4.0,
            ssc_threshold: 0.5,
        }
    }
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn entropy(x: &[f64], bins: usize) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi - lo > EPS) || bins < 2 {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    for &v in x {
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Hjorth mobility `sqrt(var(dx) / var(x))`, zero for a flat signal.
fn mobility(var_x: f64, var_dx: f64) -> f64 {
    if var_x > EPS {
        (var_dx / var_x).sqrt()
    } else {
        0.0
    }
}

/// The 19 descriptors of one signal sampled at `fs`.
pub fn signal_stats(x: &[f64], fs: f64, cfg: &StatConfig) -> [f64; N_STATS] {
    let mut out = [0.0; N_STATS];
    if x.is_empty() {
        return out;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let m2 = c.iter().map(|v| v * v).sum::<f64>() / n;
    let m3 = c.iter().map(|v| v * v * v).sum::<f64>() / n;
    let m4 = c.iter().map(|v| v * v * v * v).sum::<f64>() / n;
    let (skew, kurt) = if m2 > EPS {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let dx = diff(x);
    let ddx = diff(&dx);
    let (var_dx, var_ddx) = (
        if dx.is_empty() { 0.0 } else { variance(&dx) },
        if ddx.is_empty() { 0.0 } else { variance(&ddx) },
    );
    let mob = mobility(m2, var_dx);
    let complexity = if mob > EPS {
        mobility(var_dx, var_ddx) / mob
    } else {
        0.0
    };

    let zc = c
        .windows(2)
        .filter(|w| (w[0] < 0.0) != (w[1] < 0.0) && w[0] != w[1])
        .count();
    let zcr = if x.len() > 1 { zc as f64 / (n - 1.0) } else { 0.0 };
    let wamp = dx.iter().filter(|d| d.abs() > cfg.wamp_threshold).count() as f64;
    let ssc = x
        .windows(3)
        .filter(|w| {
            let (a, b) = (w[1] - w[0], w[1] - w[2]);
            a * b > 0.0 && (a.abs() >= cfg.ssc_threshold || b.abs() >= cfg.ssc_threshold)
        })
        .count() as f64;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mav = x.iter().map(|v| v.abs()).sum::<f64>() / n;
    let wl: f64 = dx.iter().map(|d| d.abs()).sum();

    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ptp = sorted[sorted.len() - 1] - sorted[0];

    out[0] = mean;
    out[1] = m2.sqrt();
    out[2] = m2;
    out[3] = skew;
    out[4] = kurt;
    out[5] = entropy(x, cfg.entropy_bins);
    out[6] = m2;
    out[7] = mob;
    out[8] = complexity;
    out[9] = zcr;
    out[10] = wamp;
    out[11] = ssc;
    out[12] = rms;
    out[13] = mav;
    out[14] = wl;
    out[15] = ptp;
    out[16] = quantile(&sorted, 0.5);
    out[17] = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    out[18] = wl / (n / fs);
    out
}
