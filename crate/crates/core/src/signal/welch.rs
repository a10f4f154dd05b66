use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hamming,
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        (0..n)
            .map(|i| {
                let phase = tau * i as f64 / n as f64;
                match self {
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    /// Segment length in samples. ITTRD uses `min(segment_len, window length)`.
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments, in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
    /// Integration band for ITTRD, Hz.
    pub band: (f64, f64),
    /// Remove each segment's mean before windowing.
    pub detrend: bool,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            segment_len: 256,
            overlap: 0.5,
            window: Window::Hamming,
            band: (8.0, 30.0),
            detrend: true,
        }
    }
}

impl WelchConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.segment_len < 8 {
            return Err(Error::Config(format!("Welch segment length {} < 8", self.segment_len)));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap {} not in [0, 1)", self.overlap)));
        }
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
            return Err(Error::Config(format!(
                "band ({lo}, {hi}) Hz not within (0, {}) Hz",
                fs / 2.0
            )));
        }
        Ok(())
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl PowerSpectrum {
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    fn band_bins(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(move |(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| *p)
    }

    /// Mean density over bins with `lo <= f <= hi`; `None` when no bin falls
    /// inside.
    pub fn band_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let (sum, n) = self.band_bins(lo, hi).fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Rectangle-rule integral of the density over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        self.band_bins(lo, hi).sum::<f64>() * self.resolution()
    }

    pub fn peak_frequency(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.freqs[i]
    }
}

/// Averaged modified periodogram with density scaling, so that integrating a
/// unit-variance white signal over `(0, fs/2)` gives approximately 1.
pub fn welch_psd(x: &[f64], fs: f64, cfg: &WelchConfig) -> Result<PowerSpectrum> {
    let seg = cfg.segment_len;
    if x.len() < seg || seg == 0 {
        return Err(Error::TooShort {
            len: x.len(),
            segment: seg,
        });
    }
    let step = (seg - (cfg.overlap * seg as f64).round() as usize).max(1);
    let win = cfg.window.coefficients(seg);
    let win_power: f64 = win.iter().map(|w| w * w).sum();
    let n_bins = seg / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut acc = vec![0.0; n_bins];
    let mut n_segments = 0usize;

    let mut start = 0;
    while start + seg <= x.len() {
        let chunk = &x[start..start + seg];
        let mean = if cfg.detrend {
            chunk.iter().sum::<f64>() / seg as f64
        } else {
            0.0
        };
        for ((b, &v), &w) in buf.iter_mut().zip(chunk).zip(&win) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        n_segments += 1;
        start += step;
    }

    let scale = 1.0 / (fs * win_power * n_segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) {
                1.0
            } else {
                2.0
            };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs / seg as f64).collect();
    Ok(PowerSpectrum { freqs, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    /// Direct O(n^2) DFT, one-sided density with a rectangular window.
    fn dft_density(x: &[f64], fs: f64) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                let p = (re * re + im * im) / (fs * n as f64);
                if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect()
    }

    fn rect_single(n: usize) -> WelchConfig {
        WelchConfig {
            segment_len: n,
            overlap: 0.0,
            window: Window::Rectangular,
            detrend: false,
            ..WelchConfig::default()
        }
    }

    #[test]
    fn bin_centred_sinusoid_matches_dft_and_parseval() {
        let (fs, n, amp) = (160.0, 320, 3.0);
        let f0 = 20.0; // bin 40 of 320 at 0.5 Hz spacing
        let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
        let psd = welch_psd(&x, fs, &rect_single(n)).unwrap();
        let oracle = dft_density(&x, fs);
        for (a, b) in psd.density.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * oracle.iter().cloned().fold(0.0, f64::max));
        }
        assert_eq!(psd.peak_frequency(), f0);
        let total = psd.integrate(0.0, fs / 2.0);
        assert!((total - amp * amp / 2.0).abs() / (amp * amp / 2.0) < 0.05);
    }

    #[test]
    fn white_noise_integrates_to_its_variance() {
        let mut rng = crate::rng_from_seed(11);
        let fs = 160.0;
        let cfg = WelchConfig::default();
        let mut total = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..1024).map(|_| StandardNormal.sample(&mut rng)).collect();
            total += welch_psd(&x, fs, &cfg).unwrap().integrate(0.0, fs / 2.0);
        }
        let mean = total / 100.0;
        assert!((mean - 1.0).abs() < 0.10, "mean integrated power {mean}");
    }

    #[test]
    fn zero_input_gives_zero_spectrum() {
        let psd = welch_psd(&[0.0; 512], 100.0, &WelchConfig::default()).unwrap();
        assert!(psd.density.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn too_short_input_is_an_error() {
        let err = welch_psd(&[0.0; 100], 100.0, &WelchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooShort { len: 100, segment: 256 }));
    }

    #[test]
    fn config_validation() {
        let ok = WelchConfig::default();
        assert!(ok.validate(160.0).is_ok());
        assert!(WelchConfig {
            band: (8.0, 90.0),
            ..ok
        }
        .validate(160.0)
        .is_err());
        assert!(WelchConfig { overlap: 1.0, ..ok }.validate(160.0).is_err());
        assert!(WelchConfig { segment_len: 4, ..ok }.validate(160.0).is_err());
    }
}
