//! Butterworth band-pass design (bilinear transform, second-order sections)
//! and zero-phase forward-backward filtering.

use ndarray::Axis;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TrialSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandpassConfig {
    pub order: usize,
    pub band: (f64, f64),
}

impl Default for BandpassConfig {
    fn default() -> Self {
        BandpassConfig {
            order: 5,
            band: (4.0, 40.0),
        }
    }
}

/// Cascade of biquads `[b0, b1, b2, a0, a1, a2]` with `a0 == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sos: Vec<[f64; 6]>,
    order: usize,
}

impl Butterworth {
    /// Digital band-pass of the given prototype order (`2 * order` poles).
    pub fn bandpass(order: usize, f_lo: f64, f_hi: f64, fs: f64) -> Result<Self> {
        let nyq = fs / 2.0;
        if order == 0 {
            return Err(Error::FilterDesign("order must be at least 1".into()));
        }
        if !(f_lo > 0.0 && f_lo < f_hi && f_hi < nyq) {
            return Err(Error::FilterDesign(format!(
                "band ({f_lo}, {f_hi}) Hz must satisfy 0 < lo < hi < Nyquist ({nyq} Hz)"
            )));
        }
        let warp = |f: f64| 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
        let (w1, w2) = (warp(f_lo), warp(f_hi));
        let bw = w2 - w1;
        let w0_sq = w1 * w2;
        let k = 2.0 * fs;

        let mut poles = Vec::with_capacity(2 * order);
        for i in 1..=order {
            let theta = std::f64::consts::PI * (2 * i + order - 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            // s^2 - p*bw*s + w0^2 = 0
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                poles.push((k + s) / (k - s));
            }
        }
        if let Some(p) = poles.iter().find(|p| p.norm() >= 1.0) {
            return Err(Error::FilterDesign(format!("unstable pole at |z| = {}", p.norm())));
        }

        let mut sos = pair_poles(&poles)
            .into_iter()
            .map(|(p, q)| {
                let a1 = -(p + q).re;
                let a2 = (p * q).re;
                [1.0, 0.0, -1.0, 1.0, a1, a2]
            })
            .collect::<Vec<_>>();

        // unit gain at the geometric centre frequency
        let w_center = 2.0 * (w0_sq.sqrt() / k).atan();
        let z = Complex64::from_polar(1.0, w_center);
        let gain = response(&sos, z).norm();
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::FilterDesign("degenerate passband gain".into()));
        }
        for c in &mut sos[0][..3] {
            *c /= gain;
        }
        Ok(Butterworth { sos, order })
    }

    pub fn sections(&self) -> &[[f64; 6]] {
        &self.sos
    }

    /// Magnitude response at frequency `f` for sampling rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f / fs);
        response(&self.sos, z).norm()
    }

    /// Edge padding length: three times the realised digital order.
    pub fn padlen(&self) -> usize {
        3 * 2 * self.order
    }

    /// Causal filtering from a given initial state (one `[z1, z2]` per section).
    fn filter_with_state(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sos.iter().zip(state.iter_mut()) {
            let [b0, b1, b2, _, a1, a2] = *s;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z[0];
                z[0] = b1 * xin - a1 * y + z[1];
                z[1] = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Steady-state section states for a unit step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sos
            .iter()
            .map(|s| {
                let [b0, b1, b2, _, a1, a2] = *s;
                let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
                let z = [scale * (dc - b0), scale * (b2 - a2 * dc)];
                scale *= dc;
                z
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.padlen().min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |z: &[[f64; 2]], v: f64| z.iter().map(|s| [s[0] * v, s[1] * v]).collect();

        let first = ext[0];
        self.filter_with_state(&mut ext, scaled(&zi, first));
        ext.reverse();
        let first = ext[0];
        self.filter_with_state(&mut ext, scaled(&zi, first));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn response(sos: &[[f64; 6]], z: Complex64) -> Complex64 {
    let zi = z.inv();
    sos.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
        let num = s[0] + zi * (s[1] + zi * s[2]);
        let den = s[3] + zi * (s[4] + zi * s[5]);
        acc * num / den
    })
}

/// Group poles into conjugate pairs; leftover real poles are paired in order.
fn pair_poles(poles: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    const TOL: f64 = 1e-10;
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > TOL).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= TOL).map(|p| p.re).collect();
    upper.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    let mut pairs: Vec<_> = upper.into_iter().map(|p| (p, p.conj())).collect();
    for chunk in real.chunks(2) {
        let a = Complex64::new(chunk[0], 0.0);
        let b = Complex64::new(*chunk.get(1).unwrap_or(&0.0), 0.0);
        pairs.push((a, b));
    }
    pairs
}

/// Zero-phase band-pass of every channel of every trial.
pub fn bandpass(trials: &TrialSet, cfg: &BandpassConfig) -> Result<TrialSet> {
    let filt = Butterworth::bandpass(cfg.order, cfg.band.0, cfg.band.1, trials.fs)?;
    let mut out = trials.clone();
    for mut trial in out.data.axis_iter_mut(Axis(0)) {
        for mut ch in trial.axis_iter_mut(Axis(0)) {
            let src: Vec<f64> = ch.iter().copied().collect();
            let y = filt.filtfilt(&src);
            ch.iter_mut().zip(y).for_each(|(d, v)| *d = v);
        }
    }
    Ok(out)
}
