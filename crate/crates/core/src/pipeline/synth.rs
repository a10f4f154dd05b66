//! Two-class synthetic motor-imagery epochs with a known desynchronisation.
//!
//! Every channel carries pink background noise. Signal channels add a mu
//! rhythm whose amplitude drops by `sqrt(1 - erd_depth)` in the activation
//! window of trials of the class the channel is contralateral to: channels
//! left of the midline desynchronise for class 1 (right hand), channels
//! right of it for class 0, midline channels for both. The expected ITTRD of
//! an affected trial is about `-100 * erd_depth * snr / (1 + snr)`.

use std::f64::consts::PI;

use ndarray::Array3;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::montage::Montage;
use crate::signal::{welch_psd, TimeWindow, TrialSet, WelchConfig};
use crate::{rng_from_seed, Error, Result, Rng};

/// The sensorimotor references and their immediate neighbours.
pub const DEFAULT_SIGNAL_CHANNELS: [&str; 10] = ["FC3", "C5", "C3", "C1", "CP3", "FC4", "C2", "C4", "C6", "CP4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub trials_per_class: usize,
    pub montage: String,
    pub signal_channels: Vec<String>,
    /// Fraction of mu power removed during activation, in (0, 1).
    pub erd_depth: f64,
    /// Mu-rhythm power over background power within `band`.
    pub snr: f64,
    pub mu_hz: f64,
    /// Band the signal-to-noise ratio refers to.
    pub band: (f64, f64),
    /// Background standard deviation in microvolts.
    pub noise_uv: f64,
    /// Log-normal spread of the per-trial rhythm amplitude.
    pub amplitude_jitter: f64,
    pub fs: f64,
    pub duration: f64,
    pub baseline_window: TimeWindow,
    pub activation_window: TimeWindow,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            trials_per_class: 100,
            montage: "physionet64".into(),
            signal_channels: DEFAULT_SIGNAL_CHANNELS.iter().map(|s| s.to_string()).collect(),
            erd_depth: 0.5,
            snr: 10.0,
            mu_hz: 10.0,
            band: (8.0, 30.0),
            noise_uv: 10.0,
            amplitude_jitter: 0.2,
            fs: 160.0,
            duration: 4.0,
            baseline_window: TimeWindow::new(0.0, 1.5),
            activation_window: TimeWindow::new(1.5, 4.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.erd_depth > 0.0 && self.erd_depth < 1.0) {
            return bad(format!("erd_depth must lie in (0, 1), got {}", self.erd_depth));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return bad(format!("snr must be finite and >= 0, got {}", self.snr));
        }
        if self.trials_per_class == 0 {
            return bad("trials_per_class must be positive".into());
        }
        if !(self.fs > 0.0 && self.duration > 0.0 && self.noise_uv > 0.0) {
            return bad("fs, duration and noise_uv must be positive".into());
        }
        if !(self.mu_hz > 0.0 && self.mu_hz < self.fs / 2.0) {
            return bad(format!("mu_hz {} must lie below Nyquist", self.mu_hz));
        }
        if !(self.amplitude_jitter >= 0.0) {
            return bad("amplitude_jitter must be >= 0".into());
        }
        Ok(())
    }
}

/// Pink noise by Kellet's three-pole economy filter, after a burn-in.
struct Pink {
    b: [f64; 3],
}

impl Pink {
    fn new(rng: &mut Rng) -> Self {
        let mut p = Pink { b: [0.0; 3] };
        for _ in 0..512 {
            p.next(rng);
        }
        p
    }

    fn next(&mut self, rng: &mut Rng) -> f64 {
        let w: f64 = StandardNormal.sample(rng);
        self.b[0] = 0.99765 * self.b[0] + w * 0.0990460;
        self.b[1] = 0.96300 * self.b[1] + w * 0.2965164;
        self.b[2] = 0.57000 * self.b[2] + w * 1.0526913;
        self.b[0] + self.b[1] + self.b[2] + w * 0.1848
    }
}

/// Standard deviation of the raw pink generator and its power within
/// `band`, estimated once from a long run with a fixed seed.
fn pink_calibration(fs: f64, band: (f64, f64)) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(0x5eed_ca1b);
    let mut p = Pink::new(&mut rng);
    let x: Vec<f64> = (0..(fs * 600.0) as usize).map(|_| p.next(&mut rng)).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64).sqrt();
    let cfg = WelchConfig {
        segment_len: (fs * 2.0) as usize,
        band,
        ..WelchConfig::default()
    };
    let psd = welch_psd(&x, fs, &cfg)?;
    Ok((sd, psd.integrate(band.0, band.1)))
}

pub fn synth_mi_dataset(cfg: &SynthConfig) -> Result<TrialSet> {
    cfg.validate()?;
    let montage = Montage::resolve(&cfg.montage)?;
    let mut signal = Vec::with_capacity(cfg.signal_channels.len());
    for name in &cfg.signal_channels {
        let i = montage
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("signal channel {name:?} is not in montage {}", cfg.montage)))?;
        signal.push(i);
    }
    let (sd, band_power) = pink_calibration(cfg.fs, cfg.band)?;
    let gain = cfg.noise_uv / sd;
    // sinusoid power A^2/2 equals snr times the scaled background band power
    let amp = (2.0 * cfg.snr * band_power).sqrt() * gain;

    let ns = (cfg.duration * cfg.fs).round() as usize;
    let nc = montage.len();
    let nt = 2 * cfg.trials_per_class;
    let act = cfg.activation_window.samples(cfg.fs);
    let labels: Vec<u8> = (0..nt).map(|k| (k % 2) as u8).collect();
    let x_of = |i: usize| montage.electrodes()[i].position[0];

    let mut rng = rng_from_seed(cfg.seed);
    let mut data = Array3::zeros((nt, nc, ns));
    for k in 0..nt {
        for i in 0..nc {
            let mut pink = Pink::new(&mut rng);
            for t in 0..ns {
                data[[k, i, t]] = gain * pink.next(&mut rng);
            }
        }
        for &i in &signal {
            let x = x_of(i);
            let erd = match labels[k] {
                1 => x <= 1e-9,
                _ => x >= -1e-9,
            };
            let phase = rng.random::<f64>() * 2.0 * PI;
            let z: f64 = StandardNormal.sample(&mut rng);
            let jitter = (cfg.amplitude_jitter * z).exp();
            let attenuated = (1.0 - cfg.erd_depth).sqrt();
            for t in 0..ns {
                let scale = if erd && act.contains(&t) { attenuated } else { 1.0 };
                let w = 2.0 * PI * cfg.mu_hz * t as f64 / cfg.fs + phase;
                data[[k, i, t]] += amp * jitter * scale * w.sin();
            }
        }
    }
    TrialSet::new(
        data,
        labels,
        cfg.fs,
        cfg.baseline_window,
        cfg.activation_window,
        montage.names(),
    )
}
