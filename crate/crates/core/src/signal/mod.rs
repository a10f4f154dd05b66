//! Trial containers, preprocessing, Welch spectra and ITTRD.

mod filter;
mod ittrd;
mod welch;

use std::ops::Range;

use ndarray::{Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use filter::{bandpass, BandpassConfig, Butterworth};
pub use ittrd::{ittrd, ittrd_matrix, IttrdMatrix, BASELINE_POWER_FLOOR};
pub use welch::{welch_psd, PowerSpectrum, WelchConfig, Window};

/// Time window in seconds relative to trial start, half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub const fn new(start: f64, end: f64) -> Self {
        TimeWindow { start, end }
    }

    /// Sample index range at sampling rate `fs`.
    pub fn samples(&self, fs: f64) -> Range<usize> {
        let a = (self.start * fs).round().max(0.0) as usize;
        let b = (self.end * fs).round().max(0.0) as usize;
        a..b.max(a)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Epoched EEG: `data[[trial, channel, sample]]` in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub data: Array3<f64>,
    pub labels: Vec<u8>,
    pub fs: f64,
    pub baseline_window: TimeWindow,
    pub activation_window: TimeWindow,
    pub channel_names: Vec<String>,
}

impl TrialSet {
    pub fn new(
        data: Array3<f64>,
        labels: Vec<u8>,
        fs: f64,
        baseline_window: TimeWindow,
        activation_window: TimeWindow,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let set = TrialSet {
            data,
            labels,
            fs,
            baseline_window,
            activation_window,
            channel_names,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let (nt, nc, ns) = self.data.dim();
        if self.labels.len() != nt {
            return Err(Error::Trials(format!("{} labels for {nt} trials", self.labels.len())));
        }
        if self.channel_names.len() != nc {
            return Err(Error::Trials(format!(
                "{} channel names for {nc} channels",
                self.channel_names.len()
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l > 1) {
            return Err(Error::Trials(format!("label {bad} outside {{0,1}}")));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::Trials(format!("sampling rate {} is not positive", self.fs)));
        }
        let span = ns as f64 / self.fs;
        let tol = 0.5 / self.fs;
        for (what, w) in [
            ("baseline", self.baseline_window),
            ("activation", self.activation_window),
        ] {
            if !(w.start >= -tol && w.end <= span + tol && w.start < w.end) {
                return Err(Error::Trials(format!(
                    "{what} window [{}, {}) s outside trial span [0, {span}) s",
                    w.start, w.end
                )));
            }
        }
        if self.baseline_window.end > self.activation_window.start + tol {
            return Err(Error::Trials("baseline window must precede activation".into()));
        }
        Ok(())
    }

    pub fn n_trials(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().2
    }

    /// One channel of one trial.
    pub fn channel(&self, trial: usize, channel: usize) -> ArrayView1<'_, f64> {
        self.data.index_axis(Axis(0), trial).index_axis_move(Axis(0), channel)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// New set holding the given trials, in the given order.
    pub fn subset_trials(&self, idx: &[usize]) -> TrialSet {
        TrialSet {
            data: self.data.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            fs: self.fs,
            baseline_window: self.baseline_window,
            activation_window: self.activation_window,
            channel_names: self.channel_names.clone(),
        }
    }

    pub fn subset_channels(&self, idx: &[usize]) -> TrialSet {
        TrialSet {
            data: self.data.select(Axis(1), idx),
            labels: self.labels.clone(),
            fs: self.fs,
            baseline_window: self.baseline_window,
            activation_window: self.activation_window,
            channel_names: idx.iter().map(|&i| self.channel_names[i].clone()).collect(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<TrialSet> {
        self.labels = labels;
        self.validate()?;
        Ok(self)
    }

    /// Per-channel mean over the baseline windows of the given trials.
    pub fn baseline_mean(&self, trials: &[usize]) -> Vec<f64> {
        let r = self.baseline_window.samples(self.fs);
        let r = r.start.min(self.n_samples())..r.end.min(self.n_samples());
        let mut sums = vec![0.0; self.n_channels()];
        let mut count = 0usize;
        for &t in trials {
            for (c, s) in sums.iter_mut().enumerate() {
                *s += self.channel(t, c).slice(ndarray::s![r.clone()]).sum();
            }
            count += r.len();
        }
        if count > 0 {
            sums.iter_mut().for_each(|s| *s /= count as f64);
        }
        sums
    }
}

/// Subtract `reference_mean[c]` from every sample of channel `c`.
pub fn baseline_correct(trials: &TrialSet, reference_mean: &[f64]) -> Result<TrialSet> {
    if reference_mean.len() != trials.n_channels() {
        return Err(Error::LengthMismatch {
            expected: trials.n_channels(),
            got: reference_mean.len(),
        });
    }
    let mut out = trials.clone();
    for mut trial in out.data.outer_iter_mut() {
        for (mut ch, &m) in trial.outer_iter_mut().zip(reference_mean) {
            ch.mapv_inplace(|v| v - m);
        }
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::testutil::trialset;
    use super::*;
    use rand::Rng as _;

    #[test]
    fn window_sample_ranges() {
        assert_eq!(TimeWindow::new(0.0, 0.5).samples(160.0), 0..80);
        assert_eq!(TimeWindow::new(0.5, 4.5).samples(160.0), 80..720);
    }

    #[test]
    fn validation_rejects_bad_windows_and_labels() {
        let data = Array3::zeros((2, 1, 100));
        let names = vec!["a".to_string()];
        let ok = |b, a| TrialSet::new(data.clone(), vec![0, 1], 100.0, b, a, names.clone());
        assert!(ok(TimeWindow::new(0.0, 0.5), TimeWindow::new(0.5, 1.0)).is_ok());
        assert!(ok(TimeWindow::new(0.0, 0.5), TimeWindow::new(0.5, 1.5)).is_err());
        assert!(ok(TimeWindow::new(0.0, 0.6), TimeWindow::new(0.5, 1.0)).is_err());
        assert!(TrialSet::new(
            data.clone(),
            vec![0, 2],
            100.0,
            TimeWindow::new(0.0, 0.5),
            TimeWindow::new(0.5, 1.0),
            names.clone()
        )
        .is_err());
    }

    #[test]
    fn baseline_correct_identity_and_constant() {
        let mut data = Array3::zeros((2, 2, 50));
        data.index_axis_mut(Axis(1), 1).fill(5.0);
        let t = trialset(data, 50.0, TimeWindow::new(0.0, 0.4), TimeWindow::new(0.4, 1.0));
        assert_eq!(baseline_correct(&t, &[0.0, 0.0]).unwrap(), t);
        let c = baseline_correct(&t, &[0.0, 5.0]).unwrap();
        assert!(c.data.iter().all(|&v| v == 0.0));
        assert!(matches!(
            baseline_correct(&t, &[0.0]),
            Err(Error::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn baseline_correct_shifts_means_exactly() {
        let mut rng = crate::rng_from_seed(3);
        let data = Array3::from_shape_fn((4, 3, 64), |_| rng.random_range(-10.0..10.0));
        let t = trialset(data, 64.0, TimeWindow::new(0.0, 0.25), TimeWindow::new(0.25, 1.0));
        let reference = [1.5, -2.0, 0.25];
        let c = baseline_correct(&t, &reference).unwrap();
        for k in 0..4 {
            for (i, r) in reference.iter().enumerate() {
                let before = t.channel(k, i).mean().unwrap();
                let after = c.channel(k, i).mean().unwrap();
                assert!((after - (before - r)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn baseline_mean_uses_only_baseline_samples() {
        let mut data = Array3::zeros((2, 1, 10));
        for k in 0..2 {
            for s in 0..10 {
                data[[k, 0, s]] = if s < 4 { 2.0 } else { 100.0 };
            }
        }
        let t = trialset(data, 10.0, TimeWindow::new(0.0, 0.4), TimeWindow::new(0.4, 1.0));
        assert_eq!(t.baseline_mean(&[0, 1]), vec![2.0]);
    }
}
