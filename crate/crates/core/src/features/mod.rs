//! Filter-bank CSP, statistical descriptors and mRMR selection.
//!
//! A [`FeatureBank`] holds everything a channel subset needs, computed once
//! per trial over all channels: the band-filtered activation-window
//! covariances for each filter-bank band and the 19 statistical descriptors
//! of every channel. Fitting CSP for a subset then only needs sub-matrices,
//! which keeps evaluating many candidate subsets cheap.

mod csp;
mod mrmr;
mod stats;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::signal::TrialSet;
use crate::{Error, Result};

pub use csp::{
    band_covariances, class_mean_covariance, covariance, csp_from_covariances, csp_log_variances, default_bands,
    fit_csp, CspFilters, CspModel, FILTERS_PER_BAND, VARIANCE_FLOOR,
};
pub use mrmr::{discretize, mrmr_select, mutual_information, MrmrSelection};
pub use stats::{signal_stats, StatConfig, N_STATS, STAT_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub bands: Vec<(f64, f64)>,
    /// Butterworth order of each filter-bank band.
    pub band_order: usize,
    /// Covariance shrinkage towards a scaled identity.
    pub shrinkage: f64,
    pub stats: StatConfig,
    pub mrmr_k: usize,
    pub mi_bins: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bands: default_bands(),
            band_order: 4,
            shrinkage: 1e-4,
            stats: StatConfig::default(),
            mrmr_k: 10,
            mi_bins: 10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() || self.bands.iter().any(|&(lo, hi)| !(lo > 0.0 && hi > lo)) {
            return Err(Error::Config(format!("invalid filter-bank bands {:?}", self.bands)));
        }
        if self.band_order == 0 {
            return Err(Error::Config("band_order must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.shrinkage) {
            return Err(Error::Config(format!(
                "shrinkage must lie in [0, 1), got {}",
                self.shrinkage
            )));
        }
        if self.mrmr_k == 0 || self.mi_bins < 2 {
            return Err(Error::Config("mrmr_k must be positive and mi_bins at least 2".into()));
        }
        Ok(())
    }
}

/// Trials by named feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, data: Array2<f64>) -> Result<Self> {
        if names.len() != data.ncols() {
            return Err(Error::LengthMismatch {
                expected: data.ncols(),
                got: names.len(),
            });
        }
        if let Some((i, _)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Features(format!(
                "non-finite value in feature {:?}",
                names[i % names.len().max(1)]
            )));
        }
        Ok(FeatureMatrix { names, data })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            data: self.data.select(Axis(1), cols),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            data: self.data.select(Axis(0), rows),
        }
    }

    /// Header of feature names, then one row per trial.
    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for row in self.data.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Feature extractor fitted on a channel subset of some training trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub channels: Vec<usize>,
    /// `None` for a single channel, whose spectral block is the nine
    /// relative log band powers instead of CSP outputs.
    pub csp: Option<CspModel>,
    pub names: Vec<String>,
}

/// Per-trial covariances and descriptors over the full montage.
#[derive(Debug, Clone)]
pub struct FeatureBank {
    bands: Vec<(f64, f64)>,
    shrinkage: f64,
    /// `[band][trial]`
    covs: Vec<Vec<DMatrix<f64>>>,
    /// `[trial, channel, stat]`
    stats: Array3<f64>,
    labels: Vec<u8>,
    channel_names: Vec<String>,
}

impl FeatureBank {
    pub fn build(trials: &TrialSet, cfg: &FeatureConfig) -> Result<FeatureBank> {
        cfg.validate()?;
        let covs = cfg
            .bands
            .iter()
            .map(|&b| band_covariances(trials, b, cfg.band_order))
            .collect::<Result<Vec<_>>>()?;
        let r = trials.activation_window.samples(trials.fs);
        let (nt, nc) = (trials.n_trials(), trials.n_channels());
        let per_trial = |k: usize| -> Vec<[f64; N_STATS]> {
            (0..nc)
                .map(|i| {
                    let x = trials.channel(k, i);
                    let seg: Vec<f64> = x.slice(ndarray::s![r.clone()]).to_vec();
                    signal_stats(&seg, trials.fs, &cfg.stats)
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<Vec<[f64; N_STATS]>> = {
            use rayon::prelude::*;
            (0..nt).into_par_iter().map(per_trial).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Vec<[f64; N_STATS]>> = (0..nt).map(per_trial).collect();
        let stats = Array3::from_shape_fn((nt, nc, N_STATS), |(k, i, s)| rows[k][i][s]);
        Ok(FeatureBank {
            bands: cfg.bands.clone(),
            shrinkage: cfg.shrinkage,
            covs,
            stats,
            labels: trials.labels.clone(),
            channel_names: trials.channel_names.clone(),
        })
    }

    pub fn n_trials(&self) -> usize {
        self.labels.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_of(&self, trials: &[usize]) -> Vec<u8> {
        trials.iter().map(|&k| self.labels[k]).collect()
    }

    /// Fit CSP for `channels` on the listed training trials.
    pub fn fit(&self, trials: &[usize], channels: &[usize]) -> Result<FittedFeatures> {
        if channels.is_empty() {
            return Err(Error::EmptyMask);
        }
        if let Some(&c) = channels.iter().find(|&&c| c >= self.n_channels()) {
            return Err(Error::ChannelOutOfRange {
                index: c,
                len: self.n_channels(),
            });
        }
        let mut names = Vec::new();
        let csp = if channels.len() >= 2 {
            let labels = self.labels_of(trials);
            let per_band = self
                .covs
                .iter()
                .map(|band| {
                    let covs: Vec<&DMatrix<f64>> = trials.iter().map(|&k| &band[k]).collect();
                    let (s0, s1) = csp::class_covariances(&covs, &labels, Some(channels))?;
                    csp_from_covariances(&s0, &s1, self.shrinkage)
                })
                .collect::<Result<Vec<_>>>()?;
            for b in 0..self.bands.len() {
                for f in 0..FILTERS_PER_BAND {
                    names.push(format!("csp_b{b}_f{f}"));
                }
            }
            Some(CspModel {
                bands: self.bands.clone(),
                channels: channels.to_vec(),
                per_band,
            })
        } else {
            for b in 0..self.bands.len() {
                names.push(format!("logbp_b{b}"));
            }
            None
        };
        for &c in channels {
            for s in STAT_NAMES {
                names.push(format!("{}_{s}", self.channel_names[c]));
            }
        }
        Ok(FittedFeatures {
            channels: channels.to_vec(),
            csp,
            names,
        })
    }

    /// Feature rows of the listed trials under a fitted extractor.
    pub fn transform(&self, fitted: &FittedFeatures, trials: &[usize]) -> Result<FeatureMatrix> {
        let ch = &fitted.channels;
        let mut data = Array2::zeros((trials.len(), fitted.names.len()));
        for (row, &k) in trials.iter().enumerate() {
            let mut col = 0;
            match &fitted.csp {
                Some(model) => {
                    for (b, filters) in model.per_band.iter().enumerate() {
                        let full = &self.covs[b][k];
                        let cov = DMatrix::from_fn(ch.len(), ch.len(), |i, j| full[(ch[i], ch[j])]);
                        for v in csp_log_variances(filters, &cov) {
                            data[[row, col]] = v;
                            col += 1;
                        }
                    }
                }
                None => {
                    let p: Vec<f64> = self
                        .covs
                        .iter()
                        .map(|band| band[k][(ch[0], ch[0])].max(VARIANCE_FLOOR))
                        .collect();
                    let total: f64 = p.iter().sum();
                    for v in p {
                        data[[row, col]] = (v / total).ln();
                        col += 1;
                    }
                }
            }
            for &c in ch {
                for s in 0..N_STATS {
                    data[[row, col]] = self.stats[[k, c, s]];
                    col += 1;
                }
            }
        }
        FeatureMatrix::new(fitted.names.clone(), data)
    }
}

/// The 19 descriptors of each listed channel over the activation window.
pub fn stat_features(trials: &TrialSet, channels: &[usize], cfg: &StatConfig) -> Result<FeatureMatrix> {
    if trials.n_trials() == 0 {
        return Err(Error::Trials("no trials".into()));
    }
    let r = trials.activation_window.samples(trials.fs);
    let mut names = Vec::new();
    for &c in channels {
        if c >= trials.n_channels() {
            return Err(Error::ChannelOutOfRange {
                index: c,
                len: trials.n_channels(),
            });
        }
        names.extend(STAT_NAMES.iter().map(|s| format!("{}_{s}", trials.channel_names[c])));
    }
    let mut data = Array2::zeros((trials.n_trials(), names.len()));
    for k in 0..trials.n_trials() {
        for (j, &c) in channels.iter().enumerate() {
            let seg = trials.channel(k, c).slice(ndarray::s![r.clone()]).to_vec();
            let s = signal_stats(&seg, trials.fs, cfg);
            for (m, v) in s.iter().enumerate() {
                data[[k, j * N_STATS + m]] = *v;
            }
        }
    }
    FeatureMatrix::new(names, data)
}
