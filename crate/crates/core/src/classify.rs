//! Stratified splitting and a linear hinge-loss classifier tuned over a
//! regularisation grid by stratified cross-validation.

use ndarray::{Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::{mrmr_select, FeatureBank, FeatureConfig, FeatureMatrix};
use crate::objectives::ChannelMask;
use crate::signal::TrialSet;
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            stratified: true,
            seed: 0,
        }
    }
}

fn class_indices(labels: &[u8]) -> Result<[Vec<usize>; 2]> {
    let mut by = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 | 1 => by[l as usize].push(i),
            _ => return Err(Error::Trials(format!("label {l} at trial {i} is not 0 or 1"))),
        }
    }
    Ok(by)
}

/// `(train, test)` trial indices, each sorted ascending.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let by = class_indices(labels)?;
    if let Some(c) = (0..2).find(|&c| by[c].len() < 2) {
        return Err(Error::Trials(format!(
            "class {c} has {} trials; a split needs at least 2",
            by[c].len()
        )));
    }
    let mut rng = rng_from_seed(spec.seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if spec.stratified {
        for mut idx in by {
            idx.shuffle(&mut rng);
            let n_test = ((idx.len() as f64 * spec.test_fraction).round() as usize).clamp(1, idx.len() - 1);
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * spec.test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(trials: &TrialSet, spec: &SplitSpec) -> Result<(TrialSet, TrialSet)> {
    let (train, test) = split_indices(&trials.labels, spec)?;
    Ok((trials.subset_trials(&train), trials.subset_trials(&test)))
}

/// Test folds of a stratified k-fold partition; each class is shuffled and
/// dealt round-robin. `k` is reduced to the smaller class size when needed.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let by = class_indices(labels)?;
    let smallest = by[0].len().min(by[1].len());
    let k = k.min(smallest);
    if k < 2 {
        return Err(Error::Trials(format!(
            "cross-validation needs at least 2 trials per class, smallest class has {smallest}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut idx in by {
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - fold.len());
    let mut it = fold.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub c_grid: Vec<f64>,
    pub epochs: usize,
    /// Initial step size of the decaying schedule.
    pub eta0: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            epochs: 40,
            eta0: 0.5,
            folds: 5,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!(
                "C grid must be non-empty and positive, got {:?}",
                self.c_grid
            )));
        }
        if self.epochs == 0 || !(self.eta0 > 0.0) || self.folds < 2 {
            return Err(Error::Config(
                "epochs, eta0 must be positive and folds at least 2".into(),
            ));
        }
        Ok(())
    }

    /// The same settings with a single fixed regularisation value.
    pub fn with_grid(&self, c: f64) -> ClassifierConfig {
        ClassifierConfig {
            c_grid: vec![c],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl ClassifierModel {
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| self.weights[j] * (v - self.mean[j]) / self.std[j])
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }

    /// Class 1 when the decision value is positive.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<u8> {
        self.decision(x).iter().map(|&s| (s > 0.0) as u8).collect()
    }
}

fn check_labels(fm: &FeatureMatrix, labels: &[u8]) -> Result<()> {
    if fm.n_rows() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: fm.n_rows(),
            got: labels.len(),
        });
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Classifier(format!("label {l} is not 0 or 1")));
    }
    Ok(())
}

/// Averaged stochastic subgradient descent on the L2-regularised hinge loss
/// with `lambda = 1 / (C n)` and step `eta0 / (1 + lambda eta0 t)`. The bias
/// is not regularised.
fn fit_fixed(
    x: ArrayView2<'_, f64>,
    labels: &[u8],
    names: &[String],
    c: f64,
    cfg: &ClassifierConfig,
) -> ClassifierModel {
    let (n, d) = x.dim();
    let mean: Vec<f64> = x.mean_axis(Axis(0)).map_or(vec![0.0; d], |m| m.to_vec());
    let std: Vec<f64> = x
        .std_axis(Axis(0), 0.0)
        .iter()
        .map(|&s| if s > 1e-12 { s } else { 1.0 })
        .collect();
    let z = ndarray::Array2::from_shape_fn((n, d), |(i, j)| (x[[i, j]] - mean[j]) / std[j]);
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();

    let lambda = 1.0 / (c * n.max(1) as f64);
    let mut rng = rng_from_seed(cfg.seed);
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut w_avg, mut b_avg) = (vec![0.0; d], 0.0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = cfg.eta0 / (1.0 + lambda * cfg.eta0 * t as f64);
            let row = z.row(i);
            let margin = y[i] * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b);
            let shrink = 1.0 - eta * lambda;
            for wj in &mut w {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += eta * y[i] * xj;
                }
                b += eta * y[i];
            }
            t += 1;
            let a = 1.0 / t as f64;
            for (aj, wj) in w_avg.iter_mut().zip(&w) {
                *aj += (wj - *aj) * a;
            }
            b_avg += (b - b_avg) * a;
        }
    }
    ClassifierModel {
        names: names.to_vec(),
        mean,
        std,
        weights: w_avg,
        bias: b_avg,
        c,
    }
}

fn accuracy(pred: &[u8], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
}

/// Mean stratified k-fold accuracy of a fixed-C model; standardisation is
/// refitted inside each fold.
pub fn cv_accuracy(fm: &FeatureMatrix, labels: &[u8], c: f64, cfg: &ClassifierConfig) -> Result<f64> {
    check_labels(fm, labels)?;
    let folds = stratified_folds(labels, cfg.folds, cfg.seed)?;
    let mut total = 0.0;
    for fold in &folds {
        let train = complement(labels.len(), fold);
        let xt = fm.data.select(Axis(0), &train);
        let lt: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let m = fit_fixed(xt.view(), &lt, &fm.names, c, cfg);
        let xv = fm.data.select(Axis(0), fold);
        let lv: Vec<u8> = fold.iter().map(|&i| labels[i]).collect();
        total += accuracy(&m.predict(xv.view()), &lv);
    }
    Ok(total / folds.len() as f64)
}

/// Pick C by cross-validated accuracy (ties to the earlier grid entry), then
/// refit on all of `fm`.
pub fn train(fm: &FeatureMatrix, labels: &[u8], cfg: &ClassifierConfig) -> Result<ClassifierModel> {
    cfg.validate()?;
    check_labels(fm, labels)?;
    if fm.n_cols() == 0 {
        return Err(Error::Classifier("no feature columns".into()));
    }
    let c = if cfg.c_grid.len() == 1 {
        cfg.c_grid[0]
    } else {
        let mut best = (cfg.c_grid[0], f64::NEG_INFINITY);
        for &c in &cfg.c_grid {
            let acc = cv_accuracy(fm, labels, c, cfg)?;
            if acc > best.1 {
                best = (c, acc);
            }
        }
        best.0
    };
    Ok(fit_fixed(fm.data.view(), labels, &fm.names, c, cfg))
}

pub fn evaluate(model: &ClassifierModel, fm: &FeatureMatrix, labels: &[u8]) -> Result<f64> {
    check_labels(fm, labels)?;
    if fm.names != model.names {
        return Err(Error::Classifier(format!(
            "feature schema mismatch: model has {} columns, input {}",
            model.names.len(),
            fm.names.len()
        )));
    }
    Ok(accuracy(&model.predict(fm.data.view()), labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracy {
    /// All FBCSP and statistical features.
    pub acc_all: f64,
    /// The mRMR-selected features only.
    pub acc_sel: f64,
}

/// Fit features on `train` trials of `bank`, then score the classifier on
/// `test` trials with all features and with the mRMR top-k.
pub fn subset_accuracy_in(
    bank: &FeatureBank,
    train_idx: &[usize],
    test_idx: &[usize],
    mask: &ChannelMask,
    fcfg: &FeatureConfig,
    ccfg: &ClassifierConfig,
) -> Result<SubsetAccuracy> {
    let fitted = bank.fit(train_idx, &mask.indices())?;
    let (ftr, fte) = (bank.transform(&fitted, train_idx)?, bank.transform(&fitted, test_idx)?);
    let (ltr, lte) = (bank.labels_of(train_idx), bank.labels_of(test_idx));
    let model = train(&ftr, &ltr, ccfg)?;
    let acc_all = evaluate(&model, &fte, &lte)?;

    let acc_sel = selected_accuracy(&ftr, &ltr, &fte, &lte, fcfg, ccfg)?;
    Ok(SubsetAccuracy { acc_all, acc_sel })
}

/// mRMR on the training features, then train and test on those columns.
pub fn selected_accuracy(
    ftr: &FeatureMatrix,
    ltr: &[u8],
    fte: &FeatureMatrix,
    lte: &[u8],
    fcfg: &FeatureConfig,
    ccfg: &ClassifierConfig,
) -> Result<f64> {
    let k = fcfg.mrmr_k.min(ftr.n_cols());
    let sel = mrmr_select(ftr.data.view(), ltr, k, fcfg.mi_bins)?;
    let (str_, ste) = (ftr.select_columns(&sel.selected), fte.select_columns(&sel.selected));
    let model = train(&str_, ltr, ccfg)?;
    evaluate(&model, &ste, lte)
}

/// Mean selected-feature accuracy over stratified folds of `trials`, at a
/// single regularisation value. Features and mRMR are refitted per fold.
pub fn cv_selected_accuracy(
    bank: &FeatureBank,
    folds: &[(Vec<usize>, Vec<usize>)],
    mask: &ChannelMask,
    fcfg: &FeatureConfig,
    ccfg: &ClassifierConfig,
) -> Result<f64> {
    let channels = mask.indices();
    let mut total = 0.0;
    for (tr, te) in folds {
        let fitted = bank.fit(tr, &channels)?;
        let (ftr, fte) = (bank.transform(&fitted, tr)?, bank.transform(&fitted, te)?);
        total += selected_accuracy(&ftr, &bank.labels_of(tr), &fte, &bank.labels_of(te), fcfg, ccfg)?;
    }
    Ok(total / folds.len().max(1) as f64)
}

/// `(train, validation)` trial index pairs of a stratified k-fold split of
/// the listed trials.
pub fn fold_pairs(trials: &[usize], labels: &[u8], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let local: Vec<u8> = trials.iter().map(|&t| labels[t]).collect();
    let folds = stratified_folds(&local, k, seed)?;
    Ok(folds
        .iter()
        .map(|f| {
            let tr = complement(trials.len(), f).into_iter().map(|i| trials[i]).collect();
            let te = f.iter().map(|&i| trials[i]).collect();
            (tr, te)
        })
        .collect())
}

/// End to end on a trial set: split, build features for the masked
/// channels, train and test.
pub fn subset_accuracy(
    trials: &TrialSet,
    mask: &ChannelMask,
    spec: &SplitSpec,
    fcfg: &FeatureConfig,
    ccfg: &ClassifierConfig,
) -> Result<SubsetAccuracy> {
    if mask.len() != trials.n_channels() {
        return Err(Error::LengthMismatch {
            expected: trials.n_channels(),
            got: mask.len(),
        });
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let (train_idx, test_idx) = split_indices(&trials.labels, spec)?;
    let bank = FeatureBank::build(&trials.subset_channels(&mask.indices()), fcfg)?;
    let local = ChannelMask::from_bits(vec![true; mask.count()]);
    subset_accuracy_in(&bank, &train_idx, &test_idx, &local, fcfg, ccfg)
}
