use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::signal::{Butterworth, TrialSet};
use crate::{Error, Result};

/// Floor applied to projected variances before taking logs.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Filters per band: two for each class.
pub const FILTERS_PER_BAND: usize = 4;

/// `[lo, hi)` bands of width 4 Hz covering 4 to 40 Hz.
pub fn default_bands() -> Vec<(f64, f64)> {
    (0..9).map(|b| (4.0 + 4.0 * b as f64, 8.0 + 4.0 * b as f64)).collect()
}

/// Spatial filters of one band. `filters` are columns ordered by descending
/// eigenvalue: the two most class-0 dominant, then the two most class-1
/// dominant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspFilters {
    pub filters: Vec<Vec<f64>>,
    /// All generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl CspFilters {
    pub fn filter(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.filters[k])
    }

    /// Eigenvalues of the four kept filters.
    pub fn kept_eigenvalues(&self) -> [f64; 4] {
        let n = self.eigenvalues.len();
        [
            self.eigenvalues[0],
            self.eigenvalues[1],
            self.eigenvalues[n - 2],
            self.eigenvalues[n - 1],
        ]
    }
}

/// One set of filters per band, fitted on a fixed channel subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspModel {
    pub bands: Vec<(f64, f64)>,
    pub channels: Vec<usize>,
    pub per_band: Vec<CspFilters>,
}

fn shrink(c: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let d = c.nrows() as f64;
    let mu = c.trace() / d;
    c * (1.0 - gamma) + DMatrix::identity(c.nrows(), c.ncols()) * (gamma * mu)
}

/// Class-average of trace-normalised covariances.
pub fn class_mean_covariance<'a>(covs: impl IntoIterator<Item = &'a DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let mut acc: Option<DMatrix<f64>> = None;
    let mut n = 0usize;
    for c in covs {
        let tr = c.trace();
        let c = if tr > 0.0 { c / tr } else { c.clone() };
        acc = Some(match acc {
            Some(a) => a + c,
            None => c,
        });
        n += 1;
    }
    acc.map(|a| a / n as f64)
        .ok_or_else(|| Error::Features("a class has no trials".into()))
}

/// Solve `S0 w = lambda (S0 + S1) w` after shrinking each class covariance
/// towards a scaled identity by `gamma`. Filters are scaled so that
/// `w' (S0 + S1) w = 1` for the shrunk matrices.
pub fn csp_from_covariances(s0: &DMatrix<f64>, s1: &DMatrix<f64>, gamma: f64) -> Result<CspFilters> {
    let d = s0.nrows();
    if d < 2 {
        return Err(Error::Features(format!("CSP needs at least 2 channels, got {d}")));
    }
    if s0.shape() != s1.shape() || !s0.is_square() {
        return Err(Error::Features("class covariances differ in shape".into()));
    }
    let (s0, s1) = (shrink(s0, gamma), shrink(s1, gamma));
    let composite = &s0 + &s1;
    let eig = SymmetricEigen::new(composite);
    let floor = eig.eigenvalues.max() * 1e-12;
    if !(floor > 0.0) {
        return Err(Error::Features("composite covariance is zero".into()));
    }
    let inv_sqrt = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&v| 1.0 / v.max(floor).sqrt()));
    // whitening P = D^{-1/2} U'
    let p = DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let m = &p * &s0 * p.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let inner = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| inner.eigenvalues[b].total_cmp(&inner.eigenvalues[a]).then(a.cmp(&b)));
    let w = p.transpose() * &inner.eigenvectors;
    let pick = [order[0], order[1], order[d - 2], order[d - 1]];
    let filters = pick
        .iter()
        .map(|&k| {
            let mut col = w.column(k).into_owned();
            // sign convention: largest-magnitude weight positive
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col = -col;
            }
            col.iter().copied().collect()
        })
        .collect();
    Ok(CspFilters {
        filters,
        eigenvalues: order.iter().map(|&k| inner.eigenvalues[k]).collect(),
    })
}

/// `X X' / (n - 1)` of the mean-removed rows of `x` (channels x samples).
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        let m = row.mean();
        row.add_scalar_mut(-m);
    }
    let denom = (n.max(2) - 1) as f64;
    (&c * c.transpose()) / denom
}

/// Covariance of each trial's activation window after zero-phase filtering
/// into `band`.
pub fn band_covariances(trials: &TrialSet, band: (f64, f64), order: usize) -> Result<Vec<DMatrix<f64>>> {
    let filt = Butterworth::bandpass(order, band.0, band.1, trials.fs)?;
    let r = trials.activation_window.samples(trials.fs);
    let nc = trials.n_channels();
    (0..trials.n_trials())
        .map(|k| {
            let mut x = DMatrix::zeros(nc, r.len());
            for i in 0..nc {
                let y = filt.filtfilt(&trials.channel(k, i).to_vec());
                for (j, v) in y[r.clone()].iter().enumerate() {
                    x[(i, j)] = *v;
                }
            }
            Ok(covariance(&x))
        })
        .collect()
}

/// Band-filter `trials`, average normalised class covariances and solve for
/// the four CSP filters.
pub fn fit_csp(trials: &TrialSet, band: (f64, f64), order: usize, gamma: f64) -> Result<CspFilters> {
    if trials.n_channels() < 2 {
        return Err(Error::Features("CSP needs at least 2 channels".into()));
    }
    let covs = band_covariances(trials, band, order)?;
    let refs: Vec<&DMatrix<f64>> = covs.iter().collect();
    let (s0, s1) = class_covariances(&refs, &trials.labels, None)?;
    csp_from_covariances(&s0, &s1, gamma)
}

/// Per-class mean covariance, optionally restricted to a channel subset.
pub(crate) fn class_covariances(
    covs: &[&DMatrix<f64>],
    labels: &[u8],
    channels: Option<&[usize]>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sub = |c: &DMatrix<f64>| match channels {
        Some(ch) => DMatrix::from_fn(ch.len(), ch.len(), |i, j| c[(ch[i], ch[j])]),
        None => c.clone(),
    };
    let pick = |cls: u8| -> Vec<DMatrix<f64>> {
        covs.iter()
            .zip(labels)
            .filter(|(_, &l)| l == cls)
            .map(|(c, _)| sub(c))
            .collect()
    };
    let (c0, c1) = (pick(0), pick(1));
    if c0.is_empty() || c1.is_empty() {
        return Err(Error::Features("CSP needs trials of both classes".into()));
    }
    Ok((class_mean_covariance(&c0)?, class_mean_covariance(&c1)?))
}

/// `log(v_f / sum v)` over the four filters of one band, where
/// `v_f = w_f' C w_f`.
pub fn csp_log_variances(filters: &CspFilters, cov: &DMatrix<f64>) -> [f64; 4] {
    let mut v = [0.0; 4];
    for (k, out) in v.iter_mut().enumerate() {
        let w = filters.filter(k);
        *out = (w.transpose() * cov * &w)[(0, 0)].max(VARIANCE_FLOOR);
    }
    let total: f64 = v.iter().sum();
    v.map(|x| (x / total).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{testutil::trialset, TimeWindow};
    use ndarray::Array3;
    use rand_distr::{Distribution, StandardNormal};

    fn diag(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![a, b]))
    }

    #[test]
    fn default_band_grid() {
        let b = default_bands();
        assert_eq!(b.len(), 9);
        assert_eq!(b[0], (4.0, 8.0));
        assert_eq!(b[8], (36.0, 40.0));
    }

    #[test]
    fn variance_contrast_is_captured() {
        let s0 = diag(20.0, 1.0);
        let s1 = diag(1.0, 20.0);
        let f = csp_from_covariances(&s0, &s1, 0.0).unwrap();
        let ratio = |k: usize| {
            let w = f.filter(k);
            let v0 = (w.transpose() * &s0 * &w)[(0, 0)];
            let v1 = (w.transpose() * &s1 * &w)[(0, 0)];
            v0 / v1
        };
        assert!(ratio(0) > 10.0);
        assert!(ratio(3) < 0.1);
        for k in 0..4 {
            let w = f.filter(k);
            let n = (w.transpose() * (&s0 + &s1) * &w)[(0, 0)];
            assert!((n - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_are_complementary() {
        let mut rng = crate::rng_from_seed(1);
        let a = DMatrix::from_fn(5, 40, |_, _| StandardNormal.sample(&mut rng));
        let b = DMatrix::from_fn(5, 40, |_, _| StandardNormal.sample(&mut rng));
        let (s0, s1) = (covariance(&a), covariance(&b));
        let g = 1e-4;
        let f = csp_from_covariances(&s0, &s1, g).unwrap();
        let (t0, t1) = (shrink(&s0, g), shrink(&s1, g));
        for k in 0..4 {
            let w = f.filter(k);
            let l0 = (w.transpose() * &t0 * &w)[(0, 0)];
            let l1 = (w.transpose() * &t1 * &w)[(0, 0)];
            assert!((l0 + l1 - 1.0).abs() < 1e-8);
            assert!((0.0..=1.0).contains(&l0));
            assert!((l0 - f.kept_eigenvalues()[k]).abs() < 1e-8);
        }
        assert!(f.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identical_classes_give_half() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let f = csp_from_covariances(&s, &s, 1e-4).unwrap();
        assert!(f.eigenvalues.iter().all(|l| (l - 0.5).abs() < 0.05));
    }

    #[test]
    fn single_channel_is_an_error() {
        assert!(csp_from_covariances(&DMatrix::identity(1, 1), &DMatrix::identity(1, 1), 0.0).is_err());
    }

    #[test]
    fn log_variances_normalise() {
        let s0 = diag(3.0, 1.0);
        let s1 = diag(1.0, 2.0);
        let f = csp_from_covariances(&s0, &s1, 1e-4).unwrap();
        let lv = csp_log_variances(&f, &diag(2.0, 5.0));
        let total: f64 = lv.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_on_filtered_trials() {
        // class 0: 10 Hz on channel 0 strong; class 1: on channel 1
        let fs = 160.0;
        let mut rng = crate::rng_from_seed(2);
        let n = 640;
        let mut data = Array3::zeros((20, 2, n));
        let labels: Vec<u8> = (0..20).map(|k| (k % 2) as u8).collect();
        for k in 0..20 {
            let strong = labels[k] as usize;
            for i in 0..2 {
                let amp = if i == strong { 20f64.sqrt() } else { 1.0 };
                let phase: f64 = StandardNormal.sample(&mut rng);
                for t in 0..n {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    data[[k, i, t]] =
                        amp * (2.0 * std::f64::consts::PI * 10.0 * t as f64 / fs + phase).sin() + 0.1 * noise;
                }
            }
        }
        let mut t = trialset(data, fs, TimeWindow::new(0.0, 1.0), TimeWindow::new(1.0, 4.0));
        t.labels = labels;
        let f = fit_csp(&t, (8.0, 12.0), 4, 1e-4).unwrap();
        let [l0, _, _, l3] = f.kept_eigenvalues();
        assert!(l0 > 0.9 && l3 < 0.1, "{:?}", f.eigenvalues);
    }
}
