//! Intratrial task-related desynchronisation: per-trial percentage change of
//! band power between the activation and baseline windows.

use ndarray::{Array2, ArrayView1};

use super::{welch_psd, TimeWindow, TrialSet, WelchConfig};
use crate::{Error, Result};

/// Baseline band power (uV^2/Hz) below which a cell is treated as degenerate.
pub const BASELINE_POWER_FLOOR: f64 = 1e-12;

fn window_power(x: &[f64], fs: f64, window: TimeWindow, cfg: &WelchConfig) -> Result<f64> {
    let r = window.samples(fs);
    if r.end > x.len() {
        return Err(Error::Trials(format!(
            "window [{}, {}) s exceeds the {}-sample trial",
            window.start,
            window.end,
            x.len()
        )));
    }
    let seg = &x[r];
    let local = WelchConfig {
        segment_len: cfg.segment_len.min(seg.len()),
        ..*cfg
    };
    if local.segment_len < 8 {
        return Err(Error::TooShort {
            len: seg.len(),
            segment: 8,
        });
    }
    let psd = welch_psd(seg, fs, &local)?;
    psd.band_mean(cfg.band.0, cfg.band.1).ok_or_else(|| {
        Error::Config(format!(
            "no spectral bin within band {:?} Hz at {} Hz resolution",
            cfg.band,
            psd.resolution()
        ))
    })
}

/// `100 * (P_act - P_base) / P_base` for one channel of one trial. Negative
/// values indicate desynchronisation.
pub fn ittrd(
    x: ArrayView1<'_, f64>,
    fs: f64,
    baseline: TimeWindow,
    activation: TimeWindow,
    cfg: &WelchConfig,
) -> Result<f64> {
    let owned;
    let x = match x.as_slice() {
        Some(s) => s,
        None => {
            owned = x.to_vec();
            &owned
        }
    };
    let base = window_power(x, fs, baseline, cfg)?;
    if base < BASELINE_POWER_FLOOR {
        return Err(Error::DegenerateBaseline { power: base });
    }
    let act = window_power(x, fs, activation, cfg)?;
    Ok(100.0 * (act - base) / base)
}

/// `[trials x channels]` ITTRD values; `None` marks a degenerate baseline.
pub type IttrdMatrix = Array2<Option<f64>>;

pub fn ittrd_matrix(trials: &TrialSet, cfg: &WelchConfig) -> Result<IttrdMatrix> {
    cfg.validate(trials.fs)?;
    let (nt, nc) = (trials.n_trials(), trials.n_channels());
    let cell = |k: usize| -> Result<Vec<Option<f64>>> {
        (0..nc)
            .map(|i| {
                match ittrd(
                    trials.channel(k, i),
                    trials.fs,
                    trials.baseline_window,
                    trials.activation_window,
                    cfg,
                ) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::DegenerateBaseline { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<Option<f64>>> = {
        use rayon::prelude::*;
        (0..nt).into_par_iter().map(cell).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<Option<f64>>> = (0..nt).map(cell).collect::<Result<_>>()?;

    Ok(Array2::from_shape_fn((nt, nc), |(k, i)| rows[k][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::testutil::trialset;
    use ndarray::{Array1, Array3};
    use rand_distr::{Distribution, StandardNormal};

    const FS: f64 = 160.0;
    const BASE: TimeWindow = TimeWindow::new(0.0, 2.0);
    const ACT: TimeWindow = TimeWindow::new(2.0, 4.0);

    /// 4 s trial whose second half is the first half times `gain`.
    fn scaled_copy(gain: f64, seed: u64) -> Array1<f64> {
        let mut rng = crate::rng_from_seed(seed);
        let half: Vec<f64> = (0..320).map(|_| StandardNormal.sample(&mut rng)).collect();
        half.iter().copied().chain(half.iter().map(|v| v * gain)).collect()
    }

    #[test]
    fn equal_windows_give_zero() {
        let x = scaled_copy(1.0, 1);
        let v = ittrd(x.view(), FS, BASE, ACT, &WelchConfig::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn halved_and_doubled_power() {
        let cfg = WelchConfig::default();
        let down = scaled_copy(0.5f64.sqrt(), 2);
        let v = ittrd(down.view(), FS, BASE, ACT, &cfg).unwrap();
        assert!((v + 50.0).abs() <= 2.0, "{v}");
        let up = scaled_copy(2f64.sqrt(), 3);
        let v = ittrd(up.view(), FS, BASE, ACT, &cfg).unwrap();
        assert!((v - 100.0).abs() <= 4.0, "{v}");
    }

    #[test]
    fn degenerate_baseline_is_flagged() {
        let mut x = scaled_copy(1.0, 4);
        x.slice_mut(ndarray::s![..320]).fill(0.0);
        let err = ittrd(x.view(), FS, BASE, ACT, &WelchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateBaseline { .. }));
    }

    #[test]
    fn matrix_shape_and_consistency() {
        let mut data = Array3::zeros((1, 1, 640));
        data.slice_mut(ndarray::s![0, 0, ..]).assign(&scaled_copy(0.8, 5));
        let t = trialset(data, FS, BASE, ACT);
        let cfg = WelchConfig::default();
        let m = ittrd_matrix(&t, &cfg).unwrap();
        assert_eq!(m.dim(), (1, 1));
        let direct = ittrd(t.channel(0, 0), FS, BASE, ACT, &cfg).unwrap();
        assert_eq!(m[[0, 0]], Some(direct));
    }

    #[test]
    fn matrix_zero_when_windows_match() {
        let mut data = Array3::zeros((3, 2, 640));
        for k in 0..3 {
            for i in 0..2 {
                data.slice_mut(ndarray::s![k, i, ..])
                    .assign(&scaled_copy(1.0, (10 * k + i) as u64));
            }
        }
        let t = trialset(data, FS, BASE, ACT);
        let m = ittrd_matrix(&t, &WelchConfig::default()).unwrap();
        assert!(m.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn degenerate_cells_become_none() {
        let mut data = Array3::zeros((2, 2, 640));
        data.slice_mut(ndarray::s![0, 0, ..]).assign(&scaled_copy(0.5, 6));
        data.slice_mut(ndarray::s![1, 0, ..]).assign(&scaled_copy(0.5, 7));
        data.slice_mut(ndarray::s![1, 1, ..]).assign(&scaled_copy(0.5, 8));
        let t = trialset(data, FS, BASE, ACT);
        let m = ittrd_matrix(&t, &WelchConfig::default()).unwrap();
        assert!(m[[0, 1]].is_none());
        assert!(m[[0, 0]].is_some() && m[[1, 1]].is_some());
    }
}
