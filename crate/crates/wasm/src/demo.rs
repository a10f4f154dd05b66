//! Demo computations behind the wasm exports, kept free of JS types so they
//! can be tested natively.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use chansel::montage::{relevance_vector, Montage, SpatialKernelConfig};
use chansel::objectives::{channel_discriminability, ObjectiveContext, ObjectiveVector};
use chansel::optim::{
    run_moead, run_mopso, run_nsga2, select_candidates, Algorithm, ConvergenceTrace, MoeadConfig, MopsoConfig,
    Nsga2Config,
};
use chansel::pareto::hypervolume_2d;
use chansel::pipeline::{synth_mi_dataset, SynthConfig};
use chansel::signal::{ittrd, ittrd_matrix, welch_psd, TrialSet, WelchConfig};
use chansel::{Error, Result};

/// Synthetic recording shared by the Pareto and ITTRD demos.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOptions {
    pub seed: u64,
    pub trials_per_class: usize,
    pub erd_depth: f64,
    pub snr: f64,
    pub signal_channels: Option<Vec<String>>,
}

impl Default for DataOptions {
    fn default() -> Self {
        DataOptions {
            seed: 1,
            trials_per_class: 20,
            erd_depth: 0.5,
            snr: 10.0,
            signal_channels: None,
        }
    }
}

impl DataOptions {
    fn synth(&self) -> Result<TrialSet> {
        let mut cfg = SynthConfig {
            seed: self.seed,
            trials_per_class: self.trials_per_class,
            erd_depth: self.erd_depth,
            snr: self.snr,
            ..Default::default()
        };
        if let Some(s) = &self.signal_channels {
            cfg.signal_channels = s.clone();
        }
        synth_mi_dataset(&cfg)
    }
}

fn parse<T: serde::de::DeserializeOwned + Default>(options: &str) -> Result<T> {
    if options.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(options).map_err(|e| Error::Config(format!("options: {e}")))
}

fn layout(montage: &Montage) -> Vec<Value> {
    montage
        .electrodes()
        .iter()
        .zip(montage.projection_2d())
        .enumerate()
        .map(|(k, (e, [x, y]))| json!({ "name": e.name, "x": x, "y": y, "is_ref": montage.refs().contains(&k) }))
        .collect()
}

/// Spatial relevance of every electrode of a built-in montage, with 2-D
/// positions for a scalp map.
pub fn relevance_topomap(montage: &str, sigma: f64) -> Result<Value> {
    let m = Montage::builtin(montage)?;
    let sp = relevance_vector(&m, &SpatialKernelConfig { sigma })?;
    let mut electrodes = layout(&m);
    for (e, v) in electrodes.iter_mut().zip(&sp) {
        e["relevance"] = json!(v);
    }
    Ok(json!({
        "montage": montage,
        "sigma": sigma,
        "refs": m.refs().iter().map(|&k| &m.electrodes()[k].name).collect::<Vec<_>>(),
        "electrodes": electrodes,
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParetoOptions {
    #[serde(flatten)]
    pub data: DataOptions,
    pub algorithm: Algorithm,
    pub max_channels: usize,
    /// Generations for NSGA-II and MOEA/D, iterations for MOPSO.
    pub generations: usize,
    pub sigma: f64,
    pub normalize: bool,
    /// How many points are flagged as evaluated candidates.
    pub candidates: usize,
}

impl Default for ParetoOptions {
    fn default() -> Self {
        ParetoOptions {
            data: DataOptions::default(),
            algorithm: Algorithm::Nsga2,
            max_channels: 16,
            generations: 200,
            sigma: 1.0,
            normalize: false,
            candidates: 10,
        }
    }
}

/// Score a synthetic recording, run one optimizer and return every distinct
/// final solution with its rank, objectives and channel names.
pub fn pareto_explorer(options: &str) -> Result<Value> {
    let o: ParetoOptions = parse(options)?;
    let trials = o.data.synth()?;
    let montage = Montage::builtin("physionet64")?.select(&trials.channel_names)?;
    let sp = relevance_vector(&montage, &SpatialKernelConfig { sigma: o.sigma })?;
    let d = channel_discriminability(&ittrd_matrix(&trials, &WelchConfig::default())?);
    let mut ctx = ObjectiveContext::new(sp, d, o.max_channels)?;
    if o.normalize {
        ctx = ctx.normalized();
    }
    let seed = o.data.seed;
    let (pool, trace): (_, ConvergenceTrace) = match o.algorithm {
        Algorithm::Nsga2 => {
            let cfg = Nsga2Config {
                generations: o.generations,
                ..Default::default()
            };
            let r = run_nsga2(&ctx, &cfg, seed)?;
            (r.population, r.trace)
        }
        Algorithm::Mopso => {
            let cfg = MopsoConfig {
                iterations: o.generations,
                ..Default::default()
            };
            let r = run_mopso(&ctx, &cfg, seed)?;
            (r.candidate_pool(), r.trace)
        }
        Algorithm::Moead => {
            let cfg = MoeadConfig {
                generations: o.generations,
                ..Default::default()
            };
            let r = run_moead(&ctx, &cfg, seed)?;
            (r.solutions, r.trace)
        }
        Algorithm::Greedy => {
            return Err(Error::Config(
                "the greedy baseline needs a classifier and has no front".into(),
            ));
        }
    };
    let ranked = select_candidates(&pool, pool.len());
    let front: Vec<ObjectiveVector> = ranked.iter().filter(|s| s.rank == 0).map(|s| s.obj).collect();
    let names = montage.names();
    let points: Vec<Value> = ranked
        .iter()
        .enumerate()
        .map(|(i, s)| {
            json!({
                "f1": s.obj.f1,
                "f2": s.obj.f2,
                "rank": s.rank,
                "crowding": if s.crowding.is_finite() { json!(s.crowding) } else { Value::Null },
                "candidate": i < o.candidates,
                "channels": s.mask.indices().iter().map(|&k| &names[k]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut channels = layout(&montage);
    for (k, c) in channels.iter_mut().enumerate() {
        c["sp"] = json!(ctx.spatial()[k]);
        c["d"] = json!(ctx.discriminability()[k]);
    }
    Ok(json!({
        "algorithm": o.algorithm,
        "max_channels": o.max_channels,
        "channels": channels,
        "points": points,
        "hypervolume": hypervolume_2d(&front, ObjectiveVector::new(0.0, 0.0)),
        "trace": trace.rows,
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IttrdOptions {
    #[serde(flatten)]
    pub data: DataOptions,
    pub channel: String,
}

impl Default for IttrdOptions {
    fn default() -> Self {
        IttrdOptions {
            data: DataOptions::default(),
            channel: "C3".into(),
        }
    }
}

#[derive(Serialize)]
struct ClassSpectra {
    label: u8,
    baseline: Vec<f64>,
    activation: Vec<f64>,
    mean_ittrd: f64,
}

/// Baseline and activation spectra of one channel averaged per class, the
/// per-trial ITTRD values, and the class-wise column means of every channel.
pub fn ittrd_demo(options: &str) -> Result<Value> {
    let o: IttrdOptions = parse(options)?;
    let trials = o.data.synth()?;
    let ch = trials
        .channel_names
        .iter()
        .position(|n| n.eq_ignore_ascii_case(&o.channel))
        .ok_or_else(|| Error::Config(format!("no channel named {:?}", o.channel)))?;
    let welch = WelchConfig::default();
    let (b, a) = (
        trials.baseline_window.samples(trials.fs),
        trials.activation_window.samples(trials.fs),
    );
    // one segment length for both windows so the spectra share a grid
    let grid = WelchConfig {
        segment_len: welch.segment_len.min(b.len()).min(a.len()),
        ..welch
    };
    let per_trial: Vec<f64> = (0..trials.n_trials())
        .map(|k| {
            ittrd(
                trials.channel(k, ch),
                trials.fs,
                trials.baseline_window,
                trials.activation_window,
                &welch,
            )
        })
        .collect::<Result<_>>()?;

    let mut freqs = Vec::new();
    let mut classes = Vec::new();
    for label in [0u8, 1] {
        let idx: Vec<usize> = (0..trials.n_trials()).filter(|&k| trials.labels[k] == label).collect();
        let mut base: Vec<f64> = Vec::new();
        let mut act: Vec<f64> = Vec::new();
        for &k in &idx {
            let x = trials.channel(k, ch).to_vec();
            let pb = welch_psd(&x[b.clone()], trials.fs, &grid)?;
            let pa = welch_psd(&x[a.clone()], trials.fs, &grid)?;
            if base.is_empty() {
                freqs = pb.freqs.clone();
                base = vec![0.0; pb.density.len()];
                act = vec![0.0; pa.density.len()];
            }
            base.iter_mut()
                .zip(&pb.density)
                .for_each(|(s, v)| *s += v / idx.len() as f64);
            act.iter_mut()
                .zip(&pa.density)
                .for_each(|(s, v)| *s += v / idx.len() as f64);
        }
        let mean_ittrd = idx.iter().map(|&k| per_trial[k]).sum::<f64>() / idx.len().max(1) as f64;
        classes.push(ClassSpectra {
            label,
            baseline: base,
            activation: act,
            mean_ittrd,
        });
    }

    let m = ittrd_matrix(&trials, &welch)?;
    let montage = Montage::builtin("physionet64")?.select(&trials.channel_names)?;
    let mut channels = layout(&montage);
    for (i, c) in channels.iter_mut().enumerate() {
        for label in [0u8, 1] {
            let vals: Vec<f64> = (0..trials.n_trials())
                .filter(|&k| trials.labels[k] == label)
                .filter_map(|k| m[(k, i)])
                .collect();
            c[format!("mean_ittrd_class{label}")] = json!(vals.iter().sum::<f64>() / vals.len().max(1) as f64);
        }
    }
    Ok(json!({
        "channel": trials.channel_names[ch],
        "band": welch.band,
        "freqs": freqs,
        "classes": classes,
        "trials": per_trial.iter().zip(&trials.labels).map(|(v, l)| json!({ "label": l, "ittrd": v })).collect::<Vec<_>>(),
        "channels": channels,
    }))
}
