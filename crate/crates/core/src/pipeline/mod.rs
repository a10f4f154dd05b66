//! Run configuration, trial files, synthetic data, per-subject orchestration
//! and the output directory layout.
//!
//! A run writes, under its output directory:
//!
//! * `results.csv` with `subject,algorithm,acc_all,acc_sel,pr`
//! * `summary.csv` with one row per algorithm
//! * `runs/<subject>__<algorithm>.json`, the full [`RunResult`]
//! * `traces/<subject>__<algorithm>.csv`, the convergence trace
//! * `greedy/<subject>.csv`, the forward-selection steps
//! * `frequency_<algorithm>.csv` and `.svg`, chosen-channel counts
//! * `frontier.csv`, averaged candidate objectives per algorithm
//! * `config.json`, the effective configuration

mod synth;
mod trialfile;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use synth::{synth_mi_dataset, SynthConfig, DEFAULT_SIGNAL_CHANNELS};
pub use trialfile::{
    decode_trialfile, encode_trialfile, read_trialfile, verify_trialfile, write_trialfile, VerifyReport, Violation,
    MAGIC, VERSION,
};

use crate::analysis::{
    anova_oneway, averaged_frontier, choose_final_subset, results_to_csv, selection_frequency, summarize, Anova,
    CandidateResult, FrontierRow, ResultRow, RunResult, SummaryRow,
};
use crate::classify::{
    cv_selected_accuracy, fold_pairs, split_indices, subset_accuracy_in, ClassifierConfig, SplitSpec,
};
use crate::features::{FeatureBank, FeatureConfig};
use crate::greedy::{greedy_select, GreedyTrace, DEFAULT_MAX_CHANNELS};
use crate::montage::{relevance_vector, Montage, SpatialKernelConfig};
use crate::objectives::{channel_discriminability, ObjectiveContext};
use crate::optim::{
    run_moead, run_mopso, run_nsga2, select_candidates, Algorithm, ConvergenceTrace, MoeadConfig, MopsoConfig,
    Nsga2Config,
};
use crate::signal::{bandpass, baseline_correct, ittrd_matrix, BandpassConfig, TimeWindow, TrialSet, WelchConfig};
use crate::{par_map, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    pub baseline: TimeWindow,
    pub activation: TimeWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub max_channels: usize,
    /// Cross-validation folds inside the training split.
    pub folds: usize,
    /// Fixed regularisation value used while searching.
    pub c: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            max_channels: DEFAULT_MAX_CHANNELS,
            folds: 5,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Trial files; each file is one subject named by its stem.
    pub datasets: Vec<PathBuf>,
    /// Built-in montage name or montage CSV path.
    pub montage: String,
    pub algorithms: Vec<Algorithm>,
    /// Cardinality bound L on every optimizer mask.
    pub max_channels: usize,
    /// Candidate subsets evaluated per optimizer run.
    pub candidates: usize,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub bandpass: BandpassConfig,
    /// Subtract the per-channel training baseline mean.
    pub baseline_correct: bool,
    pub welch: WelchConfig,
    /// Overrides the windows stored in the trial files.
    pub windows: Option<Windows>,
    pub spatial: SpatialKernelConfig,
    /// Min-max scale both per-channel score vectors before optimizing.
    pub normalize_objectives: bool,
    pub split: SplitSpec,
    pub classifier: ClassifierConfig,
    pub features: FeatureConfig,
    pub nsga2: Nsga2Config,
    pub mopso: MopsoConfig,
    pub moead: MoeadConfig,
    pub greedy: GreedyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            montage: "physionet64".into(),
            algorithms: vec![Algorithm::Nsga2],
            max_channels: DEFAULT_MAX_CHANNELS,
            candidates: 10,
            seeds: vec![0],
            out: None,
            bandpass: BandpassConfig::default(),
            baseline_correct: true,
            welch: WelchConfig::default(),
            windows: None,
            spatial: SpatialKernelConfig::default(),
            normalize_objectives: false,
            split: SplitSpec::default(),
            classifier: ClassifierConfig::default(),
            features: FeatureConfig::default(),
            nsga2: Nsga2Config::default(),
            mopso: MopsoConfig::default(),
            moead: MoeadConfig::default(),
            greedy: GreedyConfig::default(),
        }
    }
}

impl RunConfig {
    /// Checks that need no input files.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty");
        }
        if self.max_channels == 0 {
            return bad("max_channels must be positive");
        }
        if self.candidates == 0 {
            return bad("candidates must be positive");
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad("split.test_fraction must lie in (0, 1)");
        }
        if self.greedy.folds < 2 || !(self.greedy.c > 0.0) {
            return bad("greedy needs at least 2 folds and a positive c");
        }
        if let Some(w) = self.windows {
            for tw in [w.baseline, w.activation] {
                if !(tw.start >= 0.0 && tw.end > tw.start) {
                    return bad("windows must have 0 <= start < end");
                }
            }
        }
        self.bandpass_check()?;
        self.spatial.validate()?;
        self.classifier.validate()?;
        self.features.validate()?;
        self.nsga2.validate()?;
        self.mopso.validate()?;
        self.moead.validate()?;
        let names: BTreeSet<String> = self.subject_stems()?.into_iter().collect();
        if names.len() != self.datasets.len() {
            return bad("dataset file stems must be unique");
        }
        Ok(())
    }

    fn bandpass_check(&self) -> Result<()> {
        let (lo, hi) = self.bandpass.band;
        if self.bandpass.order == 0 || !(lo > 0.0 && hi > lo) {
            return Err(Error::Config(format!(
                "bandpass band {:?} or order {} is invalid",
                self.bandpass.band, self.bandpass.order
            )));
        }
        Ok(())
    }

    fn subject_stems(&self) -> Result<Vec<String>> {
        self.datasets
            .iter()
            .map(|p| {
                p.file_stem()
                    .and_then(|s| s.to_str())
                    .map(str::to_string)
                    .ok_or_else(|| Error::Config(format!("dataset path {} has no file stem", p.display())))
            })
            .collect()
    }

    /// Subject id of a (dataset, seed) pair: the file stem, suffixed with
    /// `@seed` when several seeds are configured.
    pub fn subject_id(&self, stem: &str, seed: u64) -> String {
        if self.seeds.len() > 1 {
            format!("{stem}@{seed}")
        } else {
            stem.to_string()
        }
    }
}

/// Parse a TOML or JSON configuration, chosen by file extension.
pub fn parse_config(text: &str, json: bool) -> Result<RunConfig> {
    if json {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }
}

/// Load a configuration file. Relative dataset paths resolve against the
/// file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut cfg = parse_config(&text, json)?;
    if let Some(dir) = path.parent() {
        for d in &mut cfg.datasets {
            if d.is_relative() {
                *d = dir.join(&*d);
            }
        }
    }
    Ok(cfg)
}

/// One subject prepared under one seed: split, preprocessed, scored and
/// featurized.
#[derive(Debug, Clone)]
pub struct PreparedSubject {
    pub subject: String,
    pub seed: u64,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub montage: Montage,
    pub context: ObjectiveContext,
    pub bank: FeatureBank,
}

impl PreparedSubject {
    pub fn refs(&self) -> &[usize] {
        self.montage.refs()
    }

    pub fn n_channels(&self) -> usize {
        self.montage.len()
    }
}

/// Split, filter and baseline-correct `trials`, then build the objective
/// context from the training trials and the feature bank from all trials.
pub fn prepare_subject(cfg: &RunConfig, subject: &str, trials: &TrialSet, seed: u64) -> Result<PreparedSubject> {
    let wrap = |stage: &str| {
        let ctx = format!("{subject}: {stage}");
        move |e: Error| e.context(ctx)
    };
    let mut trials = trials.clone();
    if let Some(w) = cfg.windows {
        trials.baseline_window = w.baseline;
        trials.activation_window = w.activation;
        trials.validate().map_err(wrap("windows"))?;
    }
    let spec = SplitSpec {
        seed: cfg.split.seed.wrapping_add(seed),
        ..cfg.split
    };
    let (train_idx, test_idx) = split_indices(&trials.labels, &spec).map_err(wrap("split"))?;

    let mut filtered = bandpass(&trials, &cfg.bandpass).map_err(wrap("bandpass"))?;
    if cfg.baseline_correct {
        let mean = filtered.baseline_mean(&train_idx);
        filtered = baseline_correct(&filtered, &mean).map_err(wrap("baseline"))?;
    }

    let base = Montage::resolve(&cfg.montage).map_err(wrap("montage"))?;
    let montage = base.select(&filtered.channel_names).map_err(wrap("montage"))?;
    let sp = relevance_vector(&montage, &cfg.spatial).map_err(wrap("spatial relevance"))?;
    let ittrd = ittrd_matrix(&filtered.subset_trials(&train_idx), &cfg.welch).map_err(wrap("ittrd"))?;
    let disc = channel_discriminability(&ittrd);
    let l = cfg.max_channels.min(montage.len());
    let mut context = ObjectiveContext::new(sp, disc, l).map_err(wrap("objectives"))?;
    if cfg.normalize_objectives {
        context = context.normalized();
    }
    let bank = FeatureBank::build(&filtered, &cfg.features).map_err(wrap("features"))?;
    Ok(PreparedSubject {
        subject: subject.to_string(),
        seed,
        train_idx,
        test_idx,
        montage,
        context,
        bank,
    })
}

/// Everything one (subject, algorithm) job produces.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub result: RunResult,
    /// Channel names the masks index.
    pub channels: Vec<String>,
    pub trace: Option<ConvergenceTrace>,
    pub greedy: Option<GreedyTrace>,
}

fn evaluate_candidates(
    cfg: &RunConfig,
    prep: &PreparedSubject,
    candidates: Vec<(
        crate::objectives::ChannelMask,
        Option<crate::objectives::ObjectiveVector>,
    )>,
) -> Result<Vec<CandidateResult>> {
    par_map(&candidates, |(mask, obj)| {
        let acc = subset_accuracy_in(
            &prep.bank,
            &prep.train_idx,
            &prep.test_idx,
            mask,
            &cfg.features,
            &cfg.classifier,
        )?;
        Ok(CandidateResult {
            mask: mask.clone(),
            objectives: *obj,
            acc_all: acc.acc_all,
            acc_sel: acc.acc_sel,
        })
    })
    .into_iter()
    .collect()
}

/// Run one algorithm on a prepared subject: search, evaluate the candidate
/// subsets on the held-out trials and choose the final subset.
pub fn run_algorithm(cfg: &RunConfig, prep: &PreparedSubject, algorithm: Algorithm) -> Result<AlgorithmRun> {
    let job = format!("{}/{}", prep.subject, algorithm);
    log::info!("[{job}] start");
    let ctx = &prep.context;
    let (pool, trace, greedy) = match algorithm {
        Algorithm::Nsga2 => {
            let r = run_nsga2(ctx, &cfg.nsga2, prep.seed)?;
            (r.population, Some(r.trace), None)
        }
        Algorithm::Mopso => {
            let r = run_mopso(ctx, &cfg.mopso, prep.seed)?;
            (r.candidate_pool(), Some(r.trace), None)
        }
        Algorithm::Moead => {
            let r = run_moead(ctx, &cfg.moead, prep.seed)?;
            (r.solutions, Some(r.trace), None)
        }
        Algorithm::Greedy => {
            let labels = prep.bank.labels();
            let folds = fold_pairs(&prep.train_idx, labels, cfg.greedy.folds, prep.seed)?;
            let ccfg = cfg.classifier.with_grid(cfg.greedy.c);
            let eval =
                |m: &crate::objectives::ChannelMask| cv_selected_accuracy(&prep.bank, &folds, m, &cfg.features, &ccfg);
            let t = greedy_select(prep.n_channels(), &eval, cfg.greedy.max_channels)?;
            (Vec::new(), None, Some(t))
        }
    };
    let masks: Vec<_> = match &greedy {
        Some(t) => vec![(t.final_subset.clone(), None)],
        None => select_candidates(&pool, cfg.candidates)
            .into_iter()
            .map(|s| (s.mask, Some(s.obj)))
            .collect(),
    };
    let candidates = evaluate_candidates(cfg, prep, masks).map_err(|e| e.context(job.clone()))?;
    let scored: Vec<_> = candidates.iter().map(|c| (c.mask.clone(), c.acc_sel)).collect();
    let chosen = choose_final_subset(&scored, prep.refs())?;
    let result = RunResult {
        subject: prep.subject.clone(),
        algorithm,
        candidates,
        chosen,
    };
    log::info!(
        "[{job}] done: {} channels, acc_sel {:.3}",
        result.pr(),
        result.chosen().acc_sel
    );
    Ok(AlgorithmRun {
        result,
        channels: prep.montage.names(),
        trace,
        greedy,
    })
}

/// Prepare every (dataset, seed) pair and run every configured algorithm.
/// Results come back in dataset, seed, algorithm order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<AlgorithmRun>> {
    cfg.validate()?;
    let stems = cfg.subject_stems()?;
    let mut subjects = Vec::new();
    for (path, stem) in cfg.datasets.iter().zip(&stems) {
        let trials = read_trialfile(path)?;
        for &seed in &cfg.seeds {
            subjects.push((cfg.subject_id(stem, seed), trials.clone(), seed));
        }
    }
    let prepared: Vec<PreparedSubject> = par_map(&subjects, |(id, t, seed)| prepare_subject(cfg, id, t, *seed))
        .into_iter()
        .collect::<Result<_>>()?;
    let jobs: Vec<(&PreparedSubject, Algorithm)> = prepared
        .iter()
        .flat_map(|p| cfg.algorithms.iter().map(move |&a| (p, a)))
        .collect();
    par_map(&jobs, |(p, a)| run_algorithm(cfg, p, *a)).into_iter().collect()
}

fn write(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// `algorithm,k,f1,f2,n`
pub fn frontier_to_csv(rows: &[(Algorithm, FrontierRow)]) -> String {
    let mut s = String::from("algorithm,k,f1,f2,n\n");
    for (a, r) in rows {
        let _ = writeln!(s, "{a},{},{:.6},{:.6},{}", r.k, r.f1, r.f2, r.n);
    }
    s
}

/// Averaged candidate objectives per multi-objective algorithm.
pub fn frontier_rows(results: &[RunResult], rows: usize) -> Vec<(Algorithm, FrontierRow)> {
    Algorithm::ALL
        .iter()
        .filter(|a| a.is_multi_objective())
        .flat_map(|&a| {
            let per: Vec<Vec<_>> = results
                .iter()
                .filter(|r| r.algorithm == a)
                .map(|r| r.candidates.iter().filter_map(|c| c.objectives).collect())
                .collect();
            averaged_frontier(&per, rows).into_iter().map(move |r| (a, r))
        })
        .collect()
}

/// `algorithm,n_subjects,acc_all,acc_sel,pr`
pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("algorithm,n_subjects,acc_all,acc_sel,pr\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.3}",
            r.algorithm, r.n_subjects, r.acc_all, r.acc_sel, r.pr
        );
    }
    s
}

/// Write the output directory of a finished run.
pub fn write_outputs(cfg: &RunConfig, runs: &[AlgorithmRun], out: &Path) -> Result<()> {
    let results: Vec<RunResult> = runs.iter().map(|r| r.result.clone()).collect();
    let rows: Vec<ResultRow> = results.iter().map(ResultRow::from).collect();
    write(&out.join("results.csv"), results_to_csv(&rows))?;
    write(&out.join("summary.csv"), summary_to_csv(&summarize(&rows)))?;
    for run in runs {
        let r = &run.result;
        let stem = format!("{}__{}", r.subject, r.algorithm);
        write(&out.join("runs").join(format!("{stem}.json")), json(r))?;
        if let Some(t) = &run.trace {
            write(&out.join("traces").join(format!("{stem}.csv")), t.to_csv())?;
        }
        if let Some(g) = &run.greedy {
            write(&out.join("greedy").join(format!("{}.csv", r.subject)), g.to_csv())?;
        }
    }
    let montage = Montage::resolve(&cfg.montage)?;
    for &a in &cfg.algorithms {
        let mine: Vec<RunResult> = results.iter().filter(|r| r.algorithm == a).cloned().collect();
        let Some(first) = runs.iter().find(|r| r.result.algorithm == a) else {
            continue;
        };
        if runs
            .iter()
            .any(|r| r.result.algorithm == a && r.channels != first.channels)
        {
            return Err(Error::Montage(format!("{a} runs use different channel sets")));
        }
        let used = montage.select(&first.channels)?;
        let freq = selection_frequency(&mine, &used)?;
        write(&out.join(format!("frequency_{a}.csv")), freq.to_csv())?;
        write(&out.join(format!("frequency_{a}.svg")), freq.to_svg(&used))?;
    }
    write(
        &out.join("frontier.csv"),
        frontier_to_csv(&frontier_rows(&results, cfg.candidates)),
    )?;
    let mut shown = cfg.clone();
    shown.out = None;
    write(&out.join("config.json"), json(&shown))
}

/// Execute a run and write its outputs to `cfg.out`.
pub fn execute_run(cfg: &RunConfig) -> Result<Vec<AlgorithmRun>> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    let runs = run_all(cfg)?;
    write_outputs(cfg, &runs, &out)?;
    Ok(runs)
}

/// Read `runs/*.json` from a run directory, sorted by file name.
pub fn load_run_results(dir: &Path) -> Result<Vec<RunResult>> {
    let runs = dir.join("runs");
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs)
        .map_err(|e| Error::io(&runs, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Trials(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Which accuracy column an ANOVA compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AccAll,
    AccSel,
}

/// One-way ANOVA of per-subject accuracies grouped by algorithm, in
/// [`Algorithm::ALL`] order. Algorithms without rows are skipped.
pub fn anova_by_algorithm(rows: &[ResultRow], metric: Metric) -> Result<(Vec<Algorithm>, Anova)> {
    let mut algs = Vec::new();
    let mut groups = Vec::new();
    for a in Algorithm::ALL {
        let g: Vec<f64> = rows
            .iter()
            .filter(|r| r.algorithm == a)
            .map(|r| match metric {
                Metric::AccAll => r.acc_all,
                Metric::AccSel => r.acc_sel,
            })
            .collect();
        if !g.is_empty() {
            algs.push(a);
            groups.push(g);
        }
    }
    Ok((algs, anova_oneway(&groups)?))
}
