//! `chansel`: run channel-selection experiments and summarize their output.
//!
//! Exit codes: 0 on success, 1 on configuration or usage errors, 2 on data
//! errors (missing or malformed inputs, numerical failures, I/O).

mod overrides;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chansel::analysis::{parse_results_csv, summarize};
use chansel::optim::Algorithm;
use chansel::pipeline::{
    anova_by_algorithm, execute_run, frontier_rows, frontier_to_csv, load_config, load_run_results, summary_to_csv,
    synth_mi_dataset, verify_trialfile, write_trialfile, Metric, RunConfig, SynthConfig,
};
use chansel::{Error, ErrorKind, Result};

const WORKERS_ENV: &str = "CHANSEL_WORKERS";

#[derive(Parser)]
#[command(
    name = "chansel",
    version,
    about = "Multi-objective EEG channel selection for motor imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select channels for every dataset, seed and algorithm and write the
    /// results directory.
    Run(RunArgs),
    /// Write a synthetic two-class trial file.
    Synth(SynthArgs),
    /// Print the averaged candidate frontier of a results directory.
    Frontier(FrontierArgs),
    /// Print per-algorithm mean accuracies and channel counts.
    Report(ReportArgs),
    /// One-way ANOVA of per-subject accuracies across algorithms.
    Anova(AnovaArgs),
    /// Check trial files for header, payload and label problems.
    ConvertCheck(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trial file; repeat for several subjects. Replaces the configured list.
    #[arg(long = "dataset", value_name = "FILE")]
    datasets: Vec<PathBuf>,
    /// Replaces the configured algorithms.
    #[arg(long = "algorithm", value_name = "NAME")]
    algorithms: Vec<Algorithm>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    max_channels: Option<usize>,
    #[arg(long)]
    montage: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field override such as `nsga2.generations=200`, applied after the
    /// config file and before the flags above.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML or JSON generator configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials_per_class: Option<usize>,
    #[arg(long)]
    erd_depth: Option<f64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct FrontierArgs {
    /// Output directory of `chansel run`.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long, default_value_t = 10)]
    rows: usize,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnovaArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::AccSel)]
    metric: MetricArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MetricArg {
    AccAll,
    AccSel,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Print one JSON report per line.
    #[arg(long)]
    json: bool,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Trials(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Trials(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = overrides::apply(&cfg, &args.sets)?;
    if !args.datasets.is_empty() {
        cfg.datasets = args.datasets;
    }
    if !args.algorithms.is_empty() {
        cfg.algorithms = args.algorithms;
    }
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds;
    }
    if let Some(l) = args.max_channels {
        cfg.max_channels = l;
    }
    if let Some(m) = args.montage {
        cfg.montage = m;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let runs = execute_run(&cfg)?;
    log::info!(
        "wrote {} runs to {}",
        runs.len(),
        cfg.out.as_deref().unwrap_or(Path::new("?")).display()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("synth config: {e}")))?
            } else {
                toml::from_str(&text).map_err(|e| Error::Config(format!("synth config: {e}")))?
            }
        }
        None => SynthConfig::default(),
    };
    let mut cfg = overrides::apply(&cfg, &args.sets)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.trials_per_class {
        cfg.trials_per_class = n;
    }
    if let Some(d) = args.erd_depth {
        cfg.erd_depth = d;
    }
    if let Some(s) = args.snr {
        cfg.snr = s;
    }
    let trials = synth_mi_dataset(&cfg)?;
    write_trialfile(&trials, &args.out)
}

fn frontier(args: FrontierArgs) -> Result<()> {
    if args.rows == 0 {
        return Err(Error::Config("--rows must be positive".into()));
    }
    let results = load_run_results(&args.runs)?;
    emit(
        &frontier_to_csv(&frontier_rows(&results, args.rows)),
        args.out.as_deref(),
    )
}

fn report(args: ReportArgs) -> Result<()> {
    let rows = parse_results_csv(&read_text(&args.runs.join("results.csv"))?)?;
    emit(&summary_to_csv(&summarize(&rows)), args.out.as_deref())
}

fn anova(args: AnovaArgs) -> Result<()> {
    let rows = parse_results_csv(&read_text(&args.runs.join("results.csv"))?)?;
    let (metric, name) = match args.metric {
        MetricArg::AccAll => (Metric::AccAll, "acc_all"),
        MetricArg::AccSel => (Metric::AccSel, "acc_sel"),
    };
    let (algs, a) = anova_by_algorithm(&rows, metric)?;
    let groups: Vec<String> = algs.iter().map(|a| a.to_string()).collect();
    println!("metric,groups,f,p,df_between,df_within");
    println!(
        "{name},{},{:.6},{:.6e},{},{}",
        groups.join(";"),
        a.f,
        a.p,
        a.df_between,
        a.df_within
    );
    Ok(())
}

fn convert_check(args: CheckArgs) -> Result<()> {
    let mut failed = 0;
    for path in &args.files {
        let buf = fs::read(path).map_err(|e| Error::Trials(format!("{}: {e}", path.display())))?;
        let r = verify_trialfile(&buf);
        if args.json {
            let mut v = serde_json::to_value(&r).expect("plain data serializes");
            v["path"] = path.display().to_string().into();
            println!("{v}");
        } else {
            println!(
                "{}: {} trials x {} channels x {} samples at {} Hz, classes {}/{}",
                path.display(),
                r.n_trials,
                r.n_channels,
                r.n_samples,
                r.fs,
                r.class_counts[0],
                r.class_counts[1]
            );
            for v in &r.violations {
                println!("  error at byte {}: {}", v.offset, v.msg);
            }
            for w in &r.warnings {
                println!("  warning: {w}");
            }
        }
        failed += usize::from(!r.is_valid());
    }
    if failed > 0 {
        return Err(Error::Trials(format!(
            "{failed} of {} files failed the check",
            args.files.len()
        )));
    }
    Ok(())
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let result = init_workers().and_then(|()| match cli.command {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::Frontier(a) => frontier(a),
        Command::Report(a) => report(a),
        Command::Anova(a) => anova(a),
        Command::ConvertCheck(a) => convert_check(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
            })
        }
    }
}
