use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chansel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chansel"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("CHANSEL_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(path: &Path, seed: &str, per_class: &str) {
    let o = chansel(&[
        "synth",
        "--seed",
        seed,
        "--trials-per-class",
        per_class,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.eegt"), tmp.path().join("b.eegt"));
    synth(&a, "1", "10");
    synth(&b, "1", "10");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = tmp.path().join("c.eegt");
    synth(&c, "2", "10");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn run_on_missing_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = chansel(&[
        "run",
        "--dataset",
        "/nonexistent/s1.eegt",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("s1.eegt"));
}

#[test]
fn configuration_problems_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "max_channels = 4\nbogus = true\n").unwrap();
    assert_eq!(
        code(&chansel(&["run", "--config", cfg.to_str().unwrap(), "--out", "x"])),
        1
    );
    assert_eq!(
        code(&chansel(&["run", "--set", "nsga2.generationz=3", "--out", "x"])),
        1
    );
    assert_eq!(
        code(&chansel(&["run", "--dataset", "a.eegt"])),
        1,
        "no output directory"
    );
    assert_eq!(code(&chansel(&["synth", "--erd-depth", "1.5", "--out", "x.eegt"])), 1);
    assert_eq!(code(&chansel(&["frobnicate"])), 1);
    assert_eq!(code(&chansel(&["--help"])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_chansel"))
        .args(["report", "--runs", "."])
        .env("CHANSEL_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn convert_check_flags_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.eegt");
    synth(&good, "4", "5");
    let o = chansel(&["convert-check", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("10 trials x 64 channels"));

    let bytes = fs::read(&good).unwrap();
    let bad = tmp.path().join("bad.eegt");
    fs::write(&bad, &bytes[..bytes.len() - 1]).unwrap();
    let o = chansel(&["convert-check", "--json", good.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let reports: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(reports[0]["violations"].as_array().unwrap().len(), 0);
    let v = &reports[1]["violations"][0];
    assert_eq!(v["offset"].as_u64().unwrap() as usize, bytes.len() - 4 * 10 * 64 * 640);
    assert!(v["msg"].as_str().unwrap().contains("payload length"));
}

#[test]
fn run_then_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    let (s1, s2) = (tmp.path().join("s1.eegt"), tmp.path().join("s2.eegt"));
    synth(&s1, "1", "20");
    synth(&s2, "2", "20");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "datasets = [\"s1.eegt\", \"s2.eegt\"]\nalgorithms = [\"nsga2\", \"mopso\", \"moead\", \"greedy\"]\n\n[greedy]\nmax_channels = 2\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let o = chansel(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "nsga2.generations=10",
        "--set",
        "moead.generations=10",
        "--set",
        "mopso.iterations=10",
        "--out",
        out_s,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("results.csv").exists());

    let o = chansel(&["report", "--runs", out_s]);
    assert_eq!(code(&o), 0);
    let report = stdout(&o);
    assert_eq!(report.lines().next(), Some("algorithm,n_subjects,acc_all,acc_sel,pr"));
    assert_eq!(report.lines().count(), 5);
    assert_eq!(report, fs::read_to_string(out.join("summary.csv")).unwrap());

    let o = chansel(&["frontier", "--runs", out_s]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), fs::read_to_string(out.join("frontier.csv")).unwrap());
    assert_eq!(stdout(&o).lines().count(), 1 + 3 * 10);

    let rows = tmp.path().join("table");
    fs::create_dir(&rows).unwrap();
    fs::write(
        rows.join("results.csv"),
        "subject,algorithm,acc_all,acc_sel,pr\n\
         a,nsga2,0.7,0.80,6\nb,nsga2,0.7,0.84,5\na,greedy,0.7,0.70,3\nb,greedy,0.7,0.72,2\n",
    )
    .unwrap();
    let o = chansel(&["anova", "--runs", rows.to_str().unwrap(), "--metric", "acc-sel"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(line.starts_with("acc_sel,nsga2;greedy,"), "{line}");
    assert!(line.ends_with(",1,2"), "{line}");
    // identical accuracies leave no within-group variance
    assert_eq!(
        code(&chansel(&[
            "anova",
            "--runs",
            rows.to_str().unwrap(),
            "--metric",
            "acc-all"
        ])),
        2
    );

    assert_eq!(code(&chansel(&["report", "--runs", tmp.path().to_str().unwrap()])), 2);
}
