use std::path::Path;
use std::process::Command;

fn cfee(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cfee")).args(args).output().unwrap();
    assert!(out.status.success(), "cfee {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const QUICK: &str = "[ga]\npopulation = 8\ngenerations = 4\n";

#[test]
fn simulate_twice_gives_identical_record_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, QUICK).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        cfee(&["simulate", "--config", path(&cfg), "--trials", "4", "--seed", "9", "--out", path(out)]);
    }
    for f in ["records.csv", "traces.csv", "cdf.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let records = std::fs::read_to_string(a.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 4 * 3);
    assert!(!records.contains("runtime"));
    assert!(a.join("timing.csv").exists());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schemes"].as_array().unwrap().len(), 3);
}

#[test]
fn report_subcommand_reproduces_simulate_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    cfee(&["simulate", "--trials", "5", "--scheme", "random,alg1", "--out", path(&sim)]);
    let rep = dir.path().join("rep");
    cfee(&[
        "report",
        "--records",
        path(&sim.join("records.csv")),
        "--timing",
        path(&sim.join("timing.csv")),
        "--out",
        path(&rep),
    ]);
    assert_eq!(std::fs::read(sim.join("cdf.csv")).unwrap(), std::fs::read(rep.join("cdf.csv")).unwrap());
}

#[test]
fn optimize_reproduces_the_first_simulated_trial() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    cfee(&["simulate", "--trials", "1", "--seed", "4", "--scheme", "alg1", "--out", path(&sim)]);
    let opt = dir.path().join("opt");
    cfee(&["optimize", "--seed", "4", "--out", path(&opt)]);
    let sol: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(opt.join("solution.json")).unwrap()).unwrap();
    let records = std::fs::read_to_string(sim.join("records.csv")).unwrap();
    let row: Vec<&str> = records.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(sol["ee"].as_f64().unwrap().to_string(), row[3]);
    assert_eq!(sol["seed"].as_u64().unwrap().to_string(), row[1]);
    let again = dir.path().join("again");
    cfee(&["optimize", "--seed", "4", "--out", path(&again)]);
    assert_eq!(std::fs::read(opt.join("solution.json")).unwrap(), std::fs::read(again.join("solution.json")).unwrap());
    assert_eq!(std::fs::read(opt.join("trace.csv")).unwrap(), std::fs::read(again.join("trace.csv")).unwrap());
}

#[test]
fn dataset_optimize_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("data/d.jsonl");
    cfee(&["export-dataset", "--count", "3", "--seed", "1", "--out", path(&ds)]);
    let ds2 = dir.path().join("d2.jsonl");
    cfee(&["export-dataset", "--count", "3", "--seed", "1", "--out", path(&ds2)]);
    assert_eq!(std::fs::read(&ds).unwrap(), std::fs::read(&ds2).unwrap());

    let opt = dir.path().join("opt");
    cfee(&["optimize", "--dataset", path(&ds), "--out", path(&opt)]);
    let ev = dir.path().join("ev");
    cfee(&[
        "eval-predictions",
        "--dataset",
        path(&ds),
        "--predictions",
        path(&opt.join("predictions.jsonl")),
        "--out",
        path(&ev),
    ]);
    let solved = std::fs::read_to_string(opt.join("solutions.csv")).unwrap();
    let scored = std::fs::read_to_string(ev.join("scores.csv")).unwrap();
    for (a, b) in solved.lines().skip(1).zip(scored.lines().skip(1)) {
        let ea: f64 = a.split(',').nth(1).unwrap().parse().unwrap();
        let eb: f64 = b.split(',').nth(1).unwrap().parse().unwrap();
        assert!((ea - eb).abs() <= 1e-9 * ea);
    }
}

#[test]
fn ga_writes_generation_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, QUICK).unwrap();
    let out = dir.path().join("ga");
    cfee(&["ga", "--config", path(&cfg), "--seed", "2", "--out", path(&out)]);
    let hist = std::fs::read_to_string(out.join("generations.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + 5);
    let best: Vec<f64> = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn bad_input_exits_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "upsilon = 3.0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cfee"))
        .args(["simulate", "--config", path(&cfg), "--out", path(&dir.path().join("x"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("upsilon"));
    let out = Command::new(env!("CARGO_BIN_EXE_cfee"))
        .args(["simulate", "--scheme", "magic", "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_cfee"))
        .args(["eval-predictions", "--dataset", "/nonexistent", "--predictions", "p", "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent"));
}
