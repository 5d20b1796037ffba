use std::path::Path;
use std::process::{Command, Output};

fn graphod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, seed: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let o = graphod(&[
        "generate", "--nodes-per-class", "40", "--channels", "8", "--seed", seed, "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn pipeline_from_generate_to_report() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = generate(tmp.path(), "raw", "1");
    let labeled = tmp.path().join("labeled");
    let o = graphod(&[
        "inject", "--in", s(&raw), "--type", "both", "--m", "5", "--n", "1", "--seed", "2", "--out",
        s(&labeled),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let scores = tmp.path().join("scores.csv");
    let o = graphod(&[
        "detect", "--in", s(&labeled), "--algo", "lof", "--params", "k=5", "--out", s(&scores),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("auc=") && stdout.contains("auc_structural="), "{stdout}");
    let text = std::fs::read_to_string(&scores).unwrap();
    assert_eq!(text.lines().next(), Some("node_id,score"));
    assert_eq!(text.lines().count(), 81);

    let results = tmp.path().join("results.csv");
    let md = tmp.path().join("report.md");
    let o = graphod(&[
        "benchmark", "--datasets", s(&labeled), "--algos", "lof,mlpae", "--trials", "2", "--grid",
        "epochs=3", "hid_dim=8", "--out", s(&results), "--report", s(&md),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&results).unwrap().lines().count(), 5);
    assert!(std::fs::read_to_string(&md).unwrap().contains("| MLPAE |"));

    let o = graphod(&["report", "--results", s(&results), "--format", "md", "--per-type"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("labeled structural"));
    let o = graphod(&["report", "--results", s(&results), "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
}

#[test]
fn detect_on_unlabeled_bundle_prints_no_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = generate(tmp.path(), "raw", "3");
    let scores = tmp.path().join("out/scores.csv");
    let o = graphod(&["detect", "--in", s(&raw), "--algo", "scan", "--out", s(&scores)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("auc="));
    assert!(scores.exists());
}

#[test]
fn benchmark_with_failed_trials_exits_3_and_keeps_results() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = generate(tmp.path(), "raw", "4");
    let labeled = tmp.path().join("labeled");
    let o = graphod(&[
        "inject", "--in", s(&raw), "--type", "structural", "--m", "5", "--n", "1", "--out",
        s(&labeled),
    ]);
    assert!(o.status.success());
    let results = tmp.path().join("results.csv");
    let o = graphod(&[
        "benchmark", "--datasets", s(&labeled), "--algos", "lof,gcnae", "--trials", "2", "--grid",
        "epochs=2", "hid_dim=0", "--out", s(&results),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",failed")).count(), 2, "{text}");
    assert_eq!(text.lines().filter(|l| l.ends_with(",ok")).count(), 2);
}

#[test]
fn invalid_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = generate(tmp.path(), "raw", "5");
    let out = tmp.path().join("x.csv");
    for args in [
        vec!["detect", "--in", s(&raw), "--algo", "nosuch", "--out", s(&out)],
        vec!["detect", "--in", s(&raw), "--algo", "lof", "--params", "k", "--out", s(&out)],
        vec!["detect", "--in", s(&raw), "--algo", "lof", "--params", "k=0", "--out", s(&out)],
        vec!["scale", "--sizes", "200,100", "--algos", "lof", "--out", s(&out)],
        vec!["generate", "--nodes-per-class", "10", "--homophily", "2", "--out", s(&out)],
    ] {
        let o = graphod(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = tmp.path().join("missing");
    let o = graphod(&["detect", "--in", s(&missing), "--algo", "lof", "--out", s(&out)]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn scale_writes_one_row_per_size_and_detector() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scale.csv");
    let o = graphod(&[
        "scale", "--sizes", "100,200", "--algos", "scan,dominant", "--params", "epochs=2", "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("num_nodes,algorithm,runtime_ms,peak_mem_bytes,status"));
}
