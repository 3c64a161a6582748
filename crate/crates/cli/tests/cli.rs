use std::path::Path;
use std::process::{Command, Output};

use sbm_spectral::metrics::ccp;

fn run(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_sbm-spectral")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_sbm-spectral")).args(args).output().unwrap();
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_labels(path: &Path) -> Vec<usize> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.trim().parse::<usize>().unwrap() - 1)
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_then_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, truth, found) = (dir.path().join("g.txt"), dir.path().join("t.txt"), dir.path().join("f.txt"));
    run(&["generate", "--dgp", "1", "--n-per-k", "200", "--seed", "3", "--out", p(&graph), "--labels", p(&truth)]);
    let again = run(&["generate", "--dgp", "1", "--n-per-k", "200", "--seed", "3"]);
    assert_eq!(std::fs::read(&graph).unwrap(), again.stdout);
    let truth = read_labels(&truth);
    assert_eq!(truth.len(), 400);
    assert!(truth.iter().all(|&g| g < 2));

    let out = run(&["cluster", "--input", p(&graph), "--k", "2", "--variant", "tau", "--tau", "dbar", "--out", p(&found)]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("tau = "), "{stderr}");
    let found = read_labels(&found);
    assert!(ccp(&found, &truth).unwrap() > 0.95);

    let out = run(&["cluster", "--input", p(&graph), "--k", "2", "--variant", "adaptive", "--algo", "kmeans"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 400);
}

#[test]
fn tune_tau_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    run(&["generate", "--dgp", "2", "--n-per-k", "50", "--out", p(&graph)]);
    let out = run(&["tune-tau", "--input", p(&graph), "--k", "3", "--variant", "tau-prime", "--restarts", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,q"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, q) = l.split_once(',').unwrap();
            (t.parse().unwrap(), q.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0].0, 1e-4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("selected tau"));
}

#[test]
fn experiment_output_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (one, two) = (dir.path().join("1.csv"), dir.path().join("2.csv"));
    let common = ["experiment", "--dgp", "4", "--n-per-k", "40", "--reps", "4", "--seed", "9", "--variant", "tau-prime,adaptive", "--algo", "kmeans", "--restarts", "5", "--no-timing"];
    let mut a = common.to_vec();
    a.extend(["--threads", "1", "--out", p(&one)]);
    let mut b = common.to_vec();
    b.extend(["--threads", "2", "--out", p(&two)]);
    let out = run(&a);
    run(&b);
    let bytes = std::fs::read(&one).unwrap();
    assert_eq!(bytes, std::fs::read(&two).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("rep,dgp,n,K,variant,algo,tau,ccp,nmi,excluded,runtime_ms\n"));
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.lines().skip(1).all(|l| l.ends_with(',')), "runtime column should be empty");
    assert!(!out.stderr.is_empty(), "summary goes to stderr by default");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "dgp = 1\nn_per_k = 30\nreps = 5\nvariant = plain, tau\ntau = dbar4\nalgo = kmeans\nrestarts = 3\n").unwrap();
    let (csv, summary) = (dir.path().join("r.csv"), dir.path().join("s.csv"));
    run(&["experiment", "--config", p(&cfg), "--reps", "2", "--no-timing", "--out", p(&csv), "--summary", p(&summary)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(text.lines().skip(1).all(|l| l.contains(",1,60,2,")));
    assert!(std::fs::metadata(&summary).unwrap().len() > 0);

    std::fs::write(&cfg, "colour = red\n").unwrap();
    fails(&["experiment", "--config", p(&cfg)]);
}

#[test]
fn table_from_experiment_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (jy, dbar, table) = (dir.path().join("jy.csv"), dir.path().join("dbar.csv"), dir.path().join("t.csv"));
    let base = ["experiment", "--dgp", "1", "--n-per-k", "50", "--reps", "2", "--variant", "tau", "--algo", "kmeans", "--restarts", "3", "--no-timing"];
    let mut a = base.to_vec();
    a.extend(["--tau", "jy", "--out", p(&jy)]);
    run(&a);
    let mut b = base.to_vec();
    b.extend(["--tau", "dbar", "--out", p(&dbar)]);
    run(&b);
    let jy_in = format!("jy={}", p(&jy));
    let dbar_in = format!("dbar={}", p(&dbar));
    run(&["table", "--input", &jy_in, "--input", &dbar_in, "--require", "1:50:jy", "--require", "1:50:dbar", "--out", p(&table)]);
    let text = std::fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    let err = fails(&["table", "--input", &jy_in, "--require", "2:50:jy"]);
    assert!(!err.is_empty());
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    run(&["generate", "--dgp", "1", "--n-per-k", "50", "--out", p(&graph)]);
    fails(&["generate", "--dgp", "7"]);
    fails(&["cluster", "--input", p(&graph), "--k", "2", "--tau", "grid"]);
    fails(&["cluster", "--input", p(&graph), "--k", "2", "--variant", "laplace"]);
    fails(&["tune-tau", "--input", p(&graph), "--k", "2", "--variant", "adaptive"]);
    fails(&["cluster", "--input", p(&dir.path().join("missing.txt")), "--k", "2"]);
}
