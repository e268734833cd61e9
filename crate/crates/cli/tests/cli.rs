use std::path::Path;
use std::process::{Command, Output};

fn gnnlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnnlab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_then_train() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gnnlab(&["gen", "--out", "data", "--seed", "4"], dir.path()));
    assert!(dir.path().join("data").read_dir().unwrap().count() > 0);

    std::fs::write(dir.path().join("train.toml"), "[train]\nepochs = 30\n").unwrap();
    let stdout = ok(&gnnlab(
        &[
            "train",
            "--data",
            "data",
            "--config",
            "train.toml",
            "--out",
            "fit",
            "--method",
            "gnn_skip",
        ],
        dir.path(),
    ));
    assert!(stdout.starts_with("method,train_mse,test_mse,evaluation"));
    let loss = std::fs::read_to_string(dir.path().join("fit/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 31);
    assert!(dir.path().join("fit/model.ckpt").exists());

    let stdout = ok(&gnnlab(
        &[
            "train",
            "--data",
            "data",
            "--config",
            "train.toml",
            "--out",
            "tik",
            "--method",
            "tikhonov",
        ],
        dir.path(),
    ));
    assert!(stdout.contains("tikhonov,"));
    assert!(!dir.path().join("tik/model.ckpt").exists());
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gnnlab(&["gen", "--out", "a", "--seed", "9"], dir.path()));
    ok(&gnnlab(&["gen", "--out", "b", "--seed", "9"], dir.path()));
    for entry in dir.path().join("a").read_dir().unwrap() {
        let name = entry.unwrap().file_name();
        let x = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
}

#[test]
fn theory_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&gnnlab(&["theory", "--n", "800", "--csv", "t.csv"], dir.path()));
    for key in ["entropy_bound", "kappa_n", "rate_exponent", "predicted_rate"] {
        assert!(stdout.contains(key), "missing {key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "quantity,value");
}

#[test]
fn mismatch_instances_all_hold() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gnnlab(&["gen", "--out", "data", "--seed", "1"], dir.path()));
    let stdout = ok(&gnnlab(
        &[
            "theory",
            "--mismatch",
            "--bundle",
            "data",
            "--perturbations",
            "5",
            "--csv",
            "m.csv",
        ],
        dir.path(),
    ));
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "instance,kind,frobenius,lhs,rhs,margin,holds");
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 5);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(dir.path().join("m.csv").exists());
}

#[test]
fn tiny_study_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "study = \"convergence\"\n\
               n_grid = [40, 80]\n\
               pi_grid = [0.9]\n\
               trials = 1\n\
               methods = [\"gnn_skip\"]\n\
               [train]\n\
               epochs = 10\n";
    std::fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let stdout = ok(&gnnlab(
        &["convergence", "--config", "c.toml", "--out", "res", "--workers", "1"],
        dir.path(),
    ));
    assert!(stdout.contains("2 rows (0 failed)"));
    assert!(dir.path().join("res/results.csv").exists());
    assert!(dir.path().join("res/summary.csv").exists());

    let out = gnnlab(&["degree", "--config", "c.toml", "--out", "res2"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("convergence"));
}

#[test]
fn bad_method_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gnnlab(&["gen", "--out", "data"], dir.path()));
    let out = gnnlab(
        &["train", "--data", "data", "--out", "x", "--method", "nope"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
