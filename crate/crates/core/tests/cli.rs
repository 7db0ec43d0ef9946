use std::path::Path;
use std::process::{Command, Output};

fn dptr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dptr")).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SWEEP: &str = r#"
methods = ["IHT", "DPTR", "DPTR-P", "BAYES"]
replications = 12
master_seed = 77
[scenario]
scenario = "S1_OLS"
k = 30
[[sweep]]
field = "scenario.sigma"
values = [1, 3]
[output]
run_id = "det"
"#;

#[test]
fn output_is_identical_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, SWEEP);
    let mut outputs = Vec::new();
    for p in ["1", "8"] {
        let out = dir.path().join(format!("p{p}"));
        let o = dptr(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--parallelism", p]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for f in ["det.replications.csv", "det.aggregate.csv"] {
        let a = std::fs::read(outputs[0].join(f)).unwrap();
        let b = std::fs::read(outputs[1].join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
    let csv = std::fs::read_to_string(outputs[0].join("det.replications.csv")).unwrap();
    // header + 2 cells x 12 replications x 4 methods
    assert_eq!(csv.lines().count(), 1 + 2 * 12 * 4);
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, SWEEP);
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = dptr(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        std::fs::read(out.join("det.replications.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dptr(&["--help"]).status.code(), Some(0));
    assert_eq!(dptr(&["--version"]).status.code(), Some(0));
    assert_eq!(dptr(&["no-such-command"]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    write(&bad, "replications = 0\n");
    assert_eq!(dptr(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    write(&bad, "not_a_field = 3\n");
    assert_eq!(dptr(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(1));

    let eval = dir.path().join("eval.toml");
    let empty = dir.path().join("empty.csv");
    write(&empty, "");
    write(&eval, &format!("input = {:?}\n", empty.to_str().unwrap()));
    let o = dptr(&["evaluate", "--config", eval.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_beta_prints_value() {
    let o = dptr(&["oracle-beta"]);
    assert!(o.status.success());
    let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((v - 41.1877).abs() < 1e-4);
}

#[test]
fn evaluate_planted_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("planted.csv");
    dptr::selftest::write_planted_csv(&data, 600, 0.3, 0.1, 5).unwrap();
    let cfg = dir.path().join("eval.toml");
    write(
        &cfg,
        &format!(
            "input = {:?}\nsample_sizes = [20]\nreplications = 10\nseed = 4\n[output]\nrun_id = \"planted\"\n",
            data.to_str().unwrap()
        ),
    );
    let o = dptr(&["evaluate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("planted.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["reconciliation"]["balanced"], true);
    let csv = std::fs::read_to_string(dir.path().join("planted.replications.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10 * 2);
}
