use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_sttmpc");

fn config_path() -> String {
    format!("{}/../../configs/paper.toml", env!("CARGO_MANIFEST_DIR"))
}

fn run_small(out: &Path) -> std::process::Output {
    Command::new(BIN)
        .args(["run", "--config", &config_path(), "--jobs", "2"])
        .args(["--set", "experiment.steps=5", "--set", "experiment.seeds=[1, 2]"])
        .args(["--set", "experiment.deltas=[0.1, 0.001]"])
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn small_run_writes_the_output_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "design.json", "volumes.csv", "volumes.txt", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    for d in ["delta_1e-1", "delta_1e-3"] {
        for s in [1, 2] {
            assert!(dir.path().join(format!("traces/{d}/seed_{s}.csv")).exists());
            assert!(dir.path().join(format!("traces/{d}/seed_{s}.json")).exists());
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["version"].as_str().is_some_and(|v| !v.is_empty()));
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 4);

    let table = Command::new(BIN).args(["table", "--in"]).arg(dir.path()).output().unwrap();
    assert!(table.status.success());
    let csv = std::fs::read_to_string(dir.path().join("volumes.csv")).unwrap();
    // t = 1 always shows the full initial volume.
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2], "100");
    }

    let plot = Command::new(BIN).args(["plot", "--in"]).arg(dir.path()).output().unwrap();
    assert!(plot.status.success());
    assert!(dir.path().join("plots/volume.svg").exists());
    assert!(dir.path().join("plots/trajectory.svg").exists());
}

#[test]
fn traces_are_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_small(a.path()).status.success());
    assert!(run_small(b.path()).status.success());
    for f in ["traces/delta_1e-1/seed_1.csv", "traces/delta_1e-3/seed_2.csv", "volumes.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["run", "--config", &config_path(), "--set", "experiment.bogus=1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let broken = dir.path().join("broken.toml");
    let text: String = std::fs::read_to_string(config_path())
        .unwrap()
        .lines()
        .filter(|l| !l.trim_start().starts_with("lambda"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&broken, text).unwrap();
    let out = Command::new(BIN).args(["run", "--config"]).arg(&broken).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn table_without_traces_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN).args(["table", "--in"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
}
