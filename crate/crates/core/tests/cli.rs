use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cv2x-sim");

const SMOKE: &str = "\
# tiny run
speeds_kmph = 300
snr_db = 10, 20
n_subframes = 4
train_split = 0.5
epochs = 1
batch_size = 4
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path) -> String {
    let cfg = dir.join("smoke.cfg");
    fs::write(&cfg, SMOKE).unwrap();
    cfg.to_str().unwrap().to_owned()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let args = |cmd: &'static str| [cmd, "--config", cfg.as_str(), "--seed", "5", "--out", out_s];

    assert!(run_ok(&args("gen")).contains("wrote 8 records in 2 files"));
    for f in ["dataset/speed300_snr10.cvxd", "dataset/speed300_snr20.cvxd", "gen_metadata.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let meta = fs::read_to_string(out.join("gen_metadata.txt")).unwrap();
    assert!(meta.contains("seed=5"), "{meta}");

    run_ok(&args("train"));
    assert!(out.join("model.cvxm").exists());
    let loss = fs::read_to_string(out.join("train_loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 2, "{loss}");

    run_ok(&args("eval"));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("speed_kmph,snr_db,estimator,bler,evm_pct,mse,blocks\n"));
    assert_eq!(metrics.lines().count(), 1 + 2 * 3);
    assert!(out.join("channel_mse.csv").exists());

    assert!(run_ok(&args("report")).contains("wrote 3 curve files"));
    let curve = fs::read_to_string(out.join("report/speed300_ann.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn eval_without_dataset_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eval.cfg");
    fs::write(&cfg, format!("{SMOKE}estimators = perfect, ls\n")).unwrap();
    let out = dir.path().join("empty");
    let res = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("speed300_snr10.cvxd"), "{err}");

    let res = run(&["eval", "--config", &write_config(dir.path()), "--out", out.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("model.cvxm"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n_subframes = many\n").unwrap();
    let res = run(&["gen", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("n_subframes"));
    assert!(!run(&["report", "--out", dir.path().join("none").to_str().unwrap()]).status.success());
}
