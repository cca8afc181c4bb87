use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geodrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodrop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no '{key}' line in:\n{text}"))
        .parse()
        .unwrap()
}

fn small(out: &Path) -> Vec<String> {
    ["--hidden", "16", "--epochs", "2", "--out", out.to_str().unwrap()]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[test]
fn sweep_writes_rows_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--rates", "0.0,0.2", "--trials", "2"];
    let extra = small(dir.path());
    args.extend(extra.iter().map(String::as_str));
    let o = geodrop(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("rate,trial,fim_norm,test_accuracy,train_loss,wall_seconds,status\n"));
    let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("polyline"));
    let meta = fs::read_to_string(dir.path().join("sweep_meta.txt")).unwrap();
    assert!(meta.contains("fim_chunk=64") && meta.contains("data=synthetic"));
}

#[test]
fn rate_zero_sweep_matches_train() {
    let dir = tempfile::tempdir().unwrap();
    let extra = small(dir.path());
    let mut args = vec!["sweep", "--rates", "0.0", "--trials", "1", "--seed", "5"];
    args.extend(extra.iter().map(String::as_str));
    assert!(geodrop(&args).status.success());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let sweep_norm = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().to_string();

    let mut args = vec!["train", "--rate", "0", "--seed", "5"];
    args.extend(extra.iter().map(String::as_str));
    let o = geodrop(&args);
    assert!(o.status.success());
    let row = stdout(&o).lines().find(|l| l.starts_with("0,0,")).unwrap().to_string();
    assert_eq!(row.split(',').nth(2).unwrap(), sweep_norm);
}

#[test]
fn checkpoint_round_trip_through_fim() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("m.gdrp");
    let extra = small(dir.path());
    let mut args = vec!["train", "--checkpoint", ck.to_str().unwrap()];
    args.extend(extra.iter().map(String::as_str));
    let o = geodrop(&args);
    assert!(o.status.success());
    let trained_norm: f64 = stdout(&o)
        .lines()
        .find(|l| l.starts_with("0,0,"))
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    // The sweep measures on the first 1000 training inputs; the synthetic
    // default has fewer, so both see the whole training split.
    let o = geodrop(&["fim", "--estimator", "kfac", "--checkpoint", ck.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "frobenius"), trained_norm);
}

#[test]
fn geometry_examples() {
    let o = geodrop(&["geometry", "--family", "gaussian", "--point", "0,1", "--quantity", "scalar"]);
    assert!((value(&stdout(&o), "scalar") + 1.0).abs() < 1e-3);
    let o = geodrop(&["geometry", "--family", "sphere", "--point", "pi/4, 0"]);
    assert!((value(&stdout(&o), "scalar") - 2.0).abs() < 1e-3);
    for q in ["christoffel", "torsion", "riemann", "scalar"] {
        let o = geodrop(&["geometry", "--family", "euclidean", "--dim", "3", "--point", "0.1,-2,5", "--quantity", q]);
        assert!(o.status.success());
        for line in stdout(&o).lines().skip(usize::from(q != "scalar")) {
            let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(v, 0.0, "{q}: {line}");
        }
    }
}

#[test]
fn custom_metric_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("poincare.txt");
    fs::write(&p, "# upper half plane\ndim = 2\ng00 = 1/x1^2\ng11 = 1/x1^2\n").unwrap();
    let o = geodrop(&["geometry", "--family", "custom", "--metric-file", p.to_str().unwrap(), "--point", "0.3,1.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((value(&stdout(&o), "scalar") + 2.0).abs() < 1e-6);
}

#[test]
fn alpha_mix_examples() {
    let o = geodrop(&["alpha-mix", "--dist", "0.2,0.3,0.5", "--dist", "0.2,0.3,0.5", "--alpha", "0"]);
    let t = stdout(&o);
    assert!(value(&t, "gap") <= 1e-8);
    let o = geodrop(&["alpha-mix", "--dist", "0.2,0.8", "--dist", "0.6,0.4", "--weights", "0.25,0.75", "--alpha", "-1"]);
    let t = stdout(&o);
    let line = t.lines().find_map(|l| l.strip_prefix("integrated,")).unwrap();
    let q: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
    assert!((q[0] - 0.5).abs() < 1e-12 && (q[1] - 0.5).abs() < 1e-12);
    let o = geodrop(&["alpha-mix", "--dist", "0.1,0.2,0.7", "--dist", "0.5,0.4,0.1", "--dist", "0.3,0.3,0.4", "--alpha", "0.5"]);
    assert!(value(&stdout(&o), "gap") <= 1e-4);
}

#[test]
fn sff_examples() {
    let o = geodrop(&["sff", "--embedding", "parabola", "--point", "0"]);
    assert!((value(&stdout(&o), "norm") - 2.0).abs() < 1e-6);
    let o = geodrop(&["sff", "--embedding", "plane", "--point", "0.5,-1"]);
    assert_eq!(value(&stdout(&o), "norm"), 0.0);
}

#[test]
fn ensemble_report() {
    let dir = tempfile::tempdir().unwrap();
    let extra = small(dir.path());
    let mut args = vec!["ensemble", "--masks", "3", "--rate", "0.3", "--weights", "0.2,0.3,0.5"];
    args.extend(extra.iter().map(String::as_str));
    let o = geodrop(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json = fs::read_to_string(dir.path().join("ensemble.json")).unwrap();
    let r = geodrop::ensemble::EnsembleResult::from_json(&json).unwrap();
    assert_eq!(r.members.len(), 3);
    assert_eq!(r.weights, vec![0.2, 0.3, 0.5]);
}

#[test]
fn exit_codes() {
    // Usage and configuration errors.
    assert_eq!(geodrop(&["sweep", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(geodrop(&["sweep", "--rates", "1.0"]).status.code(), Some(2));
    assert_eq!(geodrop(&["sweep", "--mnist-images", "/nonexistent", "--mnist-labels", "/x"]).status.code(), Some(2));
    assert_eq!(geodrop(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(geodrop(&["geometry", "--family", "gaussian", "--point", "0,-1"]).status.code(), Some(2));

    // Data-format errors name the file.
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("bad-images");
    let lab = dir.path().join("labels");
    fs::write(&img, [0u8, 0, 8, 1, 0, 0, 0, 0]).unwrap();
    fs::write(&lab, [0u8, 0, 8, 1, 0, 0, 0, 0]).unwrap();
    let o = geodrop(&["sweep", "--mnist-images", img.to_str().unwrap(), "--mnist-labels", lab.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad-images"));

    // Numerical failure: a metric that is singular at the queried point.
    let m = dir.path().join("singular.txt");
    fs::write(&m, "dim = 2\ng00 = 1\ng11 = x0^2\n").unwrap();
    let o = geodrop(&["geometry", "--family", "custom", "--metric-file", m.to_str().unwrap(), "--point", "0,0"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_and_env_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!("rates = 0.1\ntrials = 1\nhidden = 8\nepochs = 1\nout = {}\n", out.display()),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geodrop"))
        .env("GEODROP_THREADS", "2")
        .args(["sweep", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = fs::read_to_string(out.join("sweep_meta.txt")).unwrap();
    assert!(meta.contains("threads=2") && meta.contains("rates=0.1"));

    let o = Command::new(env!("CARGO_BIN_EXE_geodrop"))
        .env("GEODROP_THREADS", "zero")
        .args(["sweep", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
