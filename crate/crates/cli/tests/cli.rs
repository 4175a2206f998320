use std::fs;
use std::net::UdpSocket;
use std::path::Path;
use std::process::{Command, Output};

fn quake(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quake")).arg("--out").arg(out).args(args).output().expect("spawn quake")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = quake(out, args);
    assert!(o.status.success(), "quake {args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn small_corpus(dir: &Path) {
    ok(dir, &["--seed", "11", "synth", "--n-quake", "16", "--n-noise", "16", "--duration", "4"]);
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_deterministic_and_balanced() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_corpus(a.path());
    small_corpus(b.path());
    let (la, lb) = (listing(a.path()), listing(b.path()));
    assert_eq!(la.len(), 32 + 2);
    assert!(la == lb, "same seed gave different files");

    let manifest = fs::read_to_string(a.path().join("manifest.csv")).unwrap();
    let quakes = manifest.lines().filter(|l| l.contains(",earthquake,")).count();
    let others = manifest.lines().filter(|l| l.contains(",non_earthquake,")).count();
    assert_eq!((quakes, others), (16, 16));
}

#[test]
fn featurize_shapes_and_idempotence() {
    let d = tempfile::tempdir().unwrap();
    small_corpus(d.path());
    let stdout = ok(d.path(), &["featurize"]);
    assert!(stdout.contains("featurized 32 clips"), "{stdout}");
    let index = fs::read_to_string(d.path().join("features/index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().filter(|l| l.ends_with(".csv,9,13")).collect();
    assert_eq!(rows.len(), 32, "{index}");
    let first = listing(&d.path().join("features"));
    ok(d.path(), &["featurize"]);
    assert!(first == listing(&d.path().join("features")));
}

#[test]
fn featurize_upsamples_slow_input() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--n-quake", "4", "--n-noise", "4", "--duration", "3", "--rate", "200"]);
    ok(d.path(), &["featurize", "--rate", "1000"]);
    let index = fs::read_to_string(d.path().join("features/index.csv")).unwrap();
    assert_eq!(index.lines().filter(|l| l.ends_with(",9,13")).count(), 8);
}

#[test]
fn featurize_reports_failures_with_nonzero_exit() {
    let d = tempfile::tempdir().unwrap();
    small_corpus(d.path());
    fs::write(d.path().join("quake_0000.wav"), b"not a wav").unwrap();
    let o = quake(d.path(), &["featurize"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("quake_0000.wav"));
}

#[test]
fn train_eval_detect_compare() {
    let d = tempfile::tempdir().unwrap();
    small_corpus(d.path());
    let args = ["--sequential", "train", "--model", "lstm", "--epochs", "15"];
    ok(d.path(), &args);
    let model = d.path().join("model_lstm.qfm");
    let history = fs::read(d.path().join("history_lstm.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&history).lines().count(), 16);

    // same seed, parallel this time: identical bytes
    let model_bytes = fs::read(&model).unwrap();
    ok(d.path(), &["train", "--model", "lstm", "--epochs", "15"]);
    assert!(fs::read(&model).unwrap() == model_bytes);
    assert!(fs::read(d.path().join("history_lstm.csv")).unwrap() == history);

    let report = ok(d.path(), &["eval", "--model", model.to_str().unwrap()]);
    assert!(report.contains("accuracy") && report.contains("cohen_kappa"), "{report}");

    let wav = d.path().join("quake_0001.wav");
    let log = d.path().join("a.jsonl");
    let out = ok(
        d.path(),
        &[
            "detect",
            "--model",
            model.to_str().unwrap(),
            "--wav",
            wav.to_str().unwrap(),
            "--log",
            log.to_str().unwrap(),
            "--warmup",
            "0.2",
        ],
    );
    assert!(out.contains("accepted 16 "), "{out}");
    let alarms = fs::read_to_string(&log).unwrap();
    for line in alarms.lines() {
        assert!(line.contains("\"label\":\"earthquake\""), "{line}");
    }

    // 4 s clips need a shorter LTA than the 10 s default
    let cfg = d.path().join("short.toml");
    fs::write(&cfg, "[stalta]\nsta_window = 0.2\nlta_window = 2.0\nthresholds = [1.5, 8.0]\n").unwrap();
    let cmp = ok(d.path(), &["--config", cfg.to_str().unwrap(), "compare-stalta", "--model", model.to_str().unwrap()]);
    assert!(cmp.starts_with("method,prerequisites,accuracy,false_alarms"), "{cmp}");
    assert_eq!(cmp.lines().filter(|l| l.starts_with("sta_lta,")).count(), 2);
    assert_eq!(cmp.lines().filter(|l| l.starts_with("lstm,none,")).count(), 1);
}

#[test]
fn sweep_grid_has_one_row_per_cell() {
    let d = tempfile::tempdir().unwrap();
    small_corpus(d.path());
    let out =
        ok(d.path(), &["sweep", "--windows", "0.2", "--rates", "200,1000", "--models", "cnn,lstm", "--epochs", "1"]);
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with("cnn,") || l.starts_with("lstm,")).collect();
    assert_eq!(rows.len(), 4, "{out}");
    assert!(rows.iter().all(|r| !r.contains("NaN")), "{out}");
    for f in ["sweep.csv", "sweep_accuracy.svg", "sweep_kappa.svg"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_overrides_and_rejects_typos() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "[synth]\nn_quake = 3\nn_noise = 2\nduration_s = 2.0\n").unwrap();
    let out = ok(d.path(), &["--config", cfg.to_str().unwrap(), "synth"]);
    assert!(out.contains("wrote 5 clips"), "{out}");

    for typo in ["[synth]\nn_quakes = 3\n", "[stalta]\nlta = 3.0\n", "[train]\nepoch = 3\n"] {
        fs::write(&cfg, typo).unwrap();
        let o = quake(d.path(), &["--config", cfg.to_str().unwrap(), "synth"]);
        assert!(!o.status.success(), "{typo:?} accepted");
    }
}

#[test]
fn udp_replay_reaches_listener() {
    let d = tempfile::tempdir().unwrap();
    small_corpus(d.path());
    ok(d.path(), &["train", "--model", "cnn", "--epochs", "2"]);
    let model = d.path().join("model_cnn.qfm");
    let port = UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let listener = Command::new(env!("CARGO_BIN_EXE_quake"))
        .arg("--out")
        .arg(d.path())
        .args(["detect", "--model", model.to_str().unwrap(), "--listen", &addr, "--idle-timeout", "1"])
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(400));
    let wav = d.path().join("quake_0002.wav");
    ok(d.path(), &["replay", "--wav", wav.to_str().unwrap(), "--dest", &addr, "--speed", "20"]);
    let o = listener.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("datagrams 16 accepted 16 duplicates 0"), "{text}");
    assert!(text.contains("samples 4000"), "{text}");
}
