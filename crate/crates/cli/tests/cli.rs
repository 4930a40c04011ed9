use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn preisach(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preisach")).args(args).output().unwrap()
}

fn report(out: &Output) -> HashMap<String, String> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap_or_else(|| panic!("not key=value: {l}"));
            (k.to_owned(), v.to_owned())
        })
        .collect()
}

fn num(r: &HashMap<String, String>, key: &str) -> f64 {
    r[key].parse().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> HashMap<String, String> {
    let data = dir.join("data.csv");
    let truth = dir.join("truth.json");
    let mut args = vec!["synth", "--d", "0.1", "--m", "5", "--output", s(&data), "--truth", s(&truth)];
    args.extend_from_slice(extra);
    report(&preisach(&args))
}

#[test]
fn noise_free_fit_reproduces_data() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let data = dir.path().join("data.csv");
    let kernel = dir.path().join("kernel.json");
    let before = std::fs::read(&data).unwrap();
    let r = report(&preisach(&["fit", "--input", s(&data), "--d", "0.1", "--output", s(&kernel)]));
    assert!(num(&r, "residual_rms") < 1e-10);
    assert_eq!(r["unknowns"], "26");
    assert!(num(&r, "q") <= 26.0);
    for key in ["samples", "objective", "kkt_residual"] {
        assert!(r.contains_key(key), "{key}");
    }
    assert_eq!(std::fs::read(&data).unwrap(), before, "input must not be modified");
    assert!(kernel.exists());
}

#[test]
fn predict_on_training_input_matches_fit_residual() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--noise", "0.05", "--seed", "3"]);
    let data = dir.path().join("data.csv");
    let kernel = dir.path().join("kernel.json");
    let fit = report(&preisach(&["fit", "--input", s(&data), "--d", "0.1", "--output", s(&kernel)]));
    let trace = dir.path().join("loop.csv");
    let pred = report(&preisach(&["predict", "--kernel", s(&kernel), "--input", s(&data), "--output", s(&trace)]));
    let (a, b) = (num(&fit, "residual_rms"), num(&pred, "rms_error"));
    assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().next(), Some("kappa,moment"));
    assert_eq!(text.lines().count() - 1, num(&pred, "samples") as usize);
}

#[test]
fn predicted_cycles_close_after_the_first() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--program", "cycles", "--cycles", "3", "--low", "0.4"]);
    let data = dir.path().join("data.csv");
    let truth = dir.path().join("truth.json");
    let trace = dir.path().join("loop.csv");
    report(&preisach(&["predict", "--kernel", s(&truth), "--input", s(&data), "--output", s(&trace)]));
    let moments: Vec<String> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.to_owned())
        .collect();
    // start, five steps up to 0.5, three down to 0.2, then two cycles of six
    assert_eq!(moments.len(), 1 + 5 + 3 + 2 * 6);
    let cycle = |k: usize| &moments[9 + 6 * k..15 + 6 * k];
    assert_eq!(cycle(0), cycle(1));
    // levels 0.3..0.5 on the virgin ascent versus the closed cycle's ascent
    assert_ne!(&moments[3..6], &cycle(0)[..3]);
}

#[test]
fn cross_validation_and_nonneg_run() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--noise", "0.01"]);
    let data = dir.path().join("data.csv");
    let kernel = dir.path().join("kernel.json");
    let out = preisach(&["fit", "--input", s(&data), "--d", "0.1", "--output", s(&kernel), "--nonneg", "--folds", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success());
    assert_eq!(text.lines().filter(|l| l.starts_with("fold=")).count(), 3);
}

#[test]
fn synth_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), &["--seed", "9", "--noise", "0.1"]);
    synth(b.path(), &["--seed", "9", "--noise", "0.1"]);
    for f in ["data.csv", "truth.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn relay_demo_switches() {
    let r = report(&preisach(&["relay-demo"]));
    assert_eq!(r["switches"], "3");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("relay.csv");
    let r = report(&preisach(&["relay-demo", "--xi0", "-1", "--output", s(&csv)]));
    let first: f64 = r["switch_times"].split(',').next().unwrap().parse().unwrap();
    assert!((first - 0.2f64.asin()).abs() <= 1e-3);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,v,w"));
    assert_eq!(text.lines().count(), 10_001);
    assert!(text.lines().nth(1).unwrap().ends_with(",-1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let kernel = dir.path().join("k.json");
    let code = |out: Output| out.status.code().unwrap();

    assert_eq!(code(preisach(&["fit", "--input", s(&missing), "--d", "0.1", "--output", s(&kernel)])), 2);
    assert_eq!(code(preisach(&["relay-demo", "--a1", "0.2", "--a2", "0.2"])), 3);
    assert_eq!(code(preisach(&["synth", "--d", "0.1", "--m", "3", "--kmax", "0.3", "--output", "x.csv"])), 3);
    assert_eq!(code(preisach(&["fit", "--bogus"])), 3);

    synth(dir.path(), &[]);
    let data = dir.path().join("data.csv");
    for d in ["0", "-0.1"] {
        assert_eq!(code(preisach(&["fit", "--input", s(&data), "--d", d, "--output", s(&kernel)])), 3);
    }
    assert_eq!(code(preisach(&["fit", "--input", s(&data), "--d", "0.1", "--output", s(&kernel), "--folds", "1"])), 3);
    assert_eq!(code(preisach(&["fit", "--input", s(&data), "--d", "0.1", "--output", s(&kernel), "--svd-tol", "2"])), 3);
    // samples beyond a fixed ceiling are rejected unless clamped
    let fixed = ["fit", "--input", s(&data), "--d", "0.1", "--output", s(&kernel), "--kmax", "0.3"];
    assert_eq!(code(preisach(&fixed)), 3);
    let mut clamped = fixed.to_vec();
    clamped.push("--clamp");
    assert_eq!(code(preisach(&clamped)), 0);

    let truth = dir.path().join("truth.json");
    let trace = dir.path().join("loop.csv");
    let predict = |extra: &[&str]| {
        let mut args = vec!["predict", "--kernel", s(&truth), "--input", s(&data), "--output", s(&trace)];
        args.extend_from_slice(extra);
        code(preisach(&args))
    };
    assert_eq!(predict(&[]), 0);
    assert_eq!(predict(&["--d", "0.1", "--kmax", "0.5"]), 0);
    assert_eq!(predict(&["--d", "0.2"]), 3);
    assert_eq!(predict(&["--kmax", "0.6"]), 3);

    std::fs::write(&kernel, "{ not json").unwrap();
    let out = preisach(&["predict", "--kernel", s(&kernel), "--input", s(&data), "--output", s(&trace)]);
    assert_eq!(code(out), 3);
}
