use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ncbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncbf"))
        .args(args)
        .env("NCBF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ncbf(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("run_manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_is_reproducible_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["gen-data", "--count", "50", "--seed", "3", "--out", s(&a)]);
    ok(&["gen-data", "--count", "50", "--seed", "3", "--out", s(&b)]);
    for f in ["manifest.json", "features.f32", "phase_labels.f32", "mag_labels_db.f32"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = manifest(&a);
    assert_eq!(m["subcommand"], "gen-data");
    assert_eq!(m["seeds"]["dataset"], 3);
    assert_eq!(m["config"]["count"], 50);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 4);
    assert_eq!(m["threads"], 2);
    assert_eq!(std::fs::metadata(a.join("features.f32")).unwrap().len(), 50 * 6 * 4);
}

#[test]
fn train_eval_pattern_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let (data, p, m) = (t.join("data"), t.join("phase"), t.join("mag"));
    ok(&["gen-data", "--count", "200", "--seed", "1", "--out", s(&data)]);
    let train = |loss: &str, out: &Path| {
        ok(&[
            "train", "--loss", loss, "--data", s(&data), "--arch", "6,16,24", "--epochs", "2", "--batch", "32",
            "--seed", "4", "--out", s(out),
        ])
    };
    train("phase", &p);
    train("magnitude", &m);
    let again = t.join("phase2");
    train("phase", &again);
    assert_eq!(
        std::fs::read(p.join("params.f32")).unwrap(),
        std::fs::read(again.join("params.f32")).unwrap()
    );
    let history = std::fs::read_to_string(p.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert_eq!(manifest(&p)["config"]["train_config"]["initial_learning_rate"], 0.01);
    assert_eq!(manifest(&m)["config"]["train_config"]["initial_learning_rate"], 0.001);

    let eval = t.join("eval");
    ok(&["eval", "--phase-model", s(&p), "--mag-model", s(&m), "--scenarios", "5", "--seed", "2", "--out", s(&eval)]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(eval.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 5);
    assert!(report["lcmv"]["ncbf_gain_db"]["mean"].as_f64().unwrap() > 100.0);

    let pat = t.join("pattern");
    ok(&[
        "pattern", "--weights-from", "model", "--phase-model", s(&p), "--mag-model", s(&m), "--desired", "8,1.6",
        "--interferers", "-8,0.8,-16,4.9", "--angles", "-10,10,5", "--ranges", "1,2,0.5", "--out", s(&pat),
    ]);
    let csv = std::fs::read_to_string(pat.join("pattern.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 3);

    let swapped = ncbf(&["eval", "--phase-model", s(&m), "--mag-model", s(&p), "--out", s(&t.join("bad"))]);
    assert!(!swapped.status.success());
    let err: Value = serde_json::from_slice(&swapped.stderr).unwrap();
    assert_eq!(err["subcommand"], "eval");
    assert!(err["error"].as_str().unwrap().contains("magnitude"));
}

#[test]
fn lcmv_pattern_is_relative_to_desired_user() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pat");
    ok(&[
        "pattern", "--weights-from", "lcmv", "--desired", "8,1.6", "--interferers", "-8,0.8,-16,4.9", "--angles",
        "-16,8,8", "--ranges", "0.8,1.6,0.8", "--out", s(&out),
    ]);
    let csv = std::fs::read_to_string(out.join("pattern.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("theta_deg,range_m,gain_db"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let at = |th: f64, r: f64| rows.iter().find(|x| x[0] == th && x[1] == r).unwrap()[2];
    assert!(at(8.0, 1.6).abs() < 1e-9);
    assert!(at(-8.0, 0.8) < -150.0);
}

#[test]
fn bench_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    ok(&[
        "bench", "--grid-n", "8,16", "--samples", "4", "--batches", "1,2", "--repeats", "1", "--hidden", "8",
        "--out", s(&out),
    ]);
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,N,K,batch,samples,time_per_sample_s");
    assert_eq!(lines.len(), 1 + 2 + 4);
    assert!(lines[1].starts_with("lcmv,8,3,1,4,"));
    assert_eq!(manifest(&out)["config"]["multi_threaded"], false);
}

#[test]
fn verify_passes_and_records_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let run = ok(&["verify", "--out", s(&out)]);
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert_eq!(stdout.lines().last(), Some("PASS"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert_eq!(manifest(&out)["subcommand"], "verify");
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!ncbf(&["gen-data", "--count", "1", "--bogus", "--out", "x"]).status.success());
    assert!(!ncbf(&["frobnicate"]).status.success());
    let tmp = tempfile::tempdir().unwrap();
    let odd = ncbf(&["pattern", "--desired", "8", "--out", s(&tmp.path().join("p"))]);
    assert!(!odd.status.success());
    let missing = ncbf(&["train", "--loss", "phase", "--data", s(&tmp.path().join("none")), "--out", s(tmp.path())]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("loading dataset"));
}
