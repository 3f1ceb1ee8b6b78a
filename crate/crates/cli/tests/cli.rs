use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use microgest::detect::{DEFAULT_BETA, DEFAULT_L_MAX, DEFAULT_L_MIN, DEFAULT_T_S, DEFAULT_U_MAX, DEFAULT_U_TH};
use microgest::encode::{DEFAULT_N_TRAINS, DEFAULT_R_MAX, DEFAULT_THETA_MIN};
use microgest::signal::DEFAULT_ALPHA;
use microgest::snn::{DEFAULT_BIN, DEFAULT_HIDDEN, DEFAULT_LIF_BETA, DEFAULT_POPULATION, DEFAULT_T_FIX, DEFAULT_T_SIM};
use microgest::train::{DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_K_SLOPE, DEFAULT_LEARNING_RATE};
use serde_json::Value;

fn microgest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microgest")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = microgest(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> (i32, String) {
    let out = microgest(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 4] = ["--classes", "2", "--actions-per-class", "3"];

fn small_stream(dir: &Path) {
    let mut args = vec!["synth", "--seed", "42", "--out", p(dir)];
    args.extend(SMALL);
    ok(&args);
}

#[test]
fn synth_writes_three_identical_files_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    small_stream(&a);
    small_stream(&b);
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["labels.csv", "run.json", "stream.semg"]);
    for n in ["labels.csv", "stream.semg"] {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let (ma, mb) = (json(&a.join("run.json")), json(&b.join("run.json")));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["seed"], 42);
    assert_eq!(ma["config"]["synth.classes"], 2);
}

#[test]
fn exit_codes_follow_error_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");

    let (c, err) = code(&["synth", "--classes", "0", "--out", p(&out)]);
    assert_eq!(c, 1);
    assert!(err.contains("synth.classes"), "{err}");

    let (c, err) = code(&["synth", "--set", "tad.nope=1", "--out", p(&out)]);
    assert_eq!(c, 1);
    assert!(err.contains("tad.nope"), "{err}");

    assert_eq!(code(&["frobnicate"]).0, 1);
    assert_eq!(code(&["--help"]).0, 0);

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let (c, err) = code(&["synth", "--out", p(&blocker.join("sub"))]);
    assert_eq!(c, 2);
    assert!(err.contains("file"), "{err}");

    let stream = tmp.path().join("s");
    small_stream(&stream);
    let (c, err) = code(&[
        "infer",
        "--input",
        p(&stream.join("stream.semg")),
        "--model",
        p(&tmp.path().join("missing.json")),
        "--profile",
        p(&tmp.path().join("missing-profile.json")),
        "--out",
        p(&out),
    ]);
    assert_eq!(c, 3, "{err}");
    assert_eq!(code(&["encode", "--input", p(&stream.join("stream.semg")), "--out", p(&out)]).0, 3);
}

#[test]
fn version_mismatch_is_a_state_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cal = tmp.path().join("cal");
    ok(&["calibrate", "--out", p(&cal)]);
    let profile = cal.join("profile.json");
    let mut v = json(&profile);
    assert_eq!(v["version"], 1);
    v["version"] = 2.into();
    fs::write(&profile, v.to_string()).unwrap();

    let stream = tmp.path().join("s");
    small_stream(&stream);
    let (c, err) = code(&[
        "encode",
        "--input",
        p(&stream.join("stream.semg")),
        "--profile",
        p(&profile),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(c, 3);
    assert!(err.contains("version"), "{err}");
}

#[test]
fn help_prints_module_defaults() {
    let text = String::from_utf8(ok(&["--help"]).stdout).unwrap();
    let table: BTreeMap<&str, &str> = text
        .lines()
        .filter_map(|l| l.trim_start().split_once(" = "))
        .map(|(k, v)| (k.trim(), v.split_whitespace().next().unwrap_or("")))
        .collect();
    let expect = |key: &str, value: String| {
        assert_eq!(table.get(key).copied(), Some(value.as_str()), "{key}");
    };
    expect("signal.alpha", DEFAULT_ALPHA.to_string());
    expect("encode.n_trains", DEFAULT_N_TRAINS.to_string());
    expect("encode.theta_min", DEFAULT_THETA_MIN.to_string());
    expect("encode.r_max", DEFAULT_R_MAX.to_string());
    expect("tad.t_s", DEFAULT_T_S.to_string());
    expect("tad.beta", DEFAULT_BETA.to_string());
    expect("tad.u_max", DEFAULT_U_MAX.to_string());
    expect("tad.u_th", DEFAULT_U_TH.to_string());
    expect("tad.l_min", DEFAULT_L_MIN.to_string());
    expect("tad.l_max", DEFAULT_L_MAX.to_string());
    expect("snn.hidden", DEFAULT_HIDDEN.to_string());
    expect("snn.population", DEFAULT_POPULATION.to_string());
    expect("snn.beta", DEFAULT_LIF_BETA.to_string());
    expect("snn.t_sim", DEFAULT_T_SIM.to_string());
    expect("solver.bin", DEFAULT_BIN.to_string());
    expect("solver.t_fix", DEFAULT_T_FIX.to_string());
    expect("train.k_slope", DEFAULT_K_SLOPE.to_string());
    expect("train.learning_rate", DEFAULT_LEARNING_RATE.to_string());
    expect("train.epochs", DEFAULT_EPOCHS.to_string());
    expect("train.batch_size", DEFAULT_BATCH_SIZE.to_string());
    expect("filter.low_hz", "20".into());
    expect("filter.high_hz", "500".into());
    expect("filter.order", "4".into());

    let sub = String::from_utf8(ok(&["detect", "--help"]).stdout).unwrap();
    assert!(sub.contains("tad-lif"));
    assert!(sub.contains("tad.l_max"));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "seed = 7\n[synth]\nclasses = 3\nactions_per_class = 2\n").unwrap();

    let a = tmp.path().join("a");
    ok(&["synth", "--config", p(&cfg), "--out", p(&a)]);
    let m = json(&a.join("run.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["synth.classes"], 3);

    let b = tmp.path().join("b");
    ok(&["synth", "--config", p(&cfg), "--set", "synth.classes=2", "--seed", "9", "--out", p(&b)]);
    let m = json(&b.join("run.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["synth.classes"], 2);
    assert_eq!(m["config"]["synth.actions_per_class"], 2);

    assert_eq!(code(&["synth", "--config", p(&tmp.path().join("none.toml")), "--out", p(&a)]).0, 2);
    fs::write(&cfg, "[tad]\nbogus = 1\n").unwrap();
    assert_eq!(code(&["synth", "--config", p(&cfg), "--out", p(&a)]).0, 1);
}

#[test]
fn detect_report_has_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s");
    small_stream(&s);
    ok(&["calibrate", "--out", p(&tmp.path().join("cal"))]);
    let profile = tmp.path().join("cal/profile.json");
    for method in ["tad-lif", "spike-threshold", "amp-threshold"] {
        let out = tmp.path().join(method);
        ok(&[
            "detect",
            "--method",
            method,
            "--input",
            p(&s.join("stream.semg")),
            "--labels",
            p(&s.join("labels.csv")),
            "--profile",
            p(&profile),
            "--out",
            p(&out),
        ]);
        let r = json(&out.join("detection.json"));
        assert_eq!(r["version"], 1);
        assert_eq!(r["method"], method);
        assert_eq!(r["n_truth"], 6);
        assert!(r["recall"].is_f64() && r["precision"].is_f64(), "{r}");
        assert!(r["intervals"].is_array());
        assert_eq!(r["op_counts"].is_null(), method != "tad-lif");
    }
}

#[test]
fn train_then_infer_on_a_quiet_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let model_dir = tmp.path().join("m");
    let tiny = [
        "--set", "snn.hidden=8", "--set", "snn.population=2", "--set", "dataset.actions_per_class=3",
        "--set", "synth.classes=2",
    ];
    let mut args = vec!["train", "--epochs", "2", "--out", p(&model_dir)];
    args.extend(tiny);
    ok(&args);
    assert_eq!(fs::read_to_string(model_dir.join("train_log.csv")).unwrap().lines().count(), 3);
    let model = json(&model_dir.join("model.json"));
    assert_eq!(model["version"], 1);
    assert_eq!(model["dims"]["classes"], 2);

    let quiet = tmp.path().join("q");
    ok(&["synth", "--actions-per-class", "0", "--set", "synth.stream_ms=8000", "--out", p(&quiet)]);
    ok(&["calibrate", "--out", p(&tmp.path().join("cal"))]);
    let out = tmp.path().join("i");
    ok(&[
        "infer",
        "--input",
        p(&quiet.join("stream.semg")),
        "--model",
        p(&model_dir.join("model.json")),
        "--profile",
        p(&tmp.path().join("cal/profile.json")),
        "--out",
        p(&out),
    ]);
    let r = json(&out.join("predictions.json"));
    assert_eq!(r["predictions"].as_array().unwrap().len(), 0);
    let stages = &r["energy"]["stages"];
    for s in ["fc_in", "lif_hidden", "fc_out", "lif_out"] {
        assert_eq!(stages[s]["ac"], 0, "{s}");
        assert_eq!(stages[s]["mac"], 0, "{s}");
    }
    assert!(stages["encode"]["ac"].as_u64().unwrap() > 0);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str, dir: &Path| {
        ok(&[
            "bench",
            "--threads",
            threads,
            "--skip-detection",
            "--set",
            "snn.hidden=8",
            "--set",
            "snn.population=2",
            "--set",
            "dataset.actions_per_class=3",
            "--set",
            "synth.classes=2",
            "--set",
            "train.epochs=2",
            "--ablate",
            "no-population",
            "--out",
            p(dir),
        ]);
        fs::read(dir.join("bench.json")).unwrap()
    };
    let a = run("1", &tmp.path().join("a"));
    let b = run("3", &tmp.path().join("b"));
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["version"], 1);
    let variants: Vec<&str> =
        report["classification"].as_array().unwrap().iter().map(|v| v["variant"].as_str().unwrap()).collect();
    assert_eq!(variants, ["full", "no-population"]);
}
