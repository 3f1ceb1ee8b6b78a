use std::path::Path;

use microgest::detect::{evaluate_detection, DetectionMatch, Interval, OpCounts, DEFAULT_MIN_OVERLAP};
use microgest::io;
use microgest::pipeline::{calibrate, detect, encode_signal, infer, preprocess, segment_samples, DetectMethod, Variant};
use microgest::signal::CalibrationProfile;
use microgest::snn::EnergyReport;
use microgest::synth::{calibration_session, dataset_from_stream, generate_dataset, generate_stream};
use microgest::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::bench::{
    classification_bench, detection_bench, energy_bench, synthetic_calibration, variant_data, BenchReport,
    CalibrationSummary, BENCH_VERSION,
};
use crate::config::Settings;
use crate::manifest::Run;

pub const REPORT_VERSION: u32 = 1;

fn require(path: &Path, what: &str, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::State(format!("{what} `{}` not found; {hint}", path.display())))
    }
}

/// Where a calibration profile comes from.
pub enum ProfileSource<'a> {
    File(&'a Path),
    Recordings(&'a Path, &'a Path),
    Synthetic,
    Missing,
}

fn resolve_profile(src: ProfileSource<'_>, settings: &Settings, run: &mut Run) -> Result<CalibrationProfile<f64>> {
    match src {
        ProfileSource::File(p) => {
            require(p, "calibration profile", "run `microgest calibrate` first")?;
            run.input(p);
            let profile: CalibrationProfile<f64> = io::load_profile(p)?;
            if profile.theta_min.is_none() {
                return Err(Error::State(format!("profile `{}` has no encoder threshold", p.display())));
            }
            Ok(profile)
        }
        ProfileSource::Recordings(n, a) => {
            require(n, "neutral recording", "pass an existing signal file")?;
            require(a, "action recording", "pass an existing signal file")?;
            run.input(n);
            run.input(a);
            let (profile, _) = calibrate(&io::load_signal(n)?, &io::load_signal(a)?, &settings.pipeline)?;
            Ok(profile)
        }
        ProfileSource::Synthetic => {
            run.seed("calibration", settings.seed);
            Ok(synthetic_calibration(&settings.synth, &settings.pipeline, settings.seed)?.0)
        }
        ProfileSource::Missing => Err(Error::State(
            "no calibration profile; pass --profile or --calibrate-from NEUTRAL ACTION".into(),
        )),
    }
}

fn load_input(path: &Path, run: &mut Run) -> Result<microgest::SignalBuffer64> {
    require(path, "input signal", "check the path")?;
    run.input(path);
    io::load_signal(path)
}

pub fn synth(settings: &Settings, out: &Path, calibration: bool) -> Result<()> {
    let mut run = Run::new("synth", out)?;
    run.seed("stream", settings.seed);
    if calibration {
        let s = calibration_session::<f64>(&settings.synth, settings.seed)?;
        io::save_signal(&run.output("neutral.semg"), &s.neutral)?;
        io::save_signal(&run.output("action.semg"), &s.action)?;
        run.summary = json!({ "neutral_samples": s.neutral.len(), "action_samples": s.action.len() });
    } else {
        let stream = generate_stream::<f64>(&settings.synth, settings.seed)?;
        io::save_signal(&run.output("stream.semg"), &stream.signal)?;
        io::save_labels(&run.output("labels.csv"), &stream.labels)?;
        run.summary = json!({
            "samples": stream.signal.len(),
            "actions": stream.labels.len(),
            "distractors": stream.distractors,
        });
    }
    run.finish(settings)?;
    Ok(())
}

pub fn calibrate_cmd(settings: &Settings, neutral: Option<&Path>, action: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = Run::new("calibrate", out)?;
    let (n, a) = match (neutral, action) {
        (Some(n), Some(a)) => {
            require(n, "neutral recording", "pass an existing signal file")?;
            require(a, "action recording", "pass an existing signal file")?;
            run.input(n);
            run.input(a);
            (io::load_signal(n)?, io::load_signal(a)?)
        }
        (None, None) => {
            run.seed("calibration", settings.seed);
            let s = calibration_session::<f64>(&settings.synth, settings.seed)?;
            (s.neutral, s.action)
        }
        _ => {
            return Err(Error::Config {
                key: "calibrate".into(),
                msg: "--neutral and --action must be given together".into(),
            })
        }
    };
    let (profile, theta) = calibrate(&n, &a, &settings.pipeline)?;
    io::save_profile(&run.output("profile.json"), &profile)?;
    run.summary = serde_json::to_value(CalibrationSummary::from(&theta)).expect("summary serializes");
    run.finish(settings)?;
    Ok(())
}

pub fn encode(settings: &Settings, input: &Path, profile: ProfileSource<'_>, out: &Path) -> Result<()> {
    let mut run = Run::new("encode", out)?;
    let signal = load_input(input, &mut run)?;
    let profile = resolve_profile(profile, settings, &mut run)?;
    let spikes = encode_signal(&signal, &profile, &settings.pipeline)?;
    io::save_spikes(&run.output("spikes.txt"), &spikes)?;
    run.summary = json!({ "steps": spikes.steps(), "spikes": spikes.count_ones() });
    run.finish(settings)?;
    Ok(())
}

#[derive(Serialize)]
struct DetectionFile {
    version: u32,
    method: DetectMethod,
    samples: usize,
    intervals: Vec<Interval>,
    discards: usize,
    op_counts: Option<OpCounts>,
    recall: Option<f64>,
    precision: Option<f64>,
    n_truth: Option<usize>,
    n_detected: usize,
    matches: Option<Vec<DetectionMatch>>,
}

pub fn detect_cmd(
    settings: &Settings,
    method: DetectMethod,
    input: &Path,
    labels: Option<&Path>,
    profile: ProfileSource<'_>,
    out: &Path,
) -> Result<()> {
    let mut run = Run::new("detect", out)?;
    let signal = load_input(input, &mut run)?;
    let profile = resolve_profile(profile, settings, &mut run)?;
    let truth = match labels {
        Some(p) => {
            require(p, "label file", "check the path")?;
            run.input(p);
            Some(io::load_labels(p)?)
        }
        None => None,
    };
    let spikes = encode_signal(&signal, &profile, &settings.pipeline)?;
    let rect = preprocess(&signal, &settings.pipeline)?;
    let det = detect(method, &spikes, &rect, &profile, &settings.pipeline, &settings.baseline)?;
    let report = truth.map(|t| {
        let iv: Vec<Interval> = t.iter().map(|l| l.interval()).collect();
        evaluate_detection(&det.intervals, &iv, DEFAULT_MIN_OVERLAP)
    });
    let file = DetectionFile {
        version: REPORT_VERSION,
        method,
        samples: signal.len(),
        n_detected: det.intervals.len(),
        intervals: det.intervals,
        discards: det.discards,
        op_counts: det.ops,
        recall: report.as_ref().map(|r| r.recall),
        precision: report.as_ref().map(|r| r.precision),
        n_truth: report.as_ref().map(|r| r.n_truth),
        matches: report.map(|r| r.matches),
    };
    io::save_json(&run.output("detection.json"), &file)?;
    run.summary = json!({ "detections": file.n_detected, "recall": file.recall, "precision": file.precision });
    run.finish(settings)?;
    Ok(())
}

pub struct TrainData<'a> {
    pub input: &'a Path,
    pub labels: &'a Path,
}

pub fn train(
    settings: &Settings,
    variant: Variant,
    data: Option<TrainData<'_>>,
    profile: ProfileSource<'_>,
    out: &Path,
) -> Result<()> {
    let mut run = Run::new("train", out)?;
    let profile = match (&data, profile) {
        (Some(_), ProfileSource::Synthetic) => resolve_profile(ProfileSource::Missing, settings, &mut run)?,
        (_, src) => resolve_profile(src, settings, &mut run)?,
    };
    let dataset = match data {
        Some(d) => {
            let signal = load_input(d.input, &mut run)?;
            require(d.labels, "label file", "check the path")?;
            run.input(d.labels);
            let labels = io::load_labels(d.labels)?;
            dataset_from_stream(&signal, &labels, settings.seed, settings.dataset.split)?
        }
        None => {
            run.seed("dataset", settings.seed);
            generate_dataset::<f64>(&settings.dataset_synth(), settings.seed, settings.dataset.split)?
        }
    };
    let classes = dataset.train.iter().chain(&dataset.test).map(|s| s.class_id + 1).max().unwrap_or(0);
    let (pipe, snn) = variant.apply(&settings.pipeline, &settings.snn, settings.seed);
    let train = segment_samples(&dataset.train, &profile, &pipe, &snn)?;
    let test = segment_samples(&dataset.test, &profile, &pipe, &snn)?;
    run.seed("train", settings.train.seed);
    let outcome = microgest::pipeline::train_classifier(&train, &test, classes, &snn, &settings.train)?;
    io::save_model(&run.output("model.json"), &outcome.model)?;
    io::save_train_log(&run.output("train_log.csv"), &outcome.log, settings.train.seed)?;
    run.summary = json!({
        "variant": variant,
        "train_segments": train.len(),
        "test_segments": test.len(),
        "final_test_acc": outcome.final_test_acc(),
    });
    run.finish(settings)?;
    Ok(())
}

#[derive(Serialize)]
struct PredictionFile {
    version: u32,
    samples: usize,
    predictions: Vec<microgest::pipeline::Prediction>,
    op_counts: OpCounts,
    energy: EnergyReport,
}

pub fn infer_cmd(settings: &Settings, input: &Path, model: &Path, profile: ProfileSource<'_>, out: &Path) -> Result<()> {
    let mut run = Run::new("infer", out)?;
    let signal = load_input(input, &mut run)?;
    require(model, "model file", "run `microgest train` first")?;
    run.input(model);
    let model: microgest::SnnModel64 = io::load_model(model)?;
    let profile = resolve_profile(profile, settings, &mut run)?;
    let report = infer(&signal, &profile, &model, &settings.pipeline)?;
    let file = PredictionFile {
        version: REPORT_VERSION,
        samples: signal.len(),
        predictions: report.predictions,
        op_counts: report.ops,
        energy: report.energy,
    };
    io::save_json(&run.output("predictions.json"), &file)?;
    run.summary = json!({ "predictions": file.predictions.len(), "total_pj": file.energy.total_pj });
    run.finish(settings)?;
    Ok(())
}

pub struct BenchOptions {
    pub variants: Vec<Variant>,
    pub detection: bool,
    pub classification: bool,
}

pub fn bench(settings: &Settings, opts: &BenchOptions, profile: ProfileSource<'_>, out: &Path) -> Result<()> {
    let mut run = Run::new("bench", out)?;
    let (profile, calibration) = match profile {
        ProfileSource::Synthetic => {
            run.seed("calibration", settings.seed);
            let (p, theta) = synthetic_calibration(&settings.synth, &settings.pipeline, settings.seed)?;
            (p, Some(CalibrationSummary::from(&theta)))
        }
        src => (resolve_profile(src, settings, &mut run)?, None),
    };
    let detection = if opts.detection {
        run.seed("detection_stream", settings.seed);
        Some(detection_bench(&settings.bench_synth(), settings.seed, &profile, settings)?)
    } else {
        None
    };
    let mut classification = Vec::new();
    let mut energy = None;
    if opts.classification {
        run.seed("dataset", settings.seed);
        for (i, &v) in opts.variants.iter().enumerate() {
            let data = variant_data(v, settings, &profile)?;
            let (result, model) = classification_bench(&data, settings, settings.bench.seeds)?;
            if i == 0 {
                energy = Some(energy_bench(v, &model, &data.test)?);
            }
            classification.push(result);
        }
        for i in 0..settings.bench.seeds {
            run.seed(&format!("train_{i}"), crate::bench::run_seed(settings.seed, i));
        }
    }
    let report = BenchReport {
        version: BENCH_VERSION,
        seed: settings.seed,
        calibration,
        detection,
        classification,
        energy,
    };
    io::save_json(&run.output("bench.json"), &report)?;
    run.summary = json!({
        "variants": opts.variants,
        "mean_test_acc": report.classification.iter().map(|c| c.mean_test_acc).collect::<Vec<_>>(),
    });
    run.finish(settings)?;
    Ok(())
}
