//! Benchmark runs: detection quality on a synthetic stream with distractors,
//! classification accuracy per variant, and per-inference energy.
//!
//! `bench.json` layout (version 1):
//!
//! ```text
//! {
//!   "version": 1,
//!   "seed": u64,
//!   "calibration": null | { "theta": f64, "rate": f64, "degenerate": bool },
//!   "detection": null | {
//!     "samples", "actions", "distractors",
//!     "methods": [ { "method", "recall", "precision", "n_truth", "n_detected",
//!                    "distractor_hits", "discards", "op_counts" } ]
//!   },
//!   "classification": [ { "variant", "train_segments", "test_segments", "epochs",
//!                         "runs": [ { "seed", "final_test_acc", "best_test_acc" } ],
//!                         "mean_test_acc" } ],
//!   "energy": null | { "variant", "inferences", "mean_ac", "mean_mac", "mean_total_pj",
//!                      "mean_fc_out_pj", "dense_fc_out_pj", "fc_out_ratio" }
//! }
//! ```

use microgest::detect::{DetectionMatch, Interval, OpCounts};
use microgest::encode::ThetaCalibration;
use microgest::pipeline::{
    calibrate, detect, encode_signal, preprocess, score_detection, segment_samples, train_classifier, DetectMethod,
    PipelineConfig, TrainOutcome, Variant,
};
use microgest::signal::CalibrationProfile;
use microgest::snn::{count_ops, dense_fc_out_fj, EnergyModel, SnnConfig, SnnModel};
use microgest::synth::{calibration_session, generate_dataset, generate_stream, SynthConfig};
use microgest::train::{Sample, TrainConfig};
use microgest::{Result, SnnModel64};
use serde::{Deserialize, Serialize};

use crate::config::Settings;

pub const BENCH_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub theta: f64,
    pub rate: f64,
    pub degenerate: bool,
}

impl From<&ThetaCalibration<f64>> for CalibrationSummary {
    fn from(t: &ThetaCalibration<f64>) -> Self {
        Self { theta: t.theta, rate: t.rate, degenerate: t.degenerate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: DetectMethod,
    pub recall: f64,
    pub precision: f64,
    pub n_truth: usize,
    pub n_detected: usize,
    pub distractor_hits: usize,
    pub discards: usize,
    pub op_counts: Option<OpCounts>,
    #[serde(skip)]
    pub matches: Vec<DetectionMatch>,
    #[serde(skip)]
    pub intervals: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionBench {
    pub samples: usize,
    pub actions: usize,
    pub distractors: usize,
    pub methods: Vec<MethodScore>,
}

impl DetectionBench {
    pub fn method(&self, m: DetectMethod) -> Option<&MethodScore> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub final_test_acc: f64,
    pub best_test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: Variant,
    pub train_segments: usize,
    pub test_segments: usize,
    pub epochs: usize,
    pub runs: Vec<SeedRun>,
    pub mean_test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBench {
    pub variant: Variant,
    pub inferences: usize,
    pub mean_ac: f64,
    pub mean_mac: f64,
    pub mean_total_pj: f64,
    pub mean_fc_out_pj: f64,
    pub dense_fc_out_pj: f64,
    pub fc_out_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u32,
    pub seed: u64,
    /// Present when the profile was calibrated from the generator.
    pub calibration: Option<CalibrationSummary>,
    pub detection: Option<DetectionBench>,
    pub classification: Vec<VariantResult>,
    pub energy: Option<EnergyBench>,
}

/// Calibration from the generator's rest and full-contraction recordings.
pub fn synthetic_calibration(
    synth: &SynthConfig,
    pipe: &PipelineConfig<f64>,
    seed: u64,
) -> Result<(CalibrationProfile<f64>, ThetaCalibration<f64>)> {
    let s = calibration_session::<f64>(synth, seed)?;
    calibrate(&s.neutral, &s.action, pipe)
}

/// Scores all three detectors on one stream.
pub fn detection_bench(
    synth: &SynthConfig,
    seed: u64,
    profile: &CalibrationProfile<f64>,
    settings: &Settings,
) -> Result<DetectionBench> {
    let stream = generate_stream::<f64>(synth, seed)?;
    let spikes = encode_signal(&stream.signal, profile, &settings.pipeline)?;
    let rect = preprocess(&stream.signal, &settings.pipeline)?;
    let methods = [DetectMethod::TadLif, DetectMethod::SpikeThreshold, DetectMethod::AmpThreshold]
        .into_iter()
        .map(|m| {
            let det = detect(m, &spikes, &rect, profile, &settings.pipeline, &settings.baseline)?;
            let score = score_detection(&det, &stream.labels, &stream.distractors);
            Ok(MethodScore {
                method: m,
                recall: score.report.recall,
                precision: score.report.precision,
                n_truth: score.report.n_truth,
                n_detected: score.report.n_detected,
                distractor_hits: score.distractor_hits,
                discards: score.discards,
                op_counts: det.ops,
                matches: score.report.matches,
                intervals: det.intervals,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DetectionBench {
        samples: stream.signal.len(),
        actions: stream.labels.len(),
        distractors: stream.distractors.len(),
        methods,
    })
}

/// Encoded train and test sets of one variant.
pub struct VariantData {
    pub variant: Variant,
    pub snn: SnnConfig<f64>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn variant_data(
    variant: Variant,
    settings: &Settings,
    profile: &CalibrationProfile<f64>,
) -> Result<VariantData> {
    let data = generate_dataset::<f64>(&settings.dataset_synth(), settings.seed, settings.dataset.split)?;
    let (pipe, snn) = variant.apply(&settings.pipeline, &settings.snn, settings.seed);
    Ok(VariantData {
        variant,
        train: segment_samples(&data.train, profile, &pipe, &snn)?,
        test: segment_samples(&data.test, profile, &pipe, &snn)?,
        snn,
    })
}

/// Training seed of run `i`.
pub fn run_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

pub fn train_variant(
    data: &VariantData,
    classes: usize,
    train: &TrainConfig<f64>,
    seed: u64,
) -> Result<TrainOutcome<f64>> {
    let tcfg = TrainConfig { seed, ..train.clone() };
    train_classifier(&data.train, &data.test, classes, &data.snn, &tcfg)
}

/// Trains `runs` seeds of one variant; returns the summary and the first model.
pub fn classification_bench(
    data: &VariantData,
    settings: &Settings,
    runs: usize,
) -> Result<(VariantResult, SnnModel64)> {
    let mut seeds = Vec::with_capacity(runs);
    let mut first = None;
    for i in 0..runs {
        let seed = run_seed(settings.seed, i);
        let out = train_variant(data, settings.synth.classes, &settings.train, seed)?;
        log::info!("{} seed {seed}: final test accuracy {:.3}", data.variant, out.final_test_acc());
        seeds.push(SeedRun { seed, final_test_acc: out.final_test_acc(), best_test_acc: out.best_test_acc() });
        first.get_or_insert(out.model);
    }
    let mean = seeds.iter().map(|r| r.final_test_acc).sum::<f64>() / seeds.len().max(1) as f64;
    let result = VariantResult {
        variant: data.variant,
        train_segments: data.train.len(),
        test_segments: data.test.len(),
        epochs: settings.train.epochs,
        runs: seeds,
        mean_test_acc: mean,
    };
    let model = first.ok_or_else(|| microgest::Error::Input("no training runs requested".into()))?;
    Ok((result, model))
}

/// Classifier energy averaged over `samples`, against a dense output layer.
pub fn energy_bench(variant: Variant, model: &SnnModel<f64>, samples: &[Sample]) -> Result<EnergyBench> {
    let em = EnergyModel::default();
    let (mut ac, mut mac, mut total, mut fc_out) = (0u64, 0u64, 0u64, 0u64);
    for (f, _) in samples {
        let out = model.forward(f)?;
        let r = count_ops(model, &out.record);
        ac += r.ac_count;
        mac += r.mac_count;
        total += r.total_fj;
        fc_out += em.cost_fj(r.stages.fc_out);
    }
    let n = samples.len().max(1) as f64;
    let dense = dense_fc_out_fj(model, &em) as f64 / 1000.0;
    let mean_fc_out_pj = fc_out as f64 / 1000.0 / n;
    Ok(EnergyBench {
        variant,
        inferences: samples.len(),
        mean_ac: ac as f64 / n,
        mean_mac: mac as f64 / n,
        mean_total_pj: total as f64 / 1000.0 / n,
        mean_fc_out_pj,
        dense_fc_out_pj: dense,
        fc_out_ratio: mean_fc_out_pj / dense,
    })
}
