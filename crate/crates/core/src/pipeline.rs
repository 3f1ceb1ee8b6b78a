//! End-to-end wiring: preprocessing, calibration, encoding, detection,
//! classification and per-inference energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    amp_threshold_detect, evaluate_detection, spike_threshold_detect, tad_detect_run, DetectionReport, Interval,
    LabeledInterval, OpCounts, TadConfig, DEFAULT_MIN_OVERLAP, DEFAULT_WINDOW_MS, DEFAULT_OVERLAP,
};
use crate::encode::{calibrate_profile, multi_delta_encode, rate_encode, EncoderConfig, SpikeTensor, ThetaCalibration};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{
    adaptive_normalize_floored, bandpass_filter, compute_calibration, rectify, CalibrationProfile, FilterConfig,
    SignalBuffer, DEFAULT_ALPHA,
};
use crate::snn::{
    classifier_ops, decode_population, detect_ops, encode_ops, EnergyModel, EnergyReport, FeatureVector, SnnConfig,
    SnnModel, SolverMode, StageBreakdown,
};
use crate::synth::Segment;
use crate::train::{evaluate, mean_loss, Sample, TrainConfig, Trainer};

/// Filter settling time skipped at the start of calibration recordings.
pub const DEFAULT_SETTLE_MS: f64 = 100.0;
/// Spike-threshold baseline: a window is a detection above this many spikes.
pub const DEFAULT_COUNT_THRESHOLD: usize = 600;
/// Amplitude baseline threshold, in units of the neutral channel median.
pub const DEFAULT_AMP_THRESHOLD: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coding {
    /// Adaptive multi-delta coding (N = 1 gives plain delta coding).
    MultiDelta,
    /// Bernoulli rate coding of the normalized amplitude.
    Rate { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig<T> {
    pub filter: FilterConfig,
    pub alpha: T,
    /// Substitute for zero channel medians; `None` makes them an error.
    pub median_floor: Option<T>,
    pub encoder: EncoderConfig<T>,
    pub coding: Coding,
    pub tad: TadConfig<T>,
    pub settle_ms: f64,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            alpha: T::of(DEFAULT_ALPHA),
            median_floor: None,
            encoder: EncoderConfig::default(),
            coding: Coding::MultiDelta,
            tad: TadConfig::default(),
            settle_ms: DEFAULT_SETTLE_MS,
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        self.filter.validate(rate_hz)?;
        if !(self.alpha > T::zero()) {
            return Err(Error::config("signal.alpha", "must be > 0"));
        }
        if let Some(f) = self.median_floor {
            if !(f > T::zero()) {
                return Err(Error::config("signal.median_floor", "must be > 0"));
            }
        }
        if !(self.settle_ms.is_finite() && self.settle_ms >= 0.0) {
            return Err(Error::config("signal.settle_ms", "must be >= 0"));
        }
        self.encoder.validate()?;
        self.tad.validate()
    }
}

/// Band-pass then full-wave rectification.
pub fn preprocess<T: Real>(raw: &SignalBuffer<T>, cfg: &PipelineConfig<T>) -> Result<SignalBuffer<T>> {
    Ok(rectify(&bandpass_filter(raw, &cfg.filter)?))
}

fn settled<T: Real>(x: &SignalBuffer<T>, settle_ms: f64) -> Result<SignalBuffer<T>> {
    let skip = (settle_ms * x.rate_hz() / 1000.0).round() as usize;
    if skip >= x.len() {
        return Err(Error::Calibration(format!(
            "recording of {} samples is shorter than the {skip}-sample settle time",
            x.len()
        )));
    }
    x.slice(skip, x.len())
}

/// Neutral medians from a rest recording, then the encoder threshold from an
/// action recording normalized with those medians.
pub fn calibrate<T: Real>(
    neutral_raw: &SignalBuffer<T>,
    action_raw: &SignalBuffer<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(CalibrationProfile<T>, ThetaCalibration<T>)> {
    cfg.validate(neutral_raw.rate_hz())?;
    if neutral_raw.num_channels() != action_raw.num_channels() {
        return Err(Error::Shape("neutral and action recordings differ in channel count".into()));
    }
    let neutral = settled(&preprocess(neutral_raw, cfg)?, cfg.settle_ms)?;
    let mut profile = compute_calibration(&neutral, cfg.alpha)?;
    let action = settled(&preprocess(action_raw, cfg)?, cfg.settle_ms)?;
    let norm = adaptive_normalize_floored(&action, &profile, cfg.median_floor)?;
    let theta = calibrate_profile(&mut profile, &norm, &cfg.encoder)?;
    Ok((profile, theta))
}

/// Raw signal to spikes: preprocess, normalize, encode.
pub fn encode_signal<T: Real>(
    raw: &SignalBuffer<T>,
    profile: &CalibrationProfile<T>,
    cfg: &PipelineConfig<T>,
) -> Result<SpikeTensor> {
    let norm = adaptive_normalize_floored(&preprocess(raw, cfg)?, profile, cfg.median_floor)?;
    match cfg.coding {
        Coding::MultiDelta => multi_delta_encode(&norm, profile, &cfg.encoder),
        Coding::Rate { seed } => rate_encode(&norm, cfg.encoder.n_trains, seed),
    }
}

/// Spikes of a labeled segment with its context columns dropped.
pub fn encode_segment<T: Real>(
    seg: &Segment<T>,
    profile: &CalibrationProfile<T>,
    cfg: &PipelineConfig<T>,
) -> Result<SpikeTensor> {
    let spikes = encode_signal(&seg.signal, profile, cfg)?;
    spikes.slice_steps(seg.lead, spikes.steps())
}

/// Classifier samples for a set of labeled segments.
pub fn segment_samples<T: Real>(
    segments: &[Segment<T>],
    profile: &CalibrationProfile<T>,
    cfg: &PipelineConfig<T>,
    snn: &SnnConfig<T>,
) -> Result<Vec<Sample>> {
    segments
        .par_iter()
        .map(|s| Ok((snn.solver.features(&encode_segment(s, profile, cfg)?)?, s.class_id)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectMethod {
    TadLif,
    SpikeThreshold,
    AmpThreshold,
}

impl std::str::FromStr for DetectMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tad-lif" => Ok(Self::TadLif),
            "spike-threshold" => Ok(Self::SpikeThreshold),
            "amp-threshold" => Ok(Self::AmpThreshold),
            other => Err(Error::config(
                "detect.method",
                format!("unknown method `{other}` (tad-lif, spike-threshold, amp-threshold)"),
            )),
        }
    }
}

impl std::fmt::Display for DetectMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TadLif => "tad-lif",
            Self::SpikeThreshold => "spike-threshold",
            Self::AmpThreshold => "amp-threshold",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub window_ms: f64,
    pub overlap: f64,
    pub count_threshold: usize,
    /// Multiple of the mean neutral median.
    pub amp_threshold: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            window_ms: DEFAULT_WINDOW_MS,
            overlap: DEFAULT_OVERLAP,
            count_threshold: DEFAULT_COUNT_THRESHOLD,
            amp_threshold: DEFAULT_AMP_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub method: DetectMethod,
    pub intervals: Vec<Interval>,
    /// TAD-LIF operation counts; `None` for the baselines.
    pub ops: Option<OpCounts>,
    pub discards: usize,
}

/// Runs one detector over an encoded stream. The amplitude baseline needs
/// the rectified signal as well.
pub fn detect<T: Real>(
    method: DetectMethod,
    spikes: &SpikeTensor,
    rectified: &SignalBuffer<T>,
    profile: &CalibrationProfile<T>,
    cfg: &PipelineConfig<T>,
    baseline: &BaselineConfig,
) -> Result<Detection> {
    let rate = rectified.rate_hz();
    Ok(match method {
        DetectMethod::TadLif => {
            let run = tad_detect_run(spikes, &cfg.tad)?;
            Detection {
                method,
                intervals: run.segments.iter().map(|s| Interval::new(s.onset_sample, s.offset_sample())).collect(),
                ops: Some(run.ops),
                discards: run.discards.len(),
            }
        }
        DetectMethod::SpikeThreshold => Detection {
            method,
            intervals: spike_threshold_detect(spikes, rate, cfg.tad.t_s, baseline.window_ms, baseline.count_threshold)?,
            ops: None,
            discards: 0,
        },
        DetectMethod::AmpThreshold => {
            let m = profile.median_per_channel.iter().map(|v| v.as_f64()).sum::<f64>()
                / profile.median_per_channel.len().max(1) as f64;
            Detection {
                method,
                intervals: amp_threshold_detect(rectified, T::of(baseline.amp_threshold * m), baseline.window_ms, baseline.overlap)?,
                ops: None,
                discards: 0,
            }
        }
    })
}

/// Scores a detection against ground truth.
pub fn score_detection(det: &Detection, truth: &[LabeledInterval], distractors: &[Interval]) -> DetectionScore {
    let truth_iv: Vec<Interval> = truth.iter().map(|l| l.interval()).collect();
    let mut report = evaluate_detection(&det.intervals, &truth_iv, DEFAULT_MIN_OVERLAP);
    report.op_counts = det.ops;
    let distractor_hits = det
        .intervals
        .iter()
        .filter(|d| distractors.iter().any(|x| x.overlap(d) > 0))
        .count();
    DetectionScore {
        method: det.method,
        report,
        distractor_hits,
        discards: det.discards,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub method: DetectMethod,
    pub report: DetectionReport,
    /// Detections overlapping a steady-state distractor.
    pub distractor_hits: usize,
    pub discards: usize,
}

/// Benchmark variants of the classifier pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    /// Plain delta coding, N = 1.
    NormalDelta,
    RateCoding,
    /// One output neuron per class.
    NoPopulation,
    /// Raw spikes flattened, no additive solvers.
    NoSolvers,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NormalDelta,
        Variant::RateCoding,
        Variant::NoPopulation,
        Variant::NoSolvers,
    ];

    /// Configurations of this variant derived from the full ones.
    pub fn apply<T: Real>(self, pipe: &PipelineConfig<T>, snn: &SnnConfig<T>, seed: u64) -> (PipelineConfig<T>, SnnConfig<T>) {
        let (mut p, mut s) = (pipe.clone(), snn.clone());
        match self {
            Variant::Full => {}
            Variant::NormalDelta => p.encoder.n_trains = 1,
            Variant::RateCoding => p.coding = Coding::Rate { seed },
            Variant::NoPopulation => s.population = 1,
            Variant::NoSolvers => s.solver.mode = SolverMode::Raw,
        }
        (p, s)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "normal-delta" => Ok(Self::NormalDelta),
            "rate-coding" => Ok(Self::RateCoding),
            "no-population" => Ok(Self::NoPopulation),
            "no-solvers" => Ok(Self::NoSolvers),
            other => Err(Error::config(
                "bench.ablate",
                format!("unknown variant `{other}` (full, normal-delta, rate-coding, no-population, no-solvers)"),
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::NormalDelta => "normal-delta",
            Self::RateCoding => "rate-coding",
            Self::NoPopulation => "no-population",
            Self::NoSolvers => "no-solvers",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub model: SnnModel<T>,
    pub log: Vec<EpochLog>,
}

impl<T> TrainOutcome<T> {
    pub fn final_test_acc(&self) -> f64 {
        self.log.last().map_or(0.0, |l| l.test_acc)
    }

    pub fn best_test_acc(&self) -> f64 {
        self.log.iter().map(|l| l.test_acc).fold(0.0, f64::max)
    }
}

/// Initializes a model from `seed` and trains it, scoring `test` after
/// every epoch.
pub fn train_classifier<T: Real>(
    train: &[Sample],
    test: &[Sample],
    classes: usize,
    snn: &SnnConfig<T>,
    tcfg: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    let input_dim = train
        .first()
        .ok_or_else(|| Error::Input("training set is empty".into()))?
        .0
        .len();
    let mut model = SnnModel::init(input_dim, classes, snn, tcfg.seed)?;
    let mut trainer = Trainer::new(tcfg.clone())?;
    let mut log = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        let m = trainer.train_epoch(&mut model, train)?;
        let test_acc = evaluate(&model, test)?;
        log::info!(
            "epoch {epoch}: loss {:.4} train_acc {:.3} test_acc {:.3}",
            m.mean_loss,
            m.accuracy,
            test_acc
        );
        log.push(EpochLog {
            epoch,
            mean_loss: m.mean_loss,
            train_acc: m.accuracy,
            test_acc,
        });
    }
    Ok(TrainOutcome { model, log })
}

/// Mean loss of `model` on `data` under the configured loss.
pub fn dataset_loss<T: Real>(model: &SnnModel<T>, data: &[Sample], tcfg: &TrainConfig<T>) -> Result<f64> {
    mean_loss(model, data, tcfg.loss_kind)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub onset_sample: usize,
    pub length: usize,
    pub class_id: usize,
    pub class_sums: Vec<f64>,
    /// Classifier stages of this inference.
    pub energy: EnergyReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub predictions: Vec<Prediction>,
    pub ops: OpCounts,
    /// Whole-stream energy: encode and detect over every sample plus each
    /// classified segment.
    pub energy: EnergyReport,
}

/// Streaming inference: encode, detect, pad through the solvers, forward,
/// decode.
pub fn infer<T: Real>(
    raw: &SignalBuffer<T>,
    profile: &CalibrationProfile<T>,
    model: &SnnModel<T>,
    cfg: &PipelineConfig<T>,
) -> Result<InferenceReport> {
    let spikes = encode_signal(raw, profile, cfg)?;
    let run = tad_detect_run(&spikes, &cfg.tad)?;
    let energy_model = EnergyModel::default();
    let mut stages = StageBreakdown {
        encode: encode_ops(raw.len() as u64, raw.num_channels() as u64, spikes.trains() as u64),
        detect: detect_ops(run.ops.active_steps),
        ..Default::default()
    };
    let predictions = run
        .segments
        .par_iter()
        .map(|seg| {
            let f: FeatureVector = model.solver.features(&seg.spikes)?;
            let out = model.forward(&f)?;
            let ops = classifier_ops(model, &out.record);
            Ok(Prediction {
                onset_sample: seg.onset_sample,
                length: seg.length,
                class_id: decode_population(&out.class_sums),
                class_sums: out.class_sums.iter().map(|v| v.as_f64()).collect(),
                energy: EnergyReport::from_stages(ops, &energy_model),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for p in &predictions {
        stages += p.energy.stages;
    }
    Ok(InferenceReport {
        predictions,
        ops: run.ops,
        energy: EnergyReport::from_stages(stages, &energy_model),
    })
}

/// Energy of classifying one segment of `steps` columns, including the
/// encoder and detector work spent on it.
pub fn inference_energy<T: Real>(
    model: &SnnModel<T>,
    spikes: &SpikeTensor,
    active_steps: u64,
    f: &FeatureVector,
) -> Result<EnergyReport> {
    let out = model.forward(f)?;
    let mut stages = classifier_ops(model, &out.record);
    stages.encode = encode_ops(spikes.steps() as u64, spikes.channels() as u64, spikes.trains() as u64);
    stages.detect = detect_ops(active_steps);
    Ok(EnergyReport::from_stages(stages, &EnergyModel::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{calibration_session, generate_stream, SynthConfig};

    fn calibrated(cfg: &SynthConfig) -> (CalibrationProfile<f64>, ThetaCalibration<f64>) {
        let s = calibration_session::<f64>(cfg, 1).unwrap();
        calibrate(&s.neutral, &s.action, &PipelineConfig::default()).unwrap()
    }

    #[test]
    fn calibration_yields_positive_medians_and_theta() {
        let (p, t) = calibrated(&SynthConfig::default());
        assert_eq!(p.median_per_channel.len(), 4);
        assert!(p.median_per_channel.iter().all(|&m| m > 0.0));
        assert!(!t.degenerate);
        assert_eq!(p.theta_min, Some(t.theta));
    }

    #[test]
    fn short_recording_rejected() {
        let x = SignalBuffer::new(2000.0, vec![vec![0.0f64; 100]]).unwrap();
        assert!(matches!(calibrate(&x, &x, &PipelineConfig::default()), Err(Error::Calibration(_))));
    }

    #[test]
    fn uncalibrated_profile_is_state_error() {
        let cfg = SynthConfig { actions_per_class: 1, ..Default::default() };
        let s = generate_stream::<f64>(&cfg, 0).unwrap();
        let (mut p, _) = calibrated(&cfg);
        p.theta_min = None;
        assert!(matches!(encode_signal(&s.signal, &p, &PipelineConfig::default()), Err(Error::State(_))));
    }

    #[test]
    fn tad_finds_most_actions_on_a_short_stream() {
        let cfg = SynthConfig { actions_per_class: 3, ..Default::default() };
        let s = generate_stream::<f64>(&cfg, 7).unwrap();
        let (p, _) = calibrated(&cfg);
        let pc = PipelineConfig::default();
        let spikes = encode_signal(&s.signal, &p, &pc).unwrap();
        let rect = preprocess(&s.signal, &pc).unwrap();
        let det = detect(DetectMethod::TadLif, &spikes, &rect, &p, &pc, &BaselineConfig::default()).unwrap();
        let score = score_detection(&det, &s.labels, &s.distractors);
        assert!(score.report.recall >= 0.9, "{score:?}");
    }

    #[test]
    fn variants_round_trip_names() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
        for m in [DetectMethod::TadLif, DetectMethod::SpikeThreshold, DetectMethod::AmpThreshold] {
            assert_eq!(m.to_string().parse::<DetectMethod>().unwrap(), m);
        }
    }
}
