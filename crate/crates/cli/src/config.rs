//! Flat run configuration with dotted keys.
//!
//! Values are resolved as defaults, then a TOML file, then `--set key=value`
//! flags. Every key maps onto a field of the owning module's config type.

use std::collections::BTreeMap;
use std::path::Path;

use microgest::detect::TadConfig;
use microgest::pipeline::{BaselineConfig, Coding, PipelineConfig};
use microgest::snn::{SnnConfig, SolverMode};
use microgest::synth::SynthConfig;
use microgest::train::{LossKind, TrainConfig};
use microgest::Error;

/// Data split used by `train` and `bench`.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub actions_per_class: usize,
    pub split: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { actions_per_class: 75, split: 0.6667 }
    }
}

/// Detection stream and repetitions used by `bench`.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub distractors: usize,
    pub stream_ms: f64,
    pub seeds: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { distractors: 50, stream_ms: 200_000.0, seeds: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig<f64>,
    pub baseline: BaselineConfig,
    pub snn: SnnConfig<f64>,
    pub train: TrainConfig<f64>,
    pub dataset: DatasetConfig,
    pub bench: BenchConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            pipeline: PipelineConfig::default(),
            baseline: BaselineConfig::default(),
            snn: SnnConfig::default(),
            train: TrainConfig::default(),
            dataset: DatasetConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

trait Value: Sized {
    fn show(&self) -> String;
    fn parse(s: &str) -> Result<Self, String>;
}

impl Value for f64 {
    fn show(&self) -> String {
        self.to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.trim().parse().map_err(|_| format!("expected a number, got `{s}`"))
    }
}

impl Value for usize {
    fn show(&self) -> String {
        self.to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.trim().parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
    }
}

impl Value for u64 {
    fn show(&self) -> String {
        self.to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.trim().parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
    }
}

impl Value for bool {
    fn show(&self) -> String {
        self.to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.trim().parse().map_err(|_| format!("expected true or false, got `{s}`"))
    }
}

impl Value for Option<f64> {
    fn show(&self) -> String {
        self.map_or_else(|| "none".into(), |v| v.to_string())
    }
    fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "none" => Ok(None),
            v => f64::parse(v).map(Some),
        }
    }
}

impl Value for (f64, f64) {
    fn show(&self) -> String {
        format!("{},{}", self.0, self.1)
    }
    fn parse(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `min,max`, got `{s}`"))?;
        Ok((f64::parse(a)?, f64::parse(b)?))
    }
}

impl Value for SolverMode {
    fn show(&self) -> String {
        match self {
            SolverMode::Additive => "additive",
            SolverMode::Raw => "raw",
        }
        .into()
    }
    fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "additive" => Ok(SolverMode::Additive),
            "raw" => Ok(SolverMode::Raw),
            _ => Err(format!("expected additive or raw, got `{s}`")),
        }
    }
}

impl Value for Coding {
    fn show(&self) -> String {
        match self {
            Coding::MultiDelta => "multi-delta",
            Coding::Rate { .. } => "rate",
        }
        .into()
    }
    fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "multi-delta" => Ok(Coding::MultiDelta),
            "rate" => Ok(Coding::Rate { seed: 0 }),
            _ => Err(format!("expected multi-delta or rate, got `{s}`")),
        }
    }
}

impl Value for LossKind {
    fn show(&self) -> String {
        match self {
            LossKind::CrossEntropy => "cross-entropy",
            LossKind::Mse => "mse",
        }
        .into()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.trim().parse().map_err(|e: Error| e.to_string())
    }
}

pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    get: fn(&Settings) -> String,
    set: fn(&mut Settings, &str) -> Result<(), String>,
}

macro_rules! key {
    ($name:literal, $help:literal, |$s:ident| $place:expr) => {
        Key {
            name: $name,
            help: $help,
            get: |$s: &Settings| Value::show(&$place),
            set: |$s: &mut Settings, v: &str| {
                $place = Value::parse(v)?;
                Ok(())
            },
        }
    };
}

pub static KEYS: &[Key] = &[
    key!("seed", "master seed for generation, shuffling and initialization", |s| s.seed),
    key!("synth.channels", "electrode channels", |s| s.synth.channels),
    key!("synth.rate_hz", "sampling rate", |s| s.synth.rate_hz),
    key!("synth.classes", "gesture classes drawn from the template bank", |s| s.synth.classes),
    key!("synth.actions_per_class", "actions per class in a generated stream", |s| s.synth.actions_per_class),
    key!("synth.action_duration_ms", "action duration range", |s| s.synth.action_duration_ms),
    key!("synth.neutral_gap_ms", "neutral gap range between events", |s| s.synth.neutral_gap_ms),
    key!("synth.snr_db", "burst level over the baseline noise", |s| s.synth.snr_db),
    key!("synth.baseline_noise", "add unit-RMS baseline noise", |s| s.synth.baseline_noise),
    key!("synth.gain_jitter", "relative per-action gain jitter", |s| s.synth.gain_jitter),
    key!("synth.distractors", "steady-state contractions longer than tad.l_max", |s| s.synth.distractors),
    key!("synth.distractor_duration_ms", "distractor duration range", |s| s.synth.distractor_duration_ms),
    key!("synth.distractor_level", "distractor envelope level", |s| s.synth.distractor_level),
    key!("synth.lead_in_ms", "neutral lead-in before the first event", |s| s.synth.lead_in_ms),
    key!("synth.stream_ms", "fixed stream length, or none to append events", |s| s.synth.stream_ms),
    key!("filter.low_hz", "band-pass lower edge", |s| s.pipeline.filter.low_hz),
    key!("filter.high_hz", "band-pass upper edge", |s| s.pipeline.filter.high_hz),
    key!("filter.order", "Butterworth prototype order", |s| s.pipeline.filter.order),
    key!("signal.alpha", "normalization scale factor", |s| s.pipeline.alpha),
    key!("signal.median_floor", "floor for zero channel medians, or none", |s| s.pipeline.median_floor),
    key!("signal.settle_ms", "filter settling skipped in calibration recordings", |s| s.pipeline.settle_ms),
    key!("encode.coding", "multi-delta or rate", |s| s.pipeline.coding),
    key!("encode.n_trains", "delta trains per channel", |s| s.pipeline.encoder.n_trains),
    key!("encode.theta_min", "lowest threshold tried by calibration", |s| s.pipeline.encoder.theta_min),
    key!("encode.delta", "threshold step between trains", |s| s.pipeline.encoder.delta),
    key!("encode.r_max", "spike-rate cap for calibration", |s| s.pipeline.encoder.r_max),
    key!("encode.pooled", "calibrate on the pooled rate of all channels", |s| s.pipeline.encoder.pooled),
    key!("tad.t_s", "activation spike-count threshold", |s| s.pipeline.tad.t_s),
    key!("tad.omega", "input weight", |s| s.pipeline.tad.omega),
    key!("tad.beta", "membrane decay", |s| s.pipeline.tad.beta),
    key!("tad.u_max", "membrane clamp", |s| s.pipeline.tad.u_max),
    key!("tad.u_th", "action threshold", |s| s.pipeline.tad.u_th),
    key!("tad.l_min", "shortest emitted segment in samples", |s| s.pipeline.tad.l_min),
    key!("tad.l_max", "longest emitted segment in samples", |s| s.pipeline.tad.l_max),
    key!("tad.inclusive", "activate on X >= t_s rather than X > t_s", |s| s.pipeline.tad.inclusive),
    key!("tad.pre_roll", "columns prepended to each segment", |s| s.pipeline.tad.pre_roll),
    key!("detect.window_ms", "baseline detector window", |s| s.baseline.window_ms),
    key!("detect.overlap", "baseline window overlap fraction", |s| s.baseline.overlap),
    key!("detect.count_threshold", "spike-threshold baseline: spikes per window", |s| s.baseline.count_threshold),
    key!("detect.amp_threshold", "amp-threshold baseline: multiple of the neutral median", |s| s.baseline.amp_threshold),
    key!("snn.hidden", "hidden LIF neurons", |s| s.snn.hidden),
    key!("snn.population", "output neurons per class", |s| s.snn.population),
    key!("snn.beta", "LIF membrane decay", |s| s.snn.beta),
    key!("snn.u_th", "LIF firing threshold", |s| s.snn.u_th),
    key!("snn.t_sim", "simulation steps", |s| s.snn.t_sim),
    key!("solver.bin", "multi-step window L", |s| s.snn.solver.bin),
    key!("solver.t_fix", "segment length after padding or truncation", |s| s.snn.solver.t_fix),
    key!("solver.mode", "additive or raw", |s| s.snn.solver.mode),
    key!("train.k_slope", "surrogate slope", |s| s.train.k_slope),
    key!("train.learning_rate", "SGD step size", |s| s.train.learning_rate),
    key!("train.epochs", "training epochs", |s| s.train.epochs),
    key!("train.batch_size", "mini-batch size", |s| s.train.batch_size),
    key!("train.loss", "cross-entropy or mse", |s| s.train.loss_kind),
    key!("train.reset_detach", "treat the reset as constant when backpropagating", |s| s.train.reset_detach),
    key!("train.momentum", "heavy-ball momentum", |s| s.train.momentum),
    key!("dataset.actions_per_class", "actions per class for train and bench", |s| s.dataset.actions_per_class),
    key!("dataset.split", "training fraction per class", |s| s.dataset.split),
    key!("bench.distractors", "distractors in the detection stream", |s| s.bench.distractors),
    key!("bench.stream_ms", "detection stream length", |s| s.bench.stream_ms),
    key!("bench.seeds", "training seeds per variant", |s| s.bench.seeds),
];

fn lookup(name: &str) -> Result<&'static Key, Error> {
    KEYS.iter().find(|k| k.name == name).ok_or_else(|| Error::Config {
        key: name.to_string(),
        msg: "unknown configuration key".into(),
    })
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let k = lookup(key)?;
        (k.set)(self, value).map_err(|msg| Error::Config { key: key.to_string(), msg })
    }

    pub fn get(&self, key: &str) -> Result<String, Error> {
        Ok((lookup(key)?.get)(self))
    }

    /// Applies `key=value` assignments in order.
    pub fn apply_assignments<'a>(&mut self, items: impl IntoIterator<Item = &'a str>) -> Result<(), Error> {
        for item in items {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::Config {
                key: item.to_string(),
                msg: "expected key=value".into(),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Applies a TOML file; nested tables map onto dotted keys.
    pub fn apply_toml(&mut self, text: &str) -> Result<(), Error> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Format {
            what: "config file",
            msg: e.to_string(),
        })?;
        let mut flat = BTreeMap::new();
        flatten("", &toml::Value::Table(table), &mut flat)?;
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_toml_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        self.apply_toml(&text)
    }

    /// Copies derived values into place and validates every section.
    pub fn finalize(&mut self) -> Result<(), Error> {
        self.train.seed = self.seed;
        if let Coding::Rate { seed } = &mut self.pipeline.coding {
            *seed = self.seed;
        }
        self.synth.validate()?;
        self.pipeline.validate(self.synth.rate_hz)?;
        for (key, v) in [
            ("snn.hidden", self.snn.hidden),
            ("snn.population", self.snn.population),
            ("snn.t_sim", self.snn.t_sim),
            ("solver.bin", self.snn.solver.bin),
            ("solver.t_fix", self.snn.solver.t_fix),
            ("train.epochs", self.train.epochs),
            ("bench.seeds", self.bench.seeds),
        ] {
            if v == 0 {
                return Err(Error::Config { key: key.into(), msg: "must be >= 1".into() });
            }
        }
        if !(self.snn.beta > 0.0 && self.snn.beta < 1.0) {
            return Err(Error::Config { key: "snn.beta".into(), msg: "must lie in (0, 1)".into() });
        }
        if !(self.snn.u_th > 0.0) {
            return Err(Error::Config { key: "snn.u_th".into(), msg: "must be > 0".into() });
        }
        self.train.validate()?;
        if !(self.dataset.split > 0.0 && self.dataset.split < 1.0) {
            return Err(Error::Config { key: "dataset.split".into(), msg: "must lie in (0, 1)".into() });
        }
        if self.dataset.actions_per_class < 2 {
            return Err(Error::Config { key: "dataset.actions_per_class".into(), msg: "must be >= 2".into() });
        }
        if !(self.bench.stream_ms.is_finite() && self.bench.stream_ms > 0.0) {
            return Err(Error::Config { key: "bench.stream_ms".into(), msg: "must be > 0".into() });
        }
        if !(self.baseline.window_ms > 0.0) {
            return Err(Error::Config { key: "detect.window_ms".into(), msg: "must be > 0".into() });
        }
        if !(0.0..1.0).contains(&self.baseline.overlap) {
            return Err(Error::Config { key: "detect.overlap".into(), msg: "must lie in [0, 1)".into() });
        }
        Ok(())
    }

    /// Every key with its resolved value, typed for JSON.
    pub fn resolved(&self) -> BTreeMap<String, serde_json::Value> {
        KEYS.iter().map(|k| (k.name.to_string(), json_value(&(k.get)(self)))).collect()
    }

    /// Synth settings for the classifier dataset.
    pub fn dataset_synth(&self) -> SynthConfig {
        SynthConfig { actions_per_class: self.dataset.actions_per_class, ..self.synth.clone() }
    }

    /// Synth settings for the detection benchmark stream.
    pub fn bench_synth(&self) -> SynthConfig {
        SynthConfig {
            distractors: self.bench.distractors,
            stream_ms: Some(self.bench.stream_ms),
            ..self.synth.clone()
        }
    }

    pub fn tad(&self) -> &TadConfig<f64> {
        &self.pipeline.tad
    }
}

fn json_value(s: &str) -> serde_json::Value {
    if let Ok(i) = s.parse::<u64>() {
        return i.into();
    }
    if let Ok(b) = s.parse::<bool>() {
        return b.into();
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() => serde_json::Number::from_f64(f).map_or_else(|| s.into(), Into::into),
        _ => s.into(),
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, String>) -> Result<(), Error> {
    let scalar = |v: &toml::Value| -> Option<String> {
        match v {
            toml::Value::String(s) => Some(s.clone()),
            toml::Value::Integer(i) => Some(i.to_string()),
            toml::Value::Float(f) => Some(f.to_string()),
            toml::Value::Boolean(b) => Some(b.to_string()),
            _ => None,
        }
    };
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
        }
        toml::Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
            let parts = parts.ok_or_else(|| Error::Config { key: prefix.into(), msg: "arrays must hold scalars".into() })?;
            out.insert(prefix.to_string(), parts.join(","));
        }
        other => {
            let s = scalar(other).ok_or_else(|| Error::Config { key: prefix.into(), msg: "unsupported value type".into() })?;
            out.insert(prefix.to_string(), s);
        }
    }
    Ok(())
}

/// Key table for `--help`.
pub fn keys_help() -> String {
    let defaults = Settings::default();
    let width = KEYS.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (set with --config FILE or --set KEY=VALUE; defaults shown):\n");
    for k in KEYS {
        let value = (k.get)(&defaults);
        out.push_str(&format!("  {:width$} = {:<14} {}\n", k.name, value, k.help));
    }
    out
}
