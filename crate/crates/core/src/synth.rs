//! Seeded synthetic sEMG: neutral-action-neutral streams with ground truth.
//!
//! Each channel is unit-RMS band-limited Gaussian noise (white noise through
//! the 20-500 Hz band-pass). Inside an action the channel adds a second,
//! independent burst noise scaled by `10^(snr_db/20)` times a class envelope:
//!
//! ```text
//! x_c(t) = b_c(t) + a * g_c * e(t) * z_c(t)
//! e(t)   = min(1, sum_j h_j * rc((t/L - m_j) / w_j)),  rc(x) = (1 + cos(pi x)) / 2 on |x| <= 1
//! ```
//!
//! `g_c` is the class gain on channel `c` and `a` carries a per-action gain
//! jitter. Distractors are steady contractions on every channel at a fixed
//! level with 100 ms ramps. Randomness is ChaCha8, keyed per purpose with
//! [`mix_seed`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::detect::{Interval, LabeledInterval, TadConfig};
use crate::error::{Error, Result};
use crate::rng::mix_seed;
use crate::scalar::Real;
use crate::signal::{BandpassFilter, FilterConfig, SignalBuffer, DEFAULT_RATE_HZ};

const NOISE_WARMUP: usize = 2000;
const DISTRACTOR_RAMP_MS: f64 = 100.0;
const MAX_PLACEMENT_RETRIES: usize = 1000;

const STREAM_NOISE: u64 = 1;
const STREAM_BURST: u64 = 2;
const STREAM_SCHEDULE: u64 = 3;
const STREAM_SPLIT: u64 = 4;
const STREAM_CAL_NEUTRAL: u64 = 5;
const STREAM_CAL_ACTION: u64 = 6;
const STREAM_CAL_BURST: u64 = 7;

/// One raised-cosine bump, in fractions of the action length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    /// Gain per channel; channel `c` uses `channel_gains[c % len]`.
    pub channel_gains: Vec<f64>,
    pub bumps: Vec<Bump>,
}

impl ClassTemplate {
    fn new(gains: &[f64], bumps: &[(f64, f64, f64)]) -> Self {
        Self {
            channel_gains: gains.to_vec(),
            bumps: bumps
                .iter()
                .map(|&(center, half_width, height)| Bump { center, half_width, height })
                .collect(),
        }
    }

    pub fn gain(&self, channel: usize) -> f64 {
        self.channel_gains[channel % self.channel_gains.len()]
    }

    /// Envelope value at relative position `x` in `[0, 1]`.
    pub fn envelope(&self, x: f64) -> f64 {
        let e: f64 = self
            .bumps
            .iter()
            .map(|b| {
                let r = (x - b.center) / b.half_width;
                if r.abs() <= 1.0 {
                    b.height * 0.5 * (1.0 + (std::f64::consts::PI * r).cos())
                } else {
                    0.0
                }
            })
            .sum();
        e.min(1.0)
    }
}

/// Default six-class bank, laid out for four channels.
///
/// | class | channel gains          | bumps (center, half width, height)                  |
/// |-------|------------------------|-----------------------------------------------------|
/// | 0     | 1.0 0.7 0.4 0.3        | (0.5, 0.55, 1.6)                                    |
/// | 1     | 0.3 0.4 0.7 1.0        | (0.3, 0.35, 1.6) (0.7, 0.35, 1.0)                   |
/// | 2     | 0.4 1.0 1.0 0.4        | (0.3, 0.35, 1.0) (0.7, 0.35, 1.6)                   |
/// | 3     | 1.0 0.4 1.0 0.4        | (0.2, 0.3, 1.6) (0.5, 0.3, 1.0) (0.8, 0.3, 1.6)     |
/// | 4     | 0.4 1.0 0.4 1.0        | (0.5, 0.55, 1.6)                                    |
/// | 5     | 1.0 1.0 0.3 0.3        | (0.35, 0.4, 1.6) (0.75, 0.3, 0.8)                   |
pub fn default_templates() -> Vec<ClassTemplate> {
    vec![
        ClassTemplate::new(&[1.0, 0.7, 0.4, 0.3], &[(0.5, 0.55, 1.6)]),
        ClassTemplate::new(&[0.3, 0.4, 0.7, 1.0], &[(0.3, 0.35, 1.6), (0.7, 0.35, 1.0)]),
        ClassTemplate::new(&[0.4, 1.0, 1.0, 0.4], &[(0.3, 0.35, 1.0), (0.7, 0.35, 1.6)]),
        ClassTemplate::new(&[1.0, 0.4, 1.0, 0.4], &[(0.2, 0.3, 1.6), (0.5, 0.3, 1.0), (0.8, 0.3, 1.6)]),
        ClassTemplate::new(&[0.4, 1.0, 0.4, 1.0], &[(0.5, 0.55, 1.6)]),
        ClassTemplate::new(&[1.0, 1.0, 0.3, 0.3], &[(0.35, 0.4, 1.6), (0.75, 0.3, 0.8)]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub channels: usize,
    pub rate_hz: f64,
    pub classes: usize,
    pub actions_per_class: usize,
    /// Inclusive action duration range.
    pub action_duration_ms: (f64, f64),
    /// Inclusive neutral gap range between events.
    pub neutral_gap_ms: (f64, f64),
    /// Burst-to-baseline amplitude ratio at full envelope, in dB.
    pub snr_db: f64,
    /// Set to false for a noiseless baseline.
    pub baseline_noise: bool,
    /// Per-action gain drawn from `1 +- gain_jitter`.
    pub gain_jitter: f64,
    pub distractors: usize,
    pub distractor_duration_ms: (f64, f64),
    /// Envelope of a distractor plateau.
    pub distractor_level: f64,
    pub lead_in_ms: f64,
    /// Fixed stream length; events are spread over it. `None` lays events
    /// out back to back with gaps drawn from `neutral_gap_ms`.
    pub stream_ms: Option<f64>,
    pub templates: Vec<ClassTemplate>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            channels: 4,
            rate_hz: DEFAULT_RATE_HZ,
            classes: 4,
            actions_per_class: 25,
            action_duration_ms: (150.0, 600.0),
            neutral_gap_ms: (300.0, 1500.0),
            snr_db: 10.0,
            baseline_noise: true,
            gain_jitter: 0.2,
            distractors: 0,
            distractor_duration_ms: (1200.0, 2000.0),
            distractor_level: 0.8,
            lead_in_ms: 1000.0,
            stream_ms: None,
            templates: default_templates(),
        }
    }
}

fn check_range(key: &'static str, r: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.0 > 0.0 && r.0 <= r.1) {
        return Err(Error::config(key, format!("need 0 < min <= max, got {:?}", r)));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::config("synth.channels", "must be >= 1"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::config("synth.rate_hz", "must be > 0"));
        }
        if self.classes == 0 {
            return Err(Error::config("synth.classes", "must be >= 1"));
        }
        if self.classes > self.templates.len() {
            return Err(Error::config(
                "synth.classes",
                format!("{} classes requested, template bank has {}", self.classes, self.templates.len()),
            ));
        }
        if self.templates.iter().any(|t| t.channel_gains.is_empty() || t.bumps.is_empty()) {
            return Err(Error::config("synth.templates", "every template needs gains and bumps"));
        }
        check_range("synth.action_duration_ms", self.action_duration_ms)?;
        check_range("synth.neutral_gap_ms", self.neutral_gap_ms)?;
        check_range("synth.distractor_duration_ms", self.distractor_duration_ms)?;
        if !self.snr_db.is_finite() {
            return Err(Error::config("synth.snr_db", "must be finite"));
        }
        if !(0.0..1.0).contains(&self.gain_jitter) {
            return Err(Error::config("synth.gain_jitter", "must lie in [0, 1)"));
        }
        if !(self.distractor_level.is_finite() && self.distractor_level >= 0.0) {
            return Err(Error::config("synth.distractor_level", "must be >= 0"));
        }
        if !(self.lead_in_ms.is_finite() && self.lead_in_ms >= 0.0) {
            return Err(Error::config("synth.lead_in_ms", "must be >= 0"));
        }
        if let Some(ms) = self.stream_ms {
            if !(ms.is_finite() && ms > 0.0) {
                return Err(Error::config("synth.stream_ms", "must be > 0"));
            }
        }
        let tad = TadConfig::<f64>::default();
        let (lo, hi) = self.duration_samples(self.action_duration_ms);
        if lo < tad.l_min || hi > tad.l_max {
            log::warn!(
                "action durations {lo}..={hi} samples fall outside the detector bounds {}..={}",
                tad.l_min,
                tad.l_max
            );
        }
        Ok(())
    }

    fn samples(&self, ms: f64) -> usize {
        (ms * self.rate_hz / 1000.0).round() as usize
    }

    fn duration_samples(&self, r: (f64, f64)) -> (usize, usize) {
        (self.samples(r.0).max(1), self.samples(r.1).max(1))
    }

    pub fn burst_amplitude(&self) -> f64 {
        10f64.powf(self.snr_db / 20.0)
    }
}

/// A generated stream with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledStream<T> {
    pub signal: SignalBuffer<T>,
    /// Sorted, non-overlapping action intervals.
    pub labels: Vec<LabeledInterval>,
    /// Steady-state contractions, not labeled as actions.
    pub distractors: Vec<Interval>,
}

/// Unit-RMS band-limited Gaussian noise, one row per channel.
pub fn band_noise(channels: usize, len: usize, rate_hz: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut filter = BandpassFilter::<f64>::new(&FilterConfig::default(), rate_hz, channels)?;
    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        for _ in 0..NOISE_WARMUP {
            filter.process_sample(c, rng.sample(StandardNormal));
        }
        let mut row: Vec<f64> = (0..len).map(|_| filter.process_sample(c, rng.sample(StandardNormal))).collect();
        let rms = (row.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
        if rms > 0.0 {
            row.iter_mut().for_each(|v| *v /= rms);
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Action { class_id: usize, len: usize, gain: f64 },
    Distractor { len: usize },
}

impl Event {
    fn len(&self) -> usize {
        match *self {
            Event::Action { len, .. } | Event::Distractor { len } => len,
        }
    }
}

fn draw_events(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Event> {
    let (a_lo, a_hi) = cfg.duration_samples(cfg.action_duration_ms);
    let (d_lo, d_hi) = cfg.duration_samples(cfg.distractor_duration_ms);
    let mut events = Vec::with_capacity(cfg.classes * cfg.actions_per_class + cfg.distractors);
    for class_id in 0..cfg.classes {
        for _ in 0..cfg.actions_per_class {
            let len = rng.random_range(a_lo..=a_hi);
            let gain = 1.0 + cfg.gain_jitter * rng.random_range(-1.0..=1.0);
            events.push(Event::Action { class_id, len, gain });
        }
    }
    for _ in 0..cfg.distractors {
        events.push(Event::Distractor { len: rng.random_range(d_lo..=d_hi) });
    }
    events.shuffle(rng);
    events
}

/// Onsets for `events` in order, plus the total stream length.
fn schedule(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<Event>, Vec<usize>, usize)> {
    let lead = cfg.samples(cfg.lead_in_ms);
    let (g_lo, g_hi) = cfg.duration_samples(cfg.neutral_gap_ms);
    let Some(ms) = cfg.stream_ms else {
        let events = draw_events(cfg, rng);
        let mut onsets = Vec::with_capacity(events.len());
        let mut t = lead;
        for (i, e) in events.iter().enumerate() {
            if i > 0 {
                t += rng.random_range(g_lo..=g_hi);
            }
            onsets.push(t);
            t += e.len();
        }
        let total = t + rng.random_range(g_lo..=g_hi);
        return Ok((events, onsets, total));
    };

    let total = cfg.samples(ms);
    for _ in 0..MAX_PLACEMENT_RETRIES {
        let events = draw_events(cfg, rng);
        let busy: usize = events.iter().map(Event::len).sum::<usize>() + (events.len() + 1) * g_lo;
        if lead + busy > total {
            continue;
        }
        // spread the slack over the gaps with random weights
        let slack = (total - lead - busy) as f64;
        let weights: Vec<f64> = (0..=events.len()).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = weights.iter().sum();
        let mut onsets = Vec::with_capacity(events.len());
        let mut t = lead;
        for (e, w) in events.iter().zip(&weights) {
            t += g_lo + (slack * w / sum).floor() as usize;
            onsets.push(t);
            t += e.len();
        }
        debug_assert!(t <= total);
        return Ok((events, onsets, total));
    }
    Err(Error::config(
        "synth.stream_ms",
        format!("could not place events in {ms} ms after {MAX_PLACEMENT_RETRIES} attempts"),
    ))
}

pub fn generate_stream<T: Real>(cfg: &SynthConfig, seed: u64) -> Result<LabeledStream<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_SCHEDULE));
    let (events, onsets, total) = schedule(cfg, &mut rng)?;
    let c = cfg.channels;

    let mut data = if cfg.baseline_noise {
        band_noise(c, total, cfg.rate_hz, mix_seed(seed, STREAM_NOISE))?
    } else {
        vec![vec![0.0; total]; c]
    };
    let burst = band_noise(c, total, cfg.rate_hz, mix_seed(seed, STREAM_BURST))?;
    let amp = cfg.burst_amplitude();
    let ramp = cfg.samples(DISTRACTOR_RAMP_MS).max(1);

    let mut labels = Vec::new();
    let mut distractors = Vec::new();
    for (event, &onset) in events.iter().zip(&onsets) {
        let len = event.len();
        match *event {
            Event::Action { class_id, gain, .. } => {
                let tpl = &cfg.templates[class_id];
                for (ch, row) in data.iter_mut().enumerate() {
                    let g = amp * gain * tpl.gain(ch);
                    for i in 0..len {
                        let e = tpl.envelope((i as f64 + 0.5) / len as f64);
                        row[onset + i] += g * e * burst[ch][onset + i];
                    }
                }
                labels.push(LabeledInterval { onset, offset: onset + len, class_id });
            }
            Event::Distractor { .. } => {
                for (ch, row) in data.iter_mut().enumerate() {
                    for i in 0..len {
                        let edge = i.min(len - 1 - i) as f64 / ramp as f64;
                        let e = cfg.distractor_level * edge.min(1.0);
                        row[onset + i] += amp * e * burst[ch][onset + i];
                    }
                }
                distractors.push(Interval::new(onset, onset + len));
            }
        }
    }

    let channels = data.into_iter().map(|row| row.into_iter().map(T::of).collect()).collect();
    Ok(LabeledStream {
        signal: SignalBuffer::new(cfg.rate_hz, channels)?,
        labels,
        distractors,
    })
}

/// An action cut at its true boundaries, with neutral context before it.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment<T> {
    /// Raw samples from `onset - lead` to `offset`.
    pub signal: SignalBuffer<T>,
    /// Number of context samples preceding the action.
    pub lead: usize,
    pub class_id: usize,
    pub onset: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub train: Vec<Segment<T>>,
    pub test: Vec<Segment<T>>,
}

/// Context kept before each segment so a causal filter can settle.
pub const SEGMENT_CONTEXT_MS: f64 = 200.0;

/// Generates one stream and splits it with [`dataset_from_stream`].
pub fn generate_dataset<T: Real>(cfg: &SynthConfig, seed: u64, split: f64) -> Result<Dataset<T>> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::config("synth.split", "must lie in (0, 1)"));
    }
    let stream = generate_stream::<T>(cfg, seed)?;
    dataset_from_stream(&stream.signal, &stream.labels, seed, split)
}

/// Cuts every labeled action out of `signal` and splits the segments per
/// class, `round(split * n_class)` of each going to training. Each segment
/// keeps up to [`SEGMENT_CONTEXT_MS`] of signal before its onset.
pub fn dataset_from_stream<T: Real>(
    signal: &SignalBuffer<T>,
    labels: &[LabeledInterval],
    seed: u64,
    split: f64,
) -> Result<Dataset<T>> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::config("synth.split", "must lie in (0, 1)"));
    }
    let classes = labels.iter().map(|l| l.class_id + 1).max().unwrap_or(0);
    if classes == 0 {
        return Err(Error::Input("no labeled actions to build a dataset from".into()));
    }
    let context = (SEGMENT_CONTEXT_MS * signal.rate_hz() / 1000.0).round() as usize;
    let mut by_class: Vec<Vec<Segment<T>>> = vec![Vec::new(); classes];
    for l in labels {
        if l.offset > signal.len() || l.onset >= l.offset {
            return Err(Error::Input(format!(
                "label {}..{} does not fit a signal of {} samples",
                l.onset,
                l.offset,
                signal.len()
            )));
        }
        let start = l.onset.saturating_sub(context);
        by_class[l.class_id].push(Segment {
            signal: signal.slice(start, l.offset)?,
            lead: l.onset - start,
            class_id: l.class_id,
            onset: l.onset,
            offset: l.offset,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_SPLIT));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class_id, mut segs) in by_class.into_iter().enumerate() {
        let n_train = (split * segs.len() as f64).round() as usize;
        if n_train == 0 || n_train == segs.len() {
            return Err(Error::config(
                "synth.split",
                format!("class {class_id} has {} segments, leaving one side empty", segs.len()),
            ));
        }
        segs.shuffle(&mut rng);
        let rest = segs.split_off(n_train);
        train.extend(segs);
        test.extend(rest);
    }
    train.sort_by_key(|s| s.onset);
    test.sort_by_key(|s| s.onset);
    Ok(Dataset { train, test })
}

/// Neutral rest followed by a sustained full contraction on every channel,
/// the raw material for building a calibration profile.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSession<T> {
    pub neutral: SignalBuffer<T>,
    pub action: SignalBuffer<T>,
}

pub const CALIBRATION_NEUTRAL_MS: f64 = 5000.0;
pub const CALIBRATION_ACTION_MS: f64 = 3000.0;

pub fn calibration_session<T: Real>(cfg: &SynthConfig, seed: u64) -> Result<CalibrationSession<T>> {
    cfg.validate()?;
    let c = cfg.channels;
    let n_len = cfg.samples(CALIBRATION_NEUTRAL_MS);
    let a_len = cfg.samples(CALIBRATION_ACTION_MS);
    let to_buffer = |rows: Vec<Vec<f64>>| {
        SignalBuffer::new(cfg.rate_hz, rows.into_iter().map(|r| r.into_iter().map(T::of).collect()).collect())
    };
    let noise = |len, stream| -> Result<Vec<Vec<f64>>> {
        if cfg.baseline_noise {
            band_noise(c, len, cfg.rate_hz, mix_seed(seed, stream))
        } else {
            Ok(vec![vec![0.0; len]; c])
        }
    };
    let neutral = noise(n_len, STREAM_CAL_NEUTRAL)?;
    let mut action = noise(a_len, STREAM_CAL_ACTION)?;
    let burst = band_noise(c, a_len, cfg.rate_hz, mix_seed(seed, STREAM_CAL_BURST))?;
    let amp = cfg.burst_amplitude();
    for (row, b) in action.iter_mut().zip(&burst) {
        row.iter_mut().zip(b).for_each(|(x, z)| *x += amp * z);
    }
    Ok(CalibrationSession {
        neutral: to_buffer(neutral)?,
        action: to_buffer(action)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { actions_per_class: 3, ..Default::default() }
    }

    #[test]
    fn noiseless_baseline_is_zero_outside_actions() {
        let cfg = SynthConfig { baseline_noise: false, ..small() };
        let s = generate_stream::<f64>(&cfg, 3).unwrap();
        let mut inside = vec![false; s.signal.len()];
        for l in &s.labels {
            inside[l.onset..l.offset].iter_mut().for_each(|v| *v = true);
        }
        for ch in s.signal.channels() {
            for (t, &v) in ch.iter().enumerate() {
                if !inside[t] {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert_eq!(s.labels.len(), 12);
    }

    #[test]
    fn zero_actions_is_pure_noise() {
        let cfg = SynthConfig { actions_per_class: 0, ..Default::default() };
        let s = generate_stream::<f64>(&cfg, 1).unwrap();
        assert!(s.labels.is_empty());
        assert!(s.signal.len() > 0);
    }

    #[test]
    fn same_seed_same_stream() {
        let a = generate_stream::<f64>(&small(), 11).unwrap();
        let b = generate_stream::<f64>(&small(), 11).unwrap();
        let c = generate_stream::<f64>(&small(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.signal, c.signal);
    }

    #[test]
    fn labels_sorted_disjoint_in_bounds_and_durations_honored() {
        let cfg = SynthConfig { distractors: 5, ..small() };
        let s = generate_stream::<f64>(&cfg, 5).unwrap();
        let (lo, hi) = (300, 1200);
        for w in s.labels.windows(2) {
            assert!(w[0].offset <= w[1].onset);
        }
        for l in &s.labels {
            assert!(l.offset <= s.signal.len());
            assert!((lo..=hi).contains(&(l.offset - l.onset)));
        }
        assert_eq!(s.distractors.len(), 5);
        for d in &s.distractors {
            assert!(d.len() > 2000);
            assert!(s.labels.iter().all(|l| l.interval().overlap(d) == 0));
        }
    }

    #[test]
    fn actions_are_louder_than_neutral() {
        let s = generate_stream::<f64>(&small(), 8).unwrap();
        let mut inside = vec![false; s.signal.len()];
        for l in &s.labels {
            inside[l.onset..l.offset].iter_mut().for_each(|v| *v = true);
        }
        let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
        for ch in s.signal.channels() {
            for (t, &v) in ch.iter().enumerate() {
                if inside[t] {
                    si += v * v;
                    ni += 1;
                } else {
                    so += v * v;
                    no += 1;
                }
            }
        }
        assert!((si / ni as f64).sqrt() > (so / no as f64).sqrt());
    }

    #[test]
    fn fixed_length_stream_places_everything() {
        let cfg = SynthConfig { stream_ms: Some(60_000.0), distractors: 4, ..small() };
        let s = generate_stream::<f64>(&cfg, 2).unwrap();
        assert_eq!(s.signal.len(), 120_000);
        assert_eq!(s.labels.len(), 12);
        assert_eq!(s.distractors.len(), 4);
    }

    #[test]
    fn impossible_fixed_length_errors() {
        let cfg = SynthConfig { stream_ms: Some(2000.0), ..small() };
        assert!(matches!(generate_stream::<f64>(&cfg, 2), Err(Error::Config { .. })));
    }

    #[test]
    fn zero_classes_rejected_by_key() {
        let cfg = SynthConfig { classes: 0, ..Default::default() };
        match generate_stream::<f64>(&cfg, 0) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "synth.classes"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stratified_split_counts() {
        let cfg = SynthConfig { actions_per_class: 10, ..Default::default() };
        let d = generate_dataset::<f64>(&cfg, 4, 0.8).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (32, 8));
        for k in 0..4 {
            assert_eq!(d.train.iter().filter(|s| s.class_id == k).count(), 8);
            assert_eq!(d.test.iter().filter(|s| s.class_id == k).count(), 2);
        }
        for s in &d.test {
            assert!(d.train.iter().all(|t| t.onset != s.onset));
        }
        for s in d.train.iter().chain(&d.test) {
            assert_eq!(s.signal.len(), s.offset - s.onset + s.lead);
        }
    }

    #[test]
    fn split_leaving_empty_side_rejected() {
        let cfg = SynthConfig { actions_per_class: 1, ..Default::default() };
        assert!(generate_dataset::<f64>(&cfg, 0, 0.5).is_err());
        assert!(generate_dataset::<f64>(&small(), 0, 1.0).is_err());
    }

    #[test]
    fn band_noise_has_unit_rms() {
        let rows = band_noise(2, 5000, 2000.0, 1).unwrap();
        for r in rows {
            let rms = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
            assert!((rms - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_is_bounded_and_vanishes_at_edges_of_single_bump() {
        let t = ClassTemplate::new(&[1.0], &[(0.5, 0.5, 1.0)]);
        assert!(t.envelope(0.0).abs() < 1e-12);
        assert!((t.envelope(0.5) - 1.0).abs() < 1e-12);
        for tpl in default_templates() {
            for i in 0..=100 {
                let e = tpl.envelope(i as f64 / 100.0);
                assert!((0.0..=1.0).contains(&e));
            }
        }
    }
}
