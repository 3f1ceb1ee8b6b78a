//! Spike encoders: plain delta coding, adaptive multi-delta coding and
//! Bernoulli rate coding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{CalibrationProfile, SignalBuffer};

pub const DEFAULT_THETA_MIN: f64 = 0.1;
pub const DEFAULT_R_MAX: f64 = 0.3;
pub const DEFAULT_N_TRAINS: usize = 10;

/// Binary spikes indexed by (channel, train, step).
///
/// Storage is time-major: one contiguous column of `channels * trains` bits
/// per step, channel-major inside the column. This is the order the streaming
/// detector consumes and the order of the text format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTensor {
    channels: usize,
    trains: usize,
    steps: usize,
    bits: Vec<u8>,
}

impl SpikeTensor {
    pub fn zeros(channels: usize, trains: usize, steps: usize) -> Self {
        Self {
            channels,
            trains,
            steps,
            bits: vec![0; channels * trains * steps],
        }
    }

    /// Builds a tensor from time-major bits.
    pub fn from_bits(channels: usize, trains: usize, steps: usize, bits: Vec<u8>) -> Result<Self> {
        if channels == 0 || trains == 0 {
            return Err(Error::Shape("spike tensor needs channels >= 1 and trains >= 1".into()));
        }
        if bits.len() != channels * trains * steps {
            return Err(Error::Shape(format!(
                "{} bits for a {channels}x{trains}x{steps} tensor",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Input("spike bits must be 0 or 1".into()));
        }
        Ok(Self {
            channels,
            trains,
            steps,
            bits,
        })
    }

    pub fn from_columns<'a>(channels: usize, trains: usize, columns: impl IntoIterator<Item = &'a [u8]>) -> Result<Self> {
        let mut bits = Vec::new();
        let mut steps = 0;
        for col in columns {
            if col.len() != channels * trains {
                return Err(Error::Shape(format!("column of {} bits, expected {}", col.len(), channels * trains)));
            }
            bits.extend_from_slice(col);
            steps += 1;
        }
        Self::from_bits(channels, trains, steps, bits)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn trains(&self) -> usize {
        self.trains
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn column_len(&self) -> usize {
        self.channels * self.trains
    }

    #[inline]
    pub fn get(&self, c: usize, n: usize, t: usize) -> u8 {
        self.bits[t * self.column_len() + c * self.trains + n]
    }

    #[inline]
    pub fn set(&mut self, c: usize, n: usize, t: usize, v: bool) {
        let w = self.column_len();
        self.bits[t * w + c * self.trains + n] = v as u8;
    }

    pub fn column(&self, t: usize) -> &[u8] {
        let w = self.column_len();
        &self.bits[t * w..(t + 1) * w]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks_exact(self.column_len().max(1)).take(self.steps)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// One spike train as a contiguous vector.
    pub fn train(&self, c: usize, n: usize) -> Vec<u8> {
        (0..self.steps).map(|t| self.get(c, n, t)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Steps `[start, end)`.
    pub fn slice_steps(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.steps {
            return Err(Error::Shape(format!("steps {start}..{end} outside tensor of {} steps", self.steps)));
        }
        let w = self.column_len();
        Ok(Self {
            channels: self.channels,
            trains: self.trains,
            steps: end - start,
            bits: self.bits[start * w..end * w].to_vec(),
        })
    }
}

/// Multi-delta encoder parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig<T> {
    pub theta_min: T,
    pub r_max: T,
    pub delta: T,
    pub n_trains: usize,
    /// Calibrate against the pooled rate of all channels (default) or require
    /// every channel to satisfy `r_max` on its own.
    pub pooled: bool,
}

impl<T: Real> Default for EncoderConfig<T> {
    fn default() -> Self {
        Self {
            theta_min: T::of(DEFAULT_THETA_MIN),
            r_max: T::of(DEFAULT_R_MAX),
            delta: T::of(DEFAULT_THETA_MIN / 2.0),
            n_trains: DEFAULT_N_TRAINS,
            pooled: true,
        }
    }
}

impl<T: Real> EncoderConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min > T::zero()) {
            return Err(Error::config("encode.theta_min", "must be > 0"));
        }
        if !(self.r_max > T::zero() && self.r_max <= T::one()) {
            return Err(Error::config("encode.r_max", "must lie in (0, 1]"));
        }
        if !(self.delta > T::zero()) {
            return Err(Error::config("encode.delta", "must be > 0"));
        }
        if self.n_trains == 0 {
            return Err(Error::config("encode.n_trains", "must be >= 1"));
        }
        Ok(())
    }

    /// Threshold of train `i` on top of base threshold `base`.
    #[inline]
    pub fn threshold(&self, base: T, i: usize) -> T {
        base + T::of_usize(i) * self.delta
    }
}

/// Delta coding: spike at `t >= 1` iff `|d(t) - d(t-1)| >= theta`; `s(0) = 0`.
pub fn delta_encode<T: Real>(signal: &[T], theta: T) -> Vec<u8> {
    let mut out = Vec::with_capacity(signal.len());
    if signal.is_empty() {
        return out;
    }
    out.push(0);
    out.extend(signal.windows(2).map(|w| ((w[1] - w[0]).abs() >= theta) as u8));
    out
}

pub fn spike_rate(train: &[u8]) -> f64 {
    if train.is_empty() {
        return 0.0;
    }
    train.iter().map(|&b| b as usize).sum::<usize>() as f64 / train.len() as f64
}

/// Outcome of threshold calibration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaCalibration<T> {
    pub theta: T,
    /// Rate (pooled, or worst channel) reached at `theta`.
    pub rate: f64,
    /// No threshold up to 1.0 satisfied `r_max`; `theta` is `1 + delta`.
    pub degenerate: bool,
}

fn calibration_rate<T: Real>(signal: &SignalBuffer<T>, theta: T, pooled: bool) -> f64 {
    let per_channel: Vec<(usize, usize)> = signal
        .channels()
        .iter()
        .map(|ch| {
            let train = delta_encode(ch, theta);
            (train.iter().map(|&b| b as usize).sum(), train.len())
        })
        .collect();
    if pooled {
        let (ones, total) = per_channel.iter().fold((0, 0), |(a, b), &(o, n)| (a + o, b + n));
        if total == 0 {
            0.0
        } else {
            ones as f64 / total as f64
        }
    } else {
        per_channel
            .iter()
            .map(|&(o, n)| if n == 0 { 0.0 } else { o as f64 / n as f64 })
            .fold(0.0, f64::max)
    }
}

/// Smallest threshold on the grid `theta_min + i * delta` whose spike rate on
/// the action-state calibration signal is at most `r_max`.
///
/// Signals are expected in `[0, 1]`, so the search stops once the grid passes
/// 1.0; in that case `1 + delta` is returned with `degenerate` set.
pub fn calibrate_theta<T: Real>(action_signal: &SignalBuffer<T>, cfg: &EncoderConfig<T>) -> Result<ThetaCalibration<T>> {
    cfg.validate()?;
    if action_signal.is_empty() {
        return Err(Error::Calibration("action-state calibration segment is empty".into()));
    }
    let r_max = cfg.r_max.as_f64();
    let mut i = 0usize;
    loop {
        let theta = cfg.threshold(cfg.theta_min, i);
        if theta > T::one() {
            let theta = T::one() + cfg.delta;
            log::warn!("encoder calibration did not reach r_max below threshold 1.0; all trains will be silent");
            return Ok(ThetaCalibration {
                theta,
                rate: calibration_rate(action_signal, theta, cfg.pooled),
                degenerate: true,
            });
        }
        let rate = calibration_rate(action_signal, theta, cfg.pooled);
        if rate <= r_max {
            return Ok(ThetaCalibration {
                theta,
                rate,
                degenerate: false,
            });
        }
        i += 1;
    }
}

/// Calibrates and stores the threshold in `profile`.
pub fn calibrate_profile<T: Real>(
    profile: &mut CalibrationProfile<T>,
    action_signal: &SignalBuffer<T>,
    cfg: &EncoderConfig<T>,
) -> Result<ThetaCalibration<T>> {
    let cal = calibrate_theta(action_signal, cfg)?;
    profile.theta_min = Some(cal.theta);
    Ok(cal)
}

/// N nested delta trains per channel at thresholds `theta_min + i * delta`.
pub fn multi_delta_encode<T: Real>(
    signal: &SignalBuffer<T>,
    profile: &CalibrationProfile<T>,
    cfg: &EncoderConfig<T>,
) -> Result<SpikeTensor> {
    cfg.validate()?;
    let base = profile
        .theta_min
        .ok_or_else(|| Error::State("calibration profile has no theta_min; calibrate the encoder first".into()))?;
    let mut enc = MultiDeltaEncoder::new(signal.num_channels(), base, cfg);
    let steps = signal.len();
    let mut bits = Vec::with_capacity(steps * enc.column_len());
    let mut col = vec![0u8; enc.column_len()];
    let mut sample = vec![T::zero(); signal.num_channels()];
    for t in 0..steps {
        for (c, s) in sample.iter_mut().enumerate() {
            *s = signal.channel(c)[t];
        }
        enc.push(&sample, &mut col);
        bits.extend_from_slice(&col);
    }
    SpikeTensor::from_bits(signal.num_channels(), cfg.n_trains, steps, bits)
}

/// Streaming multi-delta encoder producing one spike column per sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiDeltaEncoder<T> {
    thresholds: Vec<T>,
    prev: Vec<Option<T>>,
}

impl<T: Real> MultiDeltaEncoder<T> {
    pub fn new(channels: usize, base: T, cfg: &EncoderConfig<T>) -> Self {
        Self {
            thresholds: (0..cfg.n_trains).map(|i| cfg.threshold(base, i)).collect(),
            prev: vec![None; channels],
        }
    }

    pub fn column_len(&self) -> usize {
        self.prev.len() * self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    /// Encodes one multichannel sample into `column` (channel-major).
    pub fn push(&mut self, sample: &[T], column: &mut [u8]) {
        let n = self.thresholds.len();
        for (c, (&x, prev)) in sample.iter().zip(self.prev.iter_mut()).enumerate() {
            let diff = prev.map(|p| (x - p).abs());
            *prev = Some(x);
            for (i, &th) in self.thresholds.iter().enumerate() {
                column[c * n + i] = diff.is_some_and(|d| d >= th) as u8;
            }
        }
    }
}

/// Bernoulli rate coding: each bit fires with probability equal to the
/// signal value at its channel and step.
///
/// Draws are taken from ChaCha8 seeded with `seed`, in storage order
/// (step, then channel, then train).
pub fn rate_encode<T: Real>(signal: &SignalBuffer<T>, n_trains: usize, seed: u64) -> Result<SpikeTensor> {
    if n_trains == 0 {
        return Err(Error::config("encode.n_trains", "must be >= 1"));
    }
    for (c, ch) in signal.channels().iter().enumerate() {
        if let Some(t) = ch.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::Input(format!(
                "rate coding needs values in [0, 1]; channel {c} step {t} is {}",
                ch[t]
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (channels, steps) = (signal.num_channels(), signal.len());
    let mut bits = Vec::with_capacity(channels * n_trains * steps);
    for t in 0..steps {
        for c in 0..channels {
            let p = signal.channel(c)[t].as_f64();
            for _ in 0..n_trains {
                let u: f64 = rng.random();
                bits.push((u < p) as u8);
            }
        }
    }
    SpikeTensor::from_bits(channels, n_trains, steps, bits)
}
