//! Preprocessing of raw sEMG: causal band-pass filtering, full-wave
//! rectification, neutral-state calibration and adaptive normalization
//! into `[0, 1]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_RATE_HZ: f64 = 2000.0;
pub const DEFAULT_ALPHA: f64 = 4.0;
pub const DEFAULT_MEDIAN_FLOOR: f64 = 1e-6;

/// Multichannel sampled signal. All channels share one length.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalBuffer<T> {
    rate_hz: f64,
    channels: Vec<Vec<T>>,
}

impl<T: Real> SignalBuffer<T> {
    pub fn new(rate_hz: f64, channels: Vec<Vec<T>>) -> Result<Self> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::config("rate_hz", format!("must be > 0, got {rate_hz}")));
        }
        if channels.is_empty() {
            return Err(Error::Shape("signal needs at least one channel".into()));
        }
        let len = channels[0].len();
        if let Some(c) = channels.iter().position(|ch| ch.len() != len) {
            return Err(Error::Shape(format!(
                "channel {c} has {} samples, channel 0 has {len}",
                channels[c].len()
            )));
        }
        Ok(Self { rate_hz, channels })
    }

    pub fn zeros(rate_hz: f64, channels: usize, len: usize) -> Result<Self> {
        Self::new(rate_hz, vec![vec![T::zero(); len]; channels.max(1)])
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<T>> {
        self.channels
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::Shape(format!(
                "slice {start}..{end} outside signal of length {}",
                self.len()
            )));
        }
        Ok(Self {
            rate_hz: self.rate_hz,
            channels: self.channels.iter().map(|ch| ch[start..end].to_vec()).collect(),
        })
    }

    /// Concatenates buffers along time.
    pub fn concat(parts: &[SignalBuffer<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("nothing to concatenate".into()))?;
        let mut channels = vec![Vec::new(); first.num_channels()];
        for p in parts {
            if p.num_channels() != first.num_channels() || p.rate_hz != first.rate_hz {
                return Err(Error::Shape("concatenated buffers differ in layout".into()));
            }
            for (dst, src) in channels.iter_mut().zip(&p.channels) {
                dst.extend_from_slice(src);
            }
        }
        Self::new(first.rate_hz, channels)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rate_hz: self.rate_hz,
            channels: self
                .channels
                .iter()
                .map(|ch| ch.iter().map(|&x| f(x)).collect())
                .collect(),
        }
    }
}

/// Band-pass design parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Order of the low-pass prototype; the band-pass has `order` sections.
    pub order: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            low_hz: 20.0,
            high_hz: 500.0,
            order: 4,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        if !(self.low_hz > 0.0) {
            return Err(Error::config("filter.low_hz", "must be > 0"));
        }
        if !(self.low_hz < self.high_hz) {
            return Err(Error::config("filter.high_hz", "must exceed filter.low_hz"));
        }
        if !(self.high_hz < rate_hz / 2.0) {
            return Err(Error::config(
                "filter.high_hz",
                format!("must be below Nyquist ({} Hz)", rate_hz / 2.0),
            ));
        }
        if self.order == 0 {
            return Err(Error::config("filter.order", "must be >= 1"));
        }
        Ok(())
    }
}

/// Normalized second-order section, `a0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosCoeffs {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl SosCoeffs {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }
}

/// Digital Butterworth band-pass as second-order sections (bilinear transform
/// with pre-warped band edges). Sections are returned unity-gain at the
/// geometric center frequency.
pub fn design_butterworth_bandpass(cfg: &FilterConfig, rate_hz: f64) -> Result<Vec<SosCoeffs>> {
    cfg.validate(rate_hz)?;
    let fs2 = 2.0 * rate_hz;
    let w1 = fs2 * (std::f64::consts::PI * cfg.low_hz / rate_hz).tan();
    let w2 = fs2 * (std::f64::consts::PI * cfg.high_hz / rate_hz).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;
    let n = cfg.order;

    let mut poles = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let theta = std::f64::consts::PI * (2 * k + n - 1) as f64 / (2 * n) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let pb = proto * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let eps = 1e-12;
    let mut sections: Vec<SosCoeffs> = poles
        .iter()
        .filter(|z| z.im > eps)
        .map(|z| SosCoeffs {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -2.0 * z.re, z.norm_sqr()],
        })
        .collect();
    let mut real: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= eps).map(|z| z.re).collect();
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for pair in real.chunks(2) {
        let (p, q) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(SosCoeffs {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(p + q), p * q],
        });
    }
    if sections.len() != n {
        return Err(Error::config("filter", "pole pairing failed for this band"));
    }

    // normalize to unity gain at the center frequency
    let center = 2.0 * (w0_sq.sqrt() / fs2).atan();
    let z_inv = Complex64::from_polar(1.0, -center);
    let gain: f64 = sections.iter().map(|s| s.response(z_inv).norm()).product();
    let per_section = gain.powf(-1.0 / n as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    Ok(sections)
}

/// Magnitude of a section cascade at `freq_hz`.
pub fn cascade_magnitude(sections: &[SosCoeffs], freq_hz: f64, rate_hz: f64) -> f64 {
    let z_inv = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * freq_hz / rate_hz);
    sections.iter().map(|s| s.response(z_inv).norm()).product()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Biquad<T> {
    b: [T; 3],
    a1: T,
    a2: T,
    z1: T,
    z2: T,
}

impl<T: Real> Biquad<T> {
    fn new(c: &SosCoeffs) -> Self {
        Self {
            b: [T::of(c.b[0]), T::of(c.b[1]), T::of(c.b[2])],
            a1: T::of(c.a[1]),
            a2: T::of(c.a[2]),
            z1: T::zero(),
            z2: T::zero(),
        }
    }

    // transposed direct form II
    #[inline]
    fn process(&mut self, x: T) -> T {
        let y = self.b[0] * x + self.z1;
        self.z1 = self.b[1] * x - self.a1 * y + self.z2;
        self.z2 = self.b[2] * x - self.a2 * y;
        y
    }
}

/// Streaming band-pass filter with independent state per channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandpassFilter<T> {
    rate_hz: f64,
    sections: Vec<SosCoeffs>,
    state: Vec<Vec<Biquad<T>>>,
}

impl<T: Real> BandpassFilter<T> {
    pub fn new(cfg: &FilterConfig, rate_hz: f64, channels: usize) -> Result<Self> {
        let sections = design_butterworth_bandpass(cfg, rate_hz)?;
        let state = (0..channels)
            .map(|_| sections.iter().map(Biquad::new).collect())
            .collect();
        Ok(Self {
            rate_hz,
            sections,
            state,
        })
    }

    pub fn sections(&self) -> &[SosCoeffs] {
        &self.sections
    }

    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        cascade_magnitude(&self.sections, freq_hz, self.rate_hz)
    }

    #[inline]
    pub fn process_sample(&mut self, channel: usize, x: T) -> T {
        self.state[channel].iter_mut().fold(x, |acc, s| s.process(acc))
    }

    /// Filters a block, continuing from the current state.
    pub fn process(&mut self, block: &SignalBuffer<T>) -> Result<SignalBuffer<T>> {
        if block.num_channels() != self.state.len() {
            return Err(Error::Shape(format!(
                "filter has {} channels, block has {}",
                self.state.len(),
                block.num_channels()
            )));
        }
        if block.rate_hz() != self.rate_hz {
            return Err(Error::Shape("block sample rate differs from filter design rate".into()));
        }
        let channels = block
            .channels()
            .iter()
            .enumerate()
            .map(|(c, ch)| ch.iter().map(|&x| self.process_sample(c, x)).collect())
            .collect();
        SignalBuffer::new(self.rate_hz, channels)
    }

    pub fn reset(&mut self) {
        for s in self.state.iter_mut().flatten() {
            s.z1 = T::zero();
            s.z2 = T::zero();
        }
    }
}

/// Causal band-pass of a whole buffer from zero initial state.
pub fn bandpass_filter<T: Real>(raw: &SignalBuffer<T>, cfg: &FilterConfig) -> Result<SignalBuffer<T>> {
    if raw.is_empty() {
        return Err(Error::Input("cannot filter an empty signal".into()));
    }
    BandpassFilter::new(cfg, raw.rate_hz(), raw.num_channels())?.process(raw)
}

pub fn rectify<T: Real>(x: &SignalBuffer<T>) -> SignalBuffer<T> {
    x.map(|v| v.abs())
}

/// Neutral-state statistics used by adaptive normalization and the encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile<T> {
    pub alpha: T,
    pub median_per_channel: Vec<T>,
    /// Base delta-coding threshold; `None` until the encoder is calibrated.
    pub theta_min: Option<T>,
}

/// Exact median; even counts average the two central order statistics.
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / T::of(2.0)
    })
}

pub fn compute_calibration<T: Real>(neutral_rectified: &SignalBuffer<T>, alpha: T) -> Result<CalibrationProfile<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::config("signal.alpha", "must be > 0"));
    }
    let median_per_channel = neutral_rectified
        .channels()
        .iter()
        .enumerate()
        .map(|(c, ch)| median(ch).ok_or_else(|| Error::Calibration(format!("channel {c} is empty"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationProfile {
        alpha,
        median_per_channel,
        theta_min: None,
    })
}

/// `min(1, max(0, (x - m) / (alpha * m)))`.
#[inline]
pub fn normalize_sample<T: Real>(x: T, median: T, alpha: T) -> T {
    ((x - median) / (alpha * median)).max(T::zero()).min(T::one())
}

/// Adaptive normalization; errors on a zero channel median.
pub fn adaptive_normalize<T: Real>(rect: &SignalBuffer<T>, profile: &CalibrationProfile<T>) -> Result<SignalBuffer<T>> {
    adaptive_normalize_floored(rect, profile, None)
}

/// Adaptive normalization substituting `floor` for zero medians when given.
pub fn adaptive_normalize_floored<T: Real>(
    rect: &SignalBuffer<T>,
    profile: &CalibrationProfile<T>,
    floor: Option<T>,
) -> Result<SignalBuffer<T>> {
    let medians = effective_medians(profile, rect.num_channels(), floor)?;
    let channels = rect
        .channels()
        .iter()
        .zip(&medians)
        .map(|(ch, &m)| ch.iter().map(|&x| normalize_sample(x, m, profile.alpha)).collect())
        .collect();
    SignalBuffer::new(rect.rate_hz(), channels)
}

pub(crate) fn effective_medians<T: Real>(
    profile: &CalibrationProfile<T>,
    channels: usize,
    floor: Option<T>,
) -> Result<Vec<T>> {
    if profile.median_per_channel.len() != channels {
        return Err(Error::Shape(format!(
            "profile has {} medians, signal has {channels} channels",
            profile.median_per_channel.len()
        )));
    }
    if !(profile.alpha > T::zero()) {
        return Err(Error::config("signal.alpha", "must be > 0"));
    }
    profile
        .median_per_channel
        .iter()
        .enumerate()
        .map(|(c, &m)| {
            if m > T::zero() {
                Ok(m)
            } else {
                match floor {
                    Some(f) if f > T::zero() => Ok(f),
                    _ => Err(Error::DegenerateCalibration { channel: c }),
                }
            }
        })
        .collect()
}
