//! Window-based reference detectors used to benchmark TAD-LIF.

use crate::encode::SpikeTensor;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{median, SignalBuffer};

use super::metrics::Interval;

pub const DEFAULT_WINDOW_MS: f64 = 300.0;
pub const DEFAULT_OVERLAP: f64 = 0.5;

fn window_samples(window_ms: f64, rate_hz: f64) -> Result<usize> {
    let w = (window_ms * rate_hz / 1000.0).round();
    if !(w >= 2.0) {
        return Err(Error::config("detect.window_ms", "window must cover at least 2 samples"));
    }
    Ok(w as usize)
}

/// Amplitude-threshold detector on the rectified signal.
///
/// A window fires when, on any channel, `max - median` over the window
/// exceeds `threshold`. Overlapping or touching fired windows merge.
pub fn amp_threshold_detect<T: Real>(
    rectified: &SignalBuffer<T>,
    threshold: T,
    window_ms: f64,
    overlap: f64,
) -> Result<Vec<Interval>> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::config("detect.overlap", "must lie in [0, 1)"));
    }
    let window = window_samples(window_ms, rectified.rate_hz())?;
    let hop = ((window as f64 * (1.0 - overlap)).round() as usize).max(1);
    let mut out: Vec<Interval> = Vec::new();
    let mut start = 0;
    while start + window <= rectified.len() {
        let fired = rectified.channels().iter().any(|ch| {
            let w = &ch[start..start + window];
            let max = w.iter().copied().fold(T::neg_infinity(), T::max);
            let med = median(w).expect("window is non-empty");
            max - med > threshold
        });
        if fired {
            let end = start + window;
            match out.last_mut() {
                Some(last) if start <= last.offset => last.offset = end,
                _ => out.push(Interval::new(start, end)),
            }
        }
        start += hop;
    }
    Ok(out)
}

/// Spike-count detector: an onset is the first step whose column holds more
/// than `t_s` spikes; the window starting there is a detection when its total
/// spike count exceeds `count_threshold`. The search resumes after the window.
pub fn spike_threshold_detect(
    spikes: &SpikeTensor,
    rate_hz: f64,
    t_s: usize,
    window_ms: f64,
    count_threshold: usize,
) -> Result<Vec<Interval>> {
    let window = window_samples(window_ms, rate_hz)?;
    let counts: Vec<usize> = spikes
        .columns()
        .map(|c| c.iter().map(|&b| b as usize).sum())
        .collect();
    let mut out = Vec::new();
    let mut t = 0;
    while t < counts.len() {
        if counts[t] > t_s {
            let end = (t + window).min(counts.len());
            let total: usize = counts[t..end].iter().sum();
            if total > count_threshold {
                out.push(Interval::new(t, end));
            }
            t = end;
        } else {
            t += 1;
        }
    }
    Ok(out)
}
