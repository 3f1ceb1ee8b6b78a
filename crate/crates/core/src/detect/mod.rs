//! Streaming transient-action detection and detection metrics.

mod baseline;
mod metrics;
mod tad;

pub use baseline::{amp_threshold_detect, spike_threshold_detect, DEFAULT_OVERLAP, DEFAULT_WINDOW_MS};
pub use metrics::{
    evaluate_detection, DetectionMatch, DetectionReport, Interval, LabeledInterval, DEFAULT_MIN_OVERLAP,
};
pub use tad::*;
