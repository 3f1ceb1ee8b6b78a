use serde::{Deserialize, Serialize};

use super::tad::OpCounts;

/// Half-open sample interval `[onset, offset)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub onset: usize,
    pub offset: usize,
}

impl Interval {
    pub fn new(onset: usize, offset: usize) -> Self {
        Self { onset, offset }
    }

    pub fn len(&self) -> usize {
        self.offset.saturating_sub(self.onset)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlap(&self, other: &Interval) -> usize {
        let lo = self.onset.max(other.onset);
        let hi = self.offset.min(other.offset);
        hi.saturating_sub(lo)
    }
}

/// Ground-truth action with its class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInterval {
    pub onset: usize,
    pub offset: usize,
    pub class_id: usize,
}

impl LabeledInterval {
    pub fn interval(&self) -> Interval {
        Interval::new(self.onset, self.offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionMatch {
    pub truth: usize,
    pub detection: usize,
    /// Detection onset minus truth onset, in samples.
    pub onset_offset: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub recall: f64,
    pub precision: f64,
    pub matches: Vec<DetectionMatch>,
    pub n_truth: usize,
    pub n_detected: usize,
    /// Nothing was detected; precision is reported as a vacuous 1.0.
    pub zero_detections: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op_counts: Option<OpCounts>,
}

pub const DEFAULT_MIN_OVERLAP: f64 = 0.5;

/// Greedy one-to-one matching in time order: each truth takes the earliest
/// unmatched detection covering at least `min_overlap` of the truth length.
pub fn evaluate_detection(detected: &[Interval], truth: &[Interval], min_overlap: f64) -> DetectionReport {
    let mut order: Vec<usize> = (0..detected.len()).collect();
    order.sort_by_key(|&i| (detected[i].onset, detected[i].offset));
    let mut used = vec![false; detected.len()];
    let mut matches = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        let need = min_overlap * t.len() as f64;
        let hit = order
            .iter()
            .copied()
            .find(|&di| !used[di] && detected[di].overlap(t) as f64 >= need && detected[di].overlap(t) > 0);
        if let Some(di) = hit {
            used[di] = true;
            matches.push(DetectionMatch {
                truth: ti,
                detection: di,
                onset_offset: detected[di].onset as i64 - t.onset as i64,
            });
        }
    }
    let recall = if truth.is_empty() {
        1.0
    } else {
        matches.len() as f64 / truth.len() as f64
    };
    let zero_detections = detected.is_empty();
    let precision = if zero_detections {
        1.0
    } else {
        matches.len() as f64 / detected.len() as f64
    };
    DetectionReport {
        recall,
        precision,
        matches,
        n_truth: truth.len(),
        n_detected: detected.len(),
        zero_detections,
        op_counts: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: usize, b: usize) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn exact_detection_is_perfect() {
        let truth = vec![iv(10, 50), iv(100, 180)];
        let r = evaluate_detection(&truth, &truth, 0.5);
        assert_eq!((r.recall, r.precision), (1.0, 1.0));
        assert_eq!(r.matches.len(), 2);
    }

    #[test]
    fn no_detections() {
        let r = evaluate_detection(&[], &[iv(0, 10)], 0.5);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.precision, 1.0);
        assert!(r.zero_detections);
        let r = evaluate_detection(&[], &[], 0.5);
        assert_eq!((r.recall, r.precision), (1.0, 1.0));
    }

    #[test]
    fn partial_precision() {
        let truth = vec![iv(0, 100), iv(200, 300)];
        let det = vec![iv(10, 90), iv(150, 160), iv(220, 290)];
        let r = evaluate_detection(&det, &truth, 0.5);
        assert_eq!(r.recall, 1.0);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.matches[1].onset_offset, 20);
    }

    #[test]
    fn one_detection_matches_one_truth() {
        let truth = vec![iv(0, 10), iv(10, 20)];
        let r = evaluate_detection(&[iv(0, 20)], &truth, 0.5);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.recall, 0.5);
        let r = evaluate_detection(&[iv(0, 4)], &truth, 0.5);
        assert_eq!(r.matches.len(), 0);
    }
}
