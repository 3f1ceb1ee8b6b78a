//! TAD-LIF: a non-firing LIF neuron that marks "action in progress" while its
//! membrane sits above threshold, plus an action buffer and a length counter.
//!
//! Membrane update on an activated step (total spikes `X >= t_s`):
//!
//! ```text
//! u <- min(beta * u + omega * X^2, u_max)
//! ```
//!
//! Steps below the activation threshold do no membrane arithmetic. Their decay
//! is accumulated and applied, one multiplication per step, the next time the
//! neuron activates, which reproduces the per-step recurrence bit for bit. The
//! release step of an ongoing action is found from a countdown computed when
//! the membrane was last written.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::encode::SpikeTensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_T_S: usize = 5;
pub const DEFAULT_OMEGA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 0.95;
pub const DEFAULT_U_MAX: f64 = 5.0;
pub const DEFAULT_U_TH: f64 = 1.0;
pub const DEFAULT_L_MIN: usize = 200;
pub const DEFAULT_L_MAX: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TadConfig<T> {
    /// Activation spike-count threshold.
    pub t_s: usize,
    pub omega: T,
    pub beta: T,
    pub u_max: T,
    pub u_th: T,
    pub l_min: usize,
    pub l_max: usize,
    /// Activate on `X >= t_s` (default) rather than `X > t_s`.
    pub inclusive: bool,
    /// Per-channel weights; the drive becomes `sum_c w_c * X_c^2`.
    pub channel_weights: Option<Vec<T>>,
    /// Columns seen just before onset that are prepended to a segment.
    pub pre_roll: usize,
}

impl<T: Real> Default for TadConfig<T> {
    fn default() -> Self {
        Self {
            t_s: DEFAULT_T_S,
            omega: T::of(DEFAULT_OMEGA),
            beta: T::of(DEFAULT_BETA),
            u_max: T::of(DEFAULT_U_MAX),
            u_th: T::of(DEFAULT_U_TH),
            l_min: DEFAULT_L_MIN,
            l_max: DEFAULT_L_MAX,
            inclusive: true,
            channel_weights: None,
            pre_roll: 0,
        }
    }
}

impl<T: Real> TadConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.t_s < 1 {
            return Err(Error::config("tad.t_s", "must be >= 1"));
        }
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(Error::config("tad.beta", "must lie in (0, 1)"));
        }
        if !(self.u_th > T::zero() && self.u_th < self.u_max) {
            return Err(Error::config("tad.u_th", "must satisfy 0 < u_th < u_max"));
        }
        if !(self.l_min > 0 && self.l_min < self.l_max) {
            return Err(Error::config("tad.l_min", "must satisfy 0 < l_min < l_max"));
        }
        if !(self.omega >= T::zero()) {
            return Err(Error::config("tad.omega", "must be >= 0"));
        }
        Ok(())
    }

    #[inline]
    fn activated(&self, x: usize) -> bool {
        if self.inclusive {
            x >= self.t_s
        } else {
            x > self.t_s
        }
    }
}

/// Detected transient action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSegment {
    /// Stream index of the first buffered column.
    pub onset_sample: usize,
    /// Buffered columns (equals the counter when `pre_roll` is 0).
    pub length: usize,
    pub spikes: SpikeTensor,
}

impl ActionSegment {
    pub fn offset_sample(&self) -> usize {
        self.onset_sample + self.length
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TadEvent {
    Segment(ActionSegment),
    /// An action closed with a length outside `[l_min, l_max]`.
    Discard { onset_sample: usize, length: usize },
}

/// Arithmetic actually executed by the detector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub samples: u64,
    /// Steps on which the membrane was updated.
    pub active_steps: u64,
    pub adds: u64,
    pub multiplies: u64,
    pub compares: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.adds + self.multiplies + self.compares
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TadState<T> {
    pub u_mem: T,
    pub counter: usize,
    pub buffer: Vec<u8>,
    pub in_action: bool,
    pub pending_decay_steps: u64,
    /// Inactive steps left before the membrane falls to `u_th`.
    release_countdown: u64,
    onset_sample: usize,
    next_sample: usize,
    /// Membrane value and countdown of the last countdown computation.
    release_memo: Option<(T, u64)>,
    recent: VecDeque<Vec<u8>>,
}

impl<T: Real> Default for TadState<T> {
    fn default() -> Self {
        Self {
            u_mem: T::zero(),
            counter: 0,
            buffer: Vec::new(),
            in_action: false,
            pending_decay_steps: 0,
            release_countdown: 0,
            onset_sample: 0,
            next_sample: 0,
            release_memo: None,
            recent: VecDeque::new(),
        }
    }
}

impl<T: Real> TadState<T> {
    /// Index of the next column this state expects.
    pub fn position(&self) -> usize {
        self.next_sample
    }

    /// Membrane potential with all pending decay applied, without mutating state.
    pub fn effective_membrane(&self, beta: T) -> T {
        let mut u = self.u_mem;
        for _ in 0..self.pending_decay_steps {
            if u == T::zero() {
                break;
            }
            u = beta * u;
        }
        u
    }
}

/// Streaming TAD-LIF detector for one spike stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TadDetector<T> {
    cfg: TadConfig<T>,
    channels: usize,
    trains: usize,
    state: TadState<T>,
    ops: OpCounts,
}

impl<T: Real> TadDetector<T> {
    pub fn new(cfg: TadConfig<T>, channels: usize, trains: usize) -> Result<Self> {
        cfg.validate()?;
        if let Some(w) = &cfg.channel_weights {
            if w.len() != channels {
                return Err(Error::config("tad.channel_weights", format!("needs {channels} entries")));
            }
        }
        Ok(Self {
            cfg,
            channels,
            trains,
            state: TadState::default(),
            ops: OpCounts::default(),
        })
    }

    /// Resumes from a checkpointed state.
    pub fn with_state(cfg: TadConfig<T>, channels: usize, trains: usize, state: TadState<T>) -> Result<Self> {
        let mut d = Self::new(cfg, channels, trains)?;
        d.state = state;
        Ok(d)
    }

    pub fn state(&self) -> &TadState<T> {
        &self.state
    }

    pub fn ops(&self) -> OpCounts {
        self.ops
    }

    pub fn config(&self) -> &TadConfig<T> {
        &self.cfg
    }

    /// Consumes the spike column of the next time step.
    pub fn step(&mut self, column: &[u8]) -> Result<Option<TadEvent>> {
        let width = self.channels * self.trains;
        if column.len() != width {
            return Err(Error::Shape(format!("column of {} bits, detector expects {width}", column.len())));
        }
        let t = self.state.next_sample;
        self.state.next_sample += 1;
        self.ops.samples += 1;

        let x: usize = column.iter().map(|&b| b as usize).sum();
        self.ops.adds += width as u64;
        self.ops.compares += 1;

        let mut event = None;
        if self.cfg.activated(x) {
            self.ops.active_steps += 1;
            self.apply_pending_decay();
            let drive = self.drive(column, x);
            let cfg = &self.cfg;
            self.state.u_mem = (cfg.beta * self.state.u_mem + drive).min(cfg.u_max);
            self.ops.multiplies += 1;
            self.ops.adds += 1;
            self.ops.compares += 1;
            if self.state.u_mem > self.cfg.u_th {
                self.state.release_countdown = self.countdown();
                self.enter_or_extend(t, column);
            } else if self.state.in_action {
                event = Some(self.close());
            }
        } else {
            self.state.pending_decay_steps += 1;
            if self.state.in_action {
                self.state.release_countdown -= 1;
                if self.state.release_countdown == 0 {
                    event = Some(self.close());
                } else {
                    self.enter_or_extend(t, column);
                }
            }
        }
        if self.cfg.pre_roll > 0 {
            if self.state.recent.len() == self.cfg.pre_roll {
                self.state.recent.pop_front();
            }
            self.state.recent.push_back(column.to_vec());
        }
        Ok(event)
    }

    /// Resolves an action still open at end of stream with the same length test.
    pub fn finish(&mut self) -> Option<TadEvent> {
        if self.state.in_action {
            Some(self.close())
        } else {
            None
        }
    }

    fn drive(&mut self, column: &[u8], x: usize) -> T {
        match &self.cfg.channel_weights {
            None => {
                self.ops.multiplies += 2;
                self.cfg.omega * T::of_usize(x * x)
            }
            Some(w) => {
                let n = self.trains;
                let mut acc = T::zero();
                for (c, &wc) in w.iter().enumerate() {
                    let xc: usize = column[c * n..(c + 1) * n].iter().map(|&b| b as usize).sum();
                    acc += wc * T::of_usize(xc * xc);
                }
                self.ops.multiplies += 2 * w.len() as u64;
                self.ops.adds += w.len() as u64;
                acc
            }
        }
    }

    fn apply_pending_decay(&mut self) {
        let beta = self.cfg.beta;
        while self.state.pending_decay_steps > 0 {
            if self.state.u_mem == T::zero() {
                self.state.pending_decay_steps = 0;
                break;
            }
            self.state.u_mem = beta * self.state.u_mem;
            self.state.pending_decay_steps -= 1;
            self.ops.multiplies += 1;
        }
    }

    /// Inactive steps until the membrane first drops to `u_th`.
    fn countdown(&mut self) -> u64 {
        let u = self.state.u_mem;
        if let Some((memo_u, k)) = self.state.release_memo {
            if memo_u == u {
                return k;
            }
        }
        let mut v = u;
        let mut k = 0u64;
        while v > self.cfg.u_th {
            v = self.cfg.beta * v;
            k += 1;
            self.ops.multiplies += 1;
            self.ops.compares += 1;
        }
        self.state.release_memo = Some((u, k));
        k
    }

    fn enter_or_extend(&mut self, t: usize, column: &[u8]) {
        if !self.state.in_action {
            self.state.in_action = true;
            self.state.onset_sample = t - self.state.recent.len();
            self.state.buffer.clear();
            for past in &self.state.recent {
                self.state.buffer.extend_from_slice(past);
            }
        }
        self.state.counter += 1;
        self.state.buffer.extend_from_slice(column);
        self.ops.adds += 1;
    }

    fn close(&mut self) -> TadEvent {
        let counter = self.state.counter;
        let width = self.channels * self.trains;
        let buffer = std::mem::take(&mut self.state.buffer);
        let length = buffer.len() / width;
        let onset_sample = self.state.onset_sample;
        self.state.counter = 0;
        self.state.in_action = false;
        self.ops.compares += 2;
        if counter >= self.cfg.l_min && counter <= self.cfg.l_max {
            let spikes = SpikeTensor::from_bits(self.channels, self.trains, length, buffer)
                .expect("buffer holds whole columns of valid bits");
            TadEvent::Segment(ActionSegment {
                onset_sample,
                length,
                spikes,
            })
        } else {
            TadEvent::Discard { onset_sample, length }
        }
    }
}

/// Result of running a detector over a whole tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TadRun {
    pub segments: Vec<ActionSegment>,
    pub discards: Vec<(usize, usize)>,
    pub ops: OpCounts,
}

/// Single pass of the detector over `spikes`, flushing an open action at the end.
pub fn tad_detect_run<T: Real>(spikes: &SpikeTensor, cfg: &TadConfig<T>) -> Result<TadRun> {
    let mut det = TadDetector::new(cfg.clone(), spikes.channels(), spikes.trains())?;
    let mut segments = Vec::new();
    let mut discards = Vec::new();
    let mut collect = |e: TadEvent| match e {
        TadEvent::Segment(s) => segments.push(s),
        TadEvent::Discard { onset_sample, length } => discards.push((onset_sample, length)),
    };
    for col in spikes.columns() {
        if let Some(e) = det.step(col)? {
            collect(e);
        }
    }
    if let Some(e) = det.finish() {
        collect(e);
    }
    Ok(TadRun {
        segments,
        discards,
        ops: det.ops(),
    })
}

pub fn tad_detect_stream<T: Real>(spikes: &SpikeTensor, cfg: &TadConfig<T>) -> Result<Vec<ActionSegment>> {
    Ok(tad_detect_run(spikes, cfg)?.segments)
}
