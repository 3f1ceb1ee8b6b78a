//! Accumulate (AC) / multiply-accumulate (MAC) accounting for one inference.
//!
//! Rule table, applied per inference:
//!
//! | stage       | charge                                                       |
//! |-------------|--------------------------------------------------------------|
//! | encode      | per sample and channel: 1 AC (difference) + N AC (compares)  |
//! | detect      | per activated step: 1 MAC + 2 AC; dormant steps are free     |
//! | fc_in       | `H x hidden` MAC, once (the static current is reused)        |
//! | lif_hidden  | per neuron and step: 1 MAC + 2 AC                            |
//! | fc_out      | per hidden spike event: `classes x population` AC            |
//! | lif_out     | per neuron and step: 1 MAC + 2 AC                            |
//!
//! Costs are kept in femtojoules so totals are exact integers.

use serde::{Deserialize, Serialize};

use super::model::{SnnModel, SpikeRecord};
use crate::scalar::Real;

/// 32-bit integer accumulate.
pub const AC_FJ: u64 = 100;
/// 32-bit multiply-accumulate.
pub const MAC_FJ: u64 = 3200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub ac_fj: u64,
    pub mac_fj: u64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            ac_fj: AC_FJ,
            mac_fj: MAC_FJ,
        }
    }
}

impl EnergyModel {
    pub fn ac_pj(&self) -> f64 {
        self.ac_fj as f64 / 1000.0
    }

    pub fn mac_pj(&self) -> f64 {
        self.mac_fj as f64 / 1000.0
    }

    pub fn cost_fj(&self, ops: StageOps) -> u64 {
        ops.ac * self.ac_fj + ops.mac * self.mac_fj
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOps {
    pub ac: u64,
    pub mac: u64,
}

impl std::ops::Add for StageOps {
    type Output = StageOps;
    fn add(self, o: StageOps) -> StageOps {
        StageOps {
            ac: self.ac + o.ac,
            mac: self.mac + o.mac,
        }
    }
}

impl std::ops::AddAssign for StageOps {
    fn add_assign(&mut self, o: StageOps) {
        *self = *self + o;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBreakdown {
    pub encode: StageOps,
    pub detect: StageOps,
    pub fc_in: StageOps,
    pub lif_hidden: StageOps,
    pub fc_out: StageOps,
    pub lif_out: StageOps,
}

impl StageBreakdown {
    pub fn total(&self) -> StageOps {
        self.encode + self.detect + self.fc_in + self.lif_hidden + self.fc_out + self.lif_out
    }
}

impl std::ops::AddAssign for StageBreakdown {
    fn add_assign(&mut self, o: StageBreakdown) {
        self.encode += o.encode;
        self.detect += o.detect;
        self.fc_in += o.fc_in;
        self.lif_hidden += o.lif_hidden;
        self.fc_out += o.fc_out;
        self.lif_out += o.lif_out;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub stages: StageBreakdown,
    pub ac_count: u64,
    pub mac_count: u64,
    pub total_fj: u64,
    pub total_pj: f64,
}

impl EnergyReport {
    pub fn from_stages(stages: StageBreakdown, model: &EnergyModel) -> Self {
        let total = stages.total();
        let total_fj = model.cost_fj(total);
        Self {
            stages,
            ac_count: total.ac,
            mac_count: total.mac,
            total_fj,
            total_pj: total_fj as f64 / 1000.0,
        }
    }

    /// Picojoules spent in one stage.
    pub fn stage_pj(&self, ops: StageOps, model: &EnergyModel) -> f64 {
        model.cost_fj(ops) as f64 / 1000.0
    }
}

/// Encoder charge for `samples` multichannel samples with `trains` thresholds.
pub fn encode_ops(samples: u64, channels: u64, trains: u64) -> StageOps {
    StageOps {
        ac: samples * channels * (1 + trains),
        mac: 0,
    }
}

/// Detector charge for `active_steps` activated TAD-LIF steps.
pub fn detect_ops(active_steps: u64) -> StageOps {
    StageOps {
        ac: 2 * active_steps,
        mac: active_steps,
    }
}

/// Classifier stages of the rule table.
pub fn classifier_ops<T: Real>(model: &SnnModel<T>, record: &SpikeRecord<T>) -> StageBreakdown {
    let steps = record.t_sim as u64;
    let hidden = model.hidden as u64;
    let outputs = model.outputs() as u64;
    StageBreakdown {
        fc_in: StageOps {
            ac: 0,
            mac: model.input_dim as u64 * hidden,
        },
        lif_hidden: StageOps {
            ac: 2 * hidden * steps,
            mac: hidden * steps,
        },
        fc_out: StageOps {
            ac: record.hidden_spike_events() * outputs,
            mac: 0,
        },
        lif_out: StageOps {
            ac: 2 * outputs * steps,
            mac: outputs * steps,
        },
        ..Default::default()
    }
}

pub fn count_ops<T: Real>(model: &SnnModel<T>, record: &SpikeRecord<T>) -> EnergyReport {
    EnergyReport::from_stages(classifier_ops(model, record), &EnergyModel::default())
}

/// Femtojoules a dense (non-spiking) output layer would spend: every
/// hidden-to-output connection charged one MAC per step.
pub fn dense_fc_out_fj<T: Real>(model: &SnnModel<T>, energy: &EnergyModel) -> u64 {
    model.hidden as u64 * model.outputs() as u64 * model.t_sim as u64 * energy.mac_fj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{SnnConfig, SolverConfig, SolverMode};

    fn tiny() -> SnnModel<f64> {
        let cfg = SnnConfig {
            hidden: 2,
            population: 1,
            beta: 0.9,
            u_th: 1.0,
            t_sim: 2,
            solver: SolverConfig { bin: 1, t_fix: 4, mode: SolverMode::Additive },
        };
        SnnModel::from_weights(4, 2, &cfg, vec![0.0; 8], vec![0.0; 4]).unwrap()
    }

    fn record(hidden: Vec<f64>) -> SpikeRecord<f64> {
        SpikeRecord { t_sim: 2, hidden: 2, outputs: 2, hidden_spikes: hidden, output_spikes: vec![0.0; 4], membranes: None }
    }

    #[test]
    fn silent_tiny_network() {
        let r = count_ops(&tiny(), &record(vec![0.0; 4]));
        assert_eq!(r.mac_count, 8 + 4 + 4);
        assert_eq!(r.stages.fc_out.ac, 0);
        assert_eq!(r.ac_count, 2 * 2 * 2 + 2 * 2 * 2);
        assert_eq!(r.total_fj, r.ac_count * 100 + r.mac_count * 3200);
    }

    #[test]
    fn each_hidden_spike_costs_one_fan_out() {
        let m = tiny();
        let base = count_ops(&m, &record(vec![0.0; 4]));
        let one = count_ops(&m, &record(vec![1.0, 0.0, 0.0, 0.0]));
        let three = count_ops(&m, &record(vec![1.0, 1.0, 0.0, 1.0]));
        assert_eq!(one.ac_count - base.ac_count, 2);
        assert_eq!(three.ac_count - base.ac_count, 6);
        assert_eq!((one.mac_count, three.mac_count), (base.mac_count, base.mac_count));
    }

    #[test]
    fn empty_counts_cost_nothing() {
        let r = EnergyReport::from_stages(StageBreakdown::default(), &EnergyModel::default());
        assert_eq!((r.total_fj, r.total_pj), (0, 0.0));
        assert_eq!(EnergyModel::default().ac_pj(), 0.1);
        assert_eq!(EnergyModel::default().mac_pj(), 3.2);
    }

    #[test]
    fn encode_and_detect_rules() {
        assert_eq!(encode_ops(10, 3, 10), StageOps { ac: 330, mac: 0 });
        assert_eq!(detect_ops(7), StageOps { ac: 14, mac: 7 });
        assert_eq!(detect_ops(0), StageOps::default());
    }
}
