use crate::adapters::{Adapter, GPartAdapter};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDecayAudit {
    pub theta_sq: f64,
    pub delta_sq: f64,
    /// `delta_sq / theta_sq`; 1 when both are zero.
    pub ratio: f64,
}

/// Compares the penalty AdamW actually applies (`‖θ‖²`) with the squared
/// size of the weight update it is meant to regularize (`‖Δw‖²`).
pub fn weight_decay_audit(adapter: &GPartAdapter) -> WeightDecayAudit {
    let theta_sq = sum_sq(adapter.theta());
    let delta_sq = sum_sq(&adapter.delta());
    let ratio = if theta_sq == 0.0 {
        1.0
    } else {
        delta_sq / theta_sq
    };
    WeightDecayAudit {
        theta_sq,
        delta_sq,
        ratio,
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
