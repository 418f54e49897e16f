//! AdamW with decoupled weight decay.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(dim: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// One bias-corrected Adam step followed by `p ← p − lr·λ·p`.
    ///
    /// Non-finite gradients propagate into the parameters; callers check.
    pub fn adamw_step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "parameter/gradient length");
        assert_eq!(
            params.len(),
            self.first_moment.len(),
            "parameter/state length"
        );
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            *p *= decay;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// Linear warmup then linear decay to zero.
    Linear,
    /// Linear warmup then half-cosine decay to zero.
    Cosine,
}

impl FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "linear" => Ok(LrSchedule::Linear),
            "cosine" => Ok(LrSchedule::Cosine),
            other => Err(Error::Parameter(format!(
                "unknown schedule {other:?} (expected constant, linear or cosine)"
            ))),
        }
    }
}

impl LrSchedule {
    pub fn as_str(self) -> &'static str {
        match self {
            LrSchedule::Constant => "constant",
            LrSchedule::Linear => "linear",
            LrSchedule::Cosine => "cosine",
        }
    }
}

/// Multiplier on the base learning rate for zero-based `step` out of `total_steps`.
pub fn lr_factor(schedule: LrSchedule, warmup_ratio: f64, step: usize, total_steps: usize) -> f64 {
    if schedule == LrSchedule::Constant || total_steps == 0 {
        return 1.0;
    }
    let warmup = (warmup_ratio * total_steps as f64).ceil() as usize;
    if step < warmup {
        return (step + 1) as f64 / warmup as f64;
    }
    let remaining = (total_steps - warmup).max(1) as f64;
    let progress = ((step - warmup) as f64 / remaining).min(1.0);
    match schedule {
        LrSchedule::Linear => 1.0 - progress,
        LrSchedule::Cosine => 0.5 * (1.0 + (PI * progress).cos()),
        LrSchedule::Constant => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let mut st = OptimizerState::new(3, 0.01, 0.0);
        let mut p = vec![1.0, -2.0, 0.5];
        st.adamw_step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_grad_decay_only_shrinks() {
        let mut st = OptimizerState::new(2, 0.01, 0.1);
        let mut p = vec![1.0, -3.0];
        st.adamw_step(&mut p, &[0.0; 2]);
        assert!((p[0] - 0.999).abs() <= 1e-15);
        assert!((p[1] + 3.0 * 0.999).abs() <= 1e-15);
    }

    #[test]
    fn first_step_closed_form() {
        // At t = 1 the bias corrections give m_hat = g, v_hat = g^2.
        let g = [0.3, -2.0, 1e-9, 0.0];
        let lr = 0.05;
        let mut st = OptimizerState::new(4, lr, 0.0);
        let mut p = vec![0.0; 4];
        st.adamw_step(&mut p, &g);
        for (pi, gi) in p.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() <= 1e-15, "{pi} vs {expected}");
        }
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn schedule_shapes() {
        let total = 100;
        assert_eq!(lr_factor(LrSchedule::Linear, 0.06, 0, total), 1.0 / 6.0);
        assert_eq!(lr_factor(LrSchedule::Linear, 0.06, 5, total), 1.0);
        assert_eq!(lr_factor(LrSchedule::Linear, 0.06, 6, total), 1.0);
        assert!(lr_factor(LrSchedule::Linear, 0.06, 99, total) < 0.02);
        assert!((lr_factor(LrSchedule::Cosine, 0.0, 50, total) - 0.5).abs() < 1e-12);
        assert_eq!(lr_factor(LrSchedule::Constant, 0.5, 3, total), 1.0);
    }
}
