use crate::error::Result;
use crate::weightspace::WeightVector;

use super::{check_grad_len, Adapter, AdapterKind};

/// Full fine-tuning: the trainable vector is `Δw` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct FullAdapter {
    delta: Vec<f64>,
}

impl FullAdapter {
    pub fn new(total: usize) -> Self {
        Self {
            delta: vec![0.0; total],
        }
    }
}

impl Adapter for FullAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Full
    }

    fn total(&self) -> usize {
        self.delta.len()
    }

    fn params(&self) -> &[f64] {
        &self.delta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.delta
    }

    fn delta(&self) -> WeightVector {
        self.delta.clone().into()
    }

    fn pullback_grad(&self, grad_w: &[f64]) -> Result<Vec<f64>> {
        check_grad_len(grad_w, self.total())?;
        Ok(grad_w.to_vec())
    }
}
