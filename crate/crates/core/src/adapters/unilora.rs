use crate::error::{Error, Result};
use crate::partition::{PartitionMap, ThetaVector};
use crate::rng::{gaussian_vec, seeded};
use crate::weightspace::{ModelManifest, WeightVector};

use super::lora::{lora_delta, lora_factor_total, lora_pullback};
use super::{Adapter, AdapterKind};

/// Standard deviation of the Gaussian used for `θ` at creation. A zero
/// start would sit on a critical point of the bilinear map.
pub const UNILORA_INIT_STD: f64 = 1e-3;

/// `θ ∈ R^d → P θ ∈ R^D` (concatenated LoRA factors) `→ B_l A_l` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct UniLoraAdapter {
    manifest: ModelManifest,
    rank: usize,
    factor_pm: PartitionMap,
    theta: ThetaVector,
}

impl UniLoraAdapter {
    pub fn new(
        manifest: ModelManifest,
        rank: usize,
        dim: usize,
        partition_seed: u64,
        init_seed: u64,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Parameter("LoRA rank must be at least 1".into()));
        }
        let factor_total = lora_factor_total(&manifest, rank);
        let factor_pm = PartitionMap::build(partition_seed, factor_total, dim)?;
        let theta = gaussian_vec(&mut seeded(init_seed), dim, UNILORA_INIT_STD).into();
        Ok(Self {
            manifest,
            rank,
            factor_pm,
            theta,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    pub fn factor_partition(&self) -> &PartitionMap {
        &self.factor_pm
    }

    /// `D`
    pub fn factor_total(&self) -> usize {
        self.factor_pm.total()
    }

    /// Reconstructed LoRA factor vector `P θ`.
    pub fn factors(&self) -> Vec<f64> {
        self.factor_pm
            .project(&self.theta)
            .expect("theta length fixed at construction")
            .into_inner()
    }
}

impl Adapter for UniLoraAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::UniLora
    }

    fn total(&self) -> usize {
        self.manifest.total()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn delta(&self) -> WeightVector {
        lora_delta(&self.manifest, self.rank, &self.factors()).expect("factor layout fixed")
    }

    fn pullback_grad(&self, grad_w: &[f64]) -> Result<Vec<f64>> {
        let factor_grad = lora_pullback(&self.manifest, self.rank, &self.factors(), grad_w)?;
        Ok(self.factor_pm.pullback(&factor_grad)?.into_inner())
    }
}
