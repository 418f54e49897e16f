use crate::error::Result;
use crate::partition::{PartitionMap, ThetaVector};
use crate::weightspace::WeightVector;

use super::{check_grad_len, Adapter, AdapterKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GPartMode {
    /// `Δw_i = θ_g(i) / sqrt(n_g(i))`
    Isometric,
    /// `Δw_i = θ_g(i)`, no group-size normalization.
    NonIsometric,
}

impl GPartMode {
    pub(crate) fn code(self) -> u8 {
        match self {
            GPartMode::Isometric => 0,
            GPartMode::NonIsometric => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GPartMode::Isometric),
            1 => Some(GPartMode::NonIsometric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GPartAdapter {
    pm: PartitionMap,
    theta: ThetaVector,
    mode: GPartMode,
}

impl GPartAdapter {
    /// Starts at `θ = 0`, so the adapted model equals the base model.
    pub fn new(pm: PartitionMap, mode: GPartMode) -> Self {
        let theta = ThetaVector::zeros(pm.dim());
        Self { pm, theta, mode }
    }

    pub fn build(seed: u64, total: usize, dim: usize, mode: GPartMode) -> Result<Self> {
        Ok(Self::new(PartitionMap::build(seed, total, dim)?, mode))
    }

    pub fn partition(&self) -> &PartitionMap {
        &self.pm
    }

    pub fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    pub fn mode(&self) -> GPartMode {
        self.mode
    }
}

impl Adapter for GPartAdapter {
    fn kind(&self) -> AdapterKind {
        match self.mode {
            GPartMode::Isometric => AdapterKind::GPart,
            GPartMode::NonIsometric => AdapterKind::GPartNonIsometric,
        }
    }

    fn total(&self) -> usize {
        self.pm.total()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn delta(&self) -> WeightVector {
        let out = match self.mode {
            GPartMode::Isometric => self.pm.project(&self.theta),
            GPartMode::NonIsometric => self.pm.broadcast(&self.theta),
        };
        out.expect("theta length is fixed at construction")
    }

    fn pullback_grad(&self, grad_w: &[f64]) -> Result<Vec<f64>> {
        check_grad_len(grad_w, self.total())?;
        let g = match self.mode {
            GPartMode::Isometric => self.pm.pullback(grad_w)?,
            GPartMode::NonIsometric => self.pm.group_sums(grad_w)?,
        };
        Ok(g.into_inner())
    }
}

impl GPartAdapter {
    pub fn with_theta(pm: PartitionMap, theta: ThetaVector, mode: GPartMode) -> Result<Self> {
        if theta.len() != pm.dim() {
            return Err(crate::error::Error::length("theta", pm.dim(), theta.len()));
        }
        Ok(Self { pm, theta, mode })
    }
}
