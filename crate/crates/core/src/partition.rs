//! The global partition map `g: [0, N) -> [0, d)` and the implicit partition
//! matrix `P` with entries `P[i][j] = 1/sqrt(n_j)` when `g(i) = j`.
//!
//! `P` has one nonzero per row and disjoint column supports, hence
//! `P^T P = I_d`. It is never materialized outside [`PartitionMap::materialize`],
//! which exists as a dense test oracle.

use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{fisher_yates, SplitMix64};
use crate::weightspace::WeightVector;

/// Largest `N * d` that [`PartitionMap::materialize`] accepts.
pub const MATERIALIZE_LIMIT: usize = 10_000_000;

/// Trainable subspace coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ThetaVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ThetaVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ThetaVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMap {
    seed: u64,
    total: usize,
    dim: usize,
    assignment: Vec<u32>,
    group_sizes: Vec<usize>,
    sqrt_sizes: Vec<f64>,
    inv_sqrt_sizes: Vec<f64>,
}

impl PartitionMap {
    /// Shuffles `[0, N)` with Fisher–Yates over a splitmix64 stream seeded
    /// with `seed`, then cuts the shuffled sequence into `d` contiguous
    /// chunks. The first `N mod d` chunks hold `ceil(N/d)` indices, the rest
    /// `floor(N/d)`.
    pub fn build(seed: u64, total: usize, dim: usize) -> Result<Self> {
        if dim == 0 || dim > total {
            return Err(Error::Parameter(format!(
                "subspace dimension d={dim} must satisfy 1 <= d <= N={total}"
            )));
        }
        if dim > u32::MAX as usize {
            return Err(Error::Parameter(format!(
                "d={dim} exceeds 32-bit group ids"
            )));
        }

        let mut order: Vec<usize> = (0..total).collect();
        fisher_yates(&mut order, &mut SplitMix64::new(seed));

        let base = total / dim;
        let extra = total % dim;
        let group_sizes: Vec<usize> = (0..dim).map(|j| base + usize::from(j < extra)).collect();

        let mut assignment = vec![0u32; total];
        let mut cursor = 0;
        for (j, &size) in group_sizes.iter().enumerate() {
            for &i in &order[cursor..cursor + size] {
                assignment[i] = j as u32;
            }
            cursor += size;
        }

        let sqrt_sizes: Vec<f64> = group_sizes.iter().map(|&n| (n as f64).sqrt()).collect();
        let inv_sqrt_sizes = sqrt_sizes.iter().map(|s| 1.0 / s).collect();
        Ok(Self {
            seed,
            total,
            dim,
            assignment,
            group_sizes,
            sqrt_sizes,
            inv_sqrt_sizes,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `N`
    pub fn total(&self) -> usize {
        self.total
    }

    /// `d`
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn inv_sqrt_sizes(&self) -> &[f64] {
        &self.inv_sqrt_sizes
    }

    /// `P theta`: `out[i] = theta[g(i)] / sqrt(n_g(i))`.
    pub fn project(&self, theta: &[f64]) -> Result<WeightVector> {
        self.check_theta(theta)?;
        let scaled: Vec<f64> = theta
            .iter()
            .zip(&self.sqrt_sizes)
            .map(|(t, s)| t / s)
            .collect();
        Ok(self.gather(&scaled))
    }

    /// `P^T v`: `out[j] = (sum over g(i) = j of v[i]) / sqrt(n_j)`.
    pub fn pullback(&self, grad_w: &[f64]) -> Result<ThetaVector> {
        let mut sums = self.group_sums(grad_w)?;
        for (s, r) in sums.iter_mut().zip(&self.sqrt_sizes) {
            *s /= r;
        }
        Ok(sums)
    }

    /// Unnormalized broadcast `out[i] = theta[g(i)]`, the non-isometric map.
    pub fn broadcast(&self, theta: &[f64]) -> Result<WeightVector> {
        self.check_theta(theta)?;
        Ok(self.gather(theta))
    }

    /// Unnormalized adjoint of [`broadcast`](Self::broadcast).
    pub fn group_sums(&self, grad_w: &[f64]) -> Result<ThetaVector> {
        if grad_w.len() != self.total {
            return Err(Error::length(
                "weight-space gradient",
                self.total,
                grad_w.len(),
            ));
        }
        let mut sums = vec![0.0; self.dim];
        for (&g, &v) in self.assignment.iter().zip(grad_w) {
            sums[g as usize] += v;
        }
        Ok(ThetaVector(sums))
    }

    /// Dense `N x d` copy of `P`. Test oracle only.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        if self.total.saturating_mul(self.dim) > MATERIALIZE_LIMIT {
            return Err(Error::SizeGuard(format!(
                "refusing to materialize a {}x{} partition matrix (limit {MATERIALIZE_LIMIT} entries)",
                self.total, self.dim
            )));
        }
        let mut p = DMatrix::zeros(self.total, self.dim);
        for (i, &g) in self.assignment.iter().enumerate() {
            let j = g as usize;
            p[(i, j)] = 1.0 / self.sqrt_sizes[j];
        }
        Ok(p)
    }

    fn gather(&self, per_group: &[f64]) -> WeightVector {
        self.assignment
            .iter()
            .map(|&g| per_group[g as usize])
            .collect::<Vec<_>>()
            .into()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::length("theta", self.dim, theta.len()));
        }
        Ok(())
    }
}
