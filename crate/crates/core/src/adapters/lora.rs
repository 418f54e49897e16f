use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, seeded};
use crate::weightspace::{ModelManifest, WeightVector};

use super::{check_grad_len, Adapter, AdapterKind};

/// Standard deviation of the Gaussian used for `A` at creation.
pub const LORA_INIT_STD: f64 = 0.02;

/// `D = Σ r (m + n)`, the length of the concatenated factor vector.
pub fn lora_factor_total(manifest: &ModelManifest, rank: usize) -> usize {
    manifest
        .layers()
        .iter()
        .map(|l| rank * (l.rows + l.cols))
        .sum()
}

/// Factor vector layout: per layer `vec(B)` (m x r) then `vec(A)` (r x n),
/// both column-major, layers in manifest order.
fn split_layer(
    factors: &[f64],
    offset: usize,
    rows: usize,
    cols: usize,
    rank: usize,
) -> (&[f64], &[f64]) {
    let b_len = rows * rank;
    let a_len = rank * cols;
    (
        &factors[offset..offset + b_len],
        &factors[offset + b_len..offset + b_len + a_len],
    )
}

fn check_factors(manifest: &ModelManifest, rank: usize, factors: &[f64]) -> Result<()> {
    let expected = lora_factor_total(manifest, rank);
    if factors.len() != expected {
        return Err(Error::length("LoRA factor vector", expected, factors.len()));
    }
    Ok(())
}

/// Flattened per-layer products `B_l A_l`.
pub fn lora_delta(manifest: &ModelManifest, rank: usize, factors: &[f64]) -> Result<WeightVector> {
    check_factors(manifest, rank, factors)?;
    let mut out = Vec::with_capacity(manifest.total());
    let mut offset = 0;
    for l in manifest.layers() {
        let (b, a) = split_layer(factors, offset, l.rows, l.cols, rank);
        let b = DMatrix::from_column_slice(l.rows, rank, b);
        let a = DMatrix::from_column_slice(rank, l.cols, a);
        out.extend_from_slice((b * a).as_slice());
        offset += rank * (l.rows + l.cols);
    }
    Ok(out.into())
}

/// Adjoint of the bilinear map at `factors`: `∂B = G Aᵀ`, `∂A = Bᵀ G`.
pub fn lora_pullback(
    manifest: &ModelManifest,
    rank: usize,
    factors: &[f64],
    grad_w: &[f64],
) -> Result<Vec<f64>> {
    check_factors(manifest, rank, factors)?;
    check_grad_len(grad_w, manifest.total())?;
    let mut out = Vec::with_capacity(factors.len());
    let mut offset = 0;
    for l in manifest.layers() {
        let (b, a) = split_layer(factors, offset, l.rows, l.cols, rank);
        let b = DMatrix::from_column_slice(l.rows, rank, b);
        let a = DMatrix::from_column_slice(rank, l.cols, a);
        let g = DMatrix::from_column_slice(l.rows, l.cols, &grad_w[l.range()]);
        out.extend_from_slice((&g * a.transpose()).as_slice());
        out.extend_from_slice((b.transpose() * &g).as_slice());
        offset += rank * (l.rows + l.cols);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    manifest: ModelManifest,
    rank: usize,
    factors: Vec<f64>,
}

impl LoraAdapter {
    /// `B = 0` and `A ~ N(0, 0.02²)` drawn from `seed`.
    pub fn new(manifest: ModelManifest, rank: usize, seed: u64) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Parameter("LoRA rank must be at least 1".into()));
        }
        let mut rng = seeded(seed);
        let mut factors = Vec::with_capacity(lora_factor_total(&manifest, rank));
        for l in manifest.layers() {
            factors.extend(std::iter::repeat_n(0.0, l.rows * rank));
            factors.extend(gaussian_vec(&mut rng, rank * l.cols, LORA_INIT_STD));
        }
        Ok(Self {
            manifest,
            rank,
            factors,
        })
    }

    /// Builds an adapter from explicit `(B_l, A_l)` pairs.
    pub fn from_factors(
        manifest: ModelManifest,
        rank: usize,
        pairs: &[(DMatrix<f64>, DMatrix<f64>)],
    ) -> Result<Self> {
        if pairs.len() != manifest.layers().len() {
            return Err(Error::length(
                "LoRA factor pairs",
                manifest.layers().len(),
                pairs.len(),
            ));
        }
        let mut factors = Vec::with_capacity(lora_factor_total(&manifest, rank));
        for ((b, a), l) in pairs.iter().zip(manifest.layers()) {
            if b.shape() != (l.rows, rank) {
                return Err(Error::Shape {
                    layer: format!("{}.B", l.name),
                    expected: (l.rows, rank),
                    got: b.shape(),
                });
            }
            if a.shape() != (rank, l.cols) {
                return Err(Error::Shape {
                    layer: format!("{}.A", l.name),
                    expected: (rank, l.cols),
                    got: a.shape(),
                });
            }
            factors.extend_from_slice(b.as_slice());
            factors.extend_from_slice(a.as_slice());
        }
        Ok(Self {
            manifest,
            rank,
            factors,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    /// `(B_l, A_l)` for layer `index`.
    pub fn layer_factors(&self, index: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let offset: usize = self.manifest.layers()[..index]
            .iter()
            .map(|l| self.rank * (l.rows + l.cols))
            .sum();
        let l = &self.manifest.layers()[index];
        let (b, a) = split_layer(&self.factors, offset, l.rows, l.cols, self.rank);
        (
            DMatrix::from_column_slice(l.rows, self.rank, b),
            DMatrix::from_column_slice(self.rank, l.cols, a),
        )
    }
}

impl Adapter for LoraAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Lora
    }

    fn total(&self) -> usize {
        self.manifest.total()
    }

    fn params(&self) -> &[f64] {
        &self.factors
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.factors
    }

    fn delta(&self) -> WeightVector {
        lora_delta(&self.manifest, self.rank, &self.factors)
            .expect("factor layout fixed at construction")
    }

    fn pullback_grad(&self, grad_w: &[f64]) -> Result<Vec<f64>> {
        lora_pullback(&self.manifest, self.rank, &self.factors, grad_w)
    }
}
