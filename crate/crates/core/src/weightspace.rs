//! The flattened weight space `R^N` over a list of adapted matrices.
//!
//! Each layer matrix is vectorized column-major (the `vec` convention of
//! `vec(XYZ) = (Z^T ⊗ X) vec(Y)`) and layers are concatenated in
//! registration order. `nalgebra` stores `DMatrix` column-major, so flatten
//! and unflatten are plain copies.

use std::fmt::Write as _;
use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl LayerSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelManifest {
    layers: Vec<LayerSpec>,
    total: usize,
}

/// Builds a manifest with generated layer names `layer0`, `layer1`, ...
pub fn build_manifest(layer_shapes: &[(usize, usize)]) -> Result<ModelManifest> {
    let named: Vec<(String, usize, usize)> = layer_shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| (format!("layer{i}"), r, c))
        .collect();
    ModelManifest::from_named(&named)
}

impl ModelManifest {
    pub fn from_named<S: AsRef<str>>(layers: &[(S, usize, usize)]) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Manifest("no layers given".into()));
        }
        let mut specs = Vec::with_capacity(layers.len());
        let mut offset = 0usize;
        for (name, rows, cols) in layers {
            let name = name.as_ref();
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::Manifest(format!(
                    "layer name {name:?} must be a non-empty identifier without whitespace"
                )));
            }
            if *rows == 0 || *cols == 0 {
                return Err(Error::Manifest(format!(
                    "layer `{name}` has a zero dimension ({rows}x{cols})"
                )));
            }
            let len = rows
                .checked_mul(*cols)
                .ok_or_else(|| Error::Manifest(format!("layer `{name}` is too large")))?;
            specs.push(LayerSpec {
                name: name.to_string(),
                rows: *rows,
                cols: *cols,
                offset,
            });
            offset = offset
                .checked_add(len)
                .ok_or_else(|| Error::Manifest("total parameter count overflows".into()))?;
        }
        Ok(Self {
            layers: specs,
            total: offset,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// `N`, the number of adapted scalar weights.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.offset).collect()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.rows, l.cols)).collect()
    }

    /// One `name rows cols` line per layer.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.layers {
            let _ = writeln!(out, "{} {} {}", l.name, l.rows, l.cols);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| {
                    Error::Manifest(format!("line {}: bad dimension {s:?}", lineno + 1))
                })
            };
            match fields.as_slice() {
                [name, rows, cols] => layers.push((name.to_string(), parse(rows)?, parse(cols)?)),
                _ => {
                    return Err(Error::Manifest(format!(
                        "line {}: expected `name rows cols`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_named(&layers)
    }
}

/// A point (or direction) in the flattened weight space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for WeightVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn flatten(matrices: &[DMatrix<f64>], manifest: &ModelManifest) -> Result<WeightVector> {
    if matrices.len() != manifest.layers.len() {
        return Err(Error::length(
            "layer count",
            manifest.layers.len(),
            matrices.len(),
        ));
    }
    let mut out = Vec::with_capacity(manifest.total);
    for (m, spec) in matrices.iter().zip(&manifest.layers) {
        if m.shape() != (spec.rows, spec.cols) {
            return Err(Error::Shape {
                layer: spec.name.clone(),
                expected: (spec.rows, spec.cols),
                got: m.shape(),
            });
        }
        out.extend_from_slice(m.as_slice());
    }
    Ok(WeightVector(out))
}

pub fn unflatten(v: &[f64], manifest: &ModelManifest) -> Result<Vec<DMatrix<f64>>> {
    if v.len() != manifest.total {
        return Err(Error::length("weight vector", manifest.total, v.len()));
    }
    Ok(manifest
        .layers
        .iter()
        .map(|l| DMatrix::from_column_slice(l.rows, l.cols, &v[l.range()]))
        .collect())
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
