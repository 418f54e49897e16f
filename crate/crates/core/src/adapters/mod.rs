//! Interchangeable fine-tuning parameterizations.
//!
//! Every adapter owns a flat vector of trainable coordinates and maps it to a
//! weight-space delta `Δw ∈ R^N`; [`Adapter::pullback_grad`] is the adjoint
//! of that map's Jacobian at the current coordinates.

mod checkpoint;
mod full;
mod gpart;
mod lora;
mod unilora;

use std::fmt;
use std::str::FromStr;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, HEADER_LEN, MAGIC,
    VERSION,
};
pub use full::FullAdapter;
pub use gpart::{GPartAdapter, GPartMode};
pub use lora::{lora_delta, lora_factor_total, lora_pullback, LoraAdapter, LORA_INIT_STD};
pub use unilora::{UniLoraAdapter, UNILORA_INIT_STD};

use crate::error::{Error, Result};
use crate::weightspace::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdapterKind {
    GPart,
    GPartNonIsometric,
    Lora,
    UniLora,
    Full,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::GPart => "gpart",
            AdapterKind::GPartNonIsometric => "gpart_noniso",
            AdapterKind::Lora => "lora",
            AdapterKind::UniLora => "unilora",
            AdapterKind::Full => "full",
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gpart" => AdapterKind::GPart,
            "gpart_noniso" => AdapterKind::GPartNonIsometric,
            "lora" => AdapterKind::Lora,
            "unilora" => AdapterKind::UniLora,
            "full" => AdapterKind::Full,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown adapter kind {other:?} (expected gpart, gpart_noniso, lora, unilora or full)"
                )))
            }
        })
    }
}

pub trait Adapter {
    fn kind(&self) -> AdapterKind;

    /// `N`, the length of the weight-space delta.
    fn total(&self) -> usize;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn delta(&self) -> WeightVector;

    fn pullback_grad(&self, grad_w: &[f64]) -> Result<Vec<f64>>;

    fn count_trainable(&self) -> usize {
        self.params().len()
    }

    /// `w0 + Δw`; `w0` is left untouched.
    fn merge(&self, w0: &[f64]) -> Result<WeightVector> {
        if w0.len() != self.total() {
            return Err(Error::length("base weights", self.total(), w0.len()));
        }
        let mut w = self.delta();
        for (x, b) in w.iter_mut().zip(w0) {
            *x += b;
        }
        Ok(w)
    }

    fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let dst = self.params_mut();
        if dst.len() != values.len() {
            return Err(Error::length(
                "trainable parameters",
                dst.len(),
                values.len(),
            ));
        }
        dst.copy_from_slice(values);
        Ok(())
    }
}

pub(crate) fn check_grad_len(grad_w: &[f64], total: usize) -> Result<()> {
    if grad_w.len() != total {
        return Err(Error::length("weight-space gradient", total, grad_w.len()));
    }
    Ok(())
}

/// Runtime-selected adapter.
#[derive(Debug, Clone)]
pub enum AnyAdapter {
    GPart(GPartAdapter),
    Lora(LoraAdapter),
    UniLora(UniLoraAdapter),
    Full(FullAdapter),
}

macro_rules! dispatch {
    ($self:expr, $a:ident => $body:expr) => {
        match $self {
            AnyAdapter::GPart($a) => $body,
            AnyAdapter::Lora($a) => $body,
            AnyAdapter::UniLora($a) => $body,
            AnyAdapter::Full($a) => $body,
        }
    };
}

impl Adapter for AnyAdapter {
    fn kind(&self) -> AdapterKind {
        dispatch!(self, a => a.kind())
    }
    fn total(&self) -> usize {
        dispatch!(self, a => a.total())
    }
    fn params(&self) -> &[f64] {
        dispatch!(self, a => a.params())
    }
    fn params_mut(&mut self) -> &mut [f64] {
        dispatch!(self, a => a.params_mut())
    }
    fn delta(&self) -> WeightVector {
        dispatch!(self, a => a.delta())
    }
    fn pullback_grad(&self, grad_w: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, a => a.pullback_grad(grad_w))
    }
    fn count_trainable(&self) -> usize {
        dispatch!(self, a => a.count_trainable())
    }
}

impl AnyAdapter {
    pub fn as_gpart(&self) -> Option<&GPartAdapter> {
        match self {
            AnyAdapter::GPart(g) => Some(g),
            _ => None,
        }
    }
}
