//! Global-partition subspace fine-tuning.
//!
//! A `d`-dimensional trainable vector is mapped into the flattened weight
//! space `R^N` of a model through a sparse partition matrix `P` with
//! orthonormal columns, so `w = w0 + P theta`. The crate also carries LoRA,
//! Uni-LoRA and full fine-tuning baselines behind the same [`Adapter`]
//! interface, a small tanh MLP trainer, and geometry diagnostics
//! (distortion probes, Jacobian blocks, symmetry checks, loss landscapes).

pub mod adapters;
pub mod error;
pub mod geometry;
pub mod io;
pub mod partition;
pub mod rng;
pub mod trainer;
pub mod verify;
pub mod weightspace;

pub use adapters::{
    Adapter, AdapterKind, AnyAdapter, FullAdapter, GPartAdapter, GPartMode, LoraAdapter,
    UniLoraAdapter,
};
pub use error::{Error, Result};
pub use partition::{PartitionMap, ThetaVector};
pub use weightspace::{LayerSpec, ModelManifest, WeightVector};
