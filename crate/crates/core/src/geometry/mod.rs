//! Geometric diagnostics: distance distortion of the trainable-to-weight
//! maps, LoRA Jacobian blocks and symmetries, weight-decay audits, random
//! direction loss landscapes and subspace-dimension sweeps.

mod audit;
mod distortion;
mod jacobian;
mod landscape;
mod sweep;
mod symmetry;

pub use audit::{weight_decay_audit, WeightDecayAudit};
pub use distortion::{distortion_probe, DistortionReport, ProbeMap};
pub use jacobian::{lora_jacobian_blocks, JACOBIAN_MAX_DIM, JACOBIAN_MAX_RANK};
pub use landscape::{
    gpart_weight_space_landscape, grid_coords, loss_landscape, random_directions, LandscapeGrid,
    LandscapeSpec,
};
pub use sweep::{dim_sweep, sweep_to_csv, SweepRow};
pub use symmetry::{gauge_transform, random_gauge, symmetry_suite, SymmetryCheck, SymmetryReport};

use nalgebra::DMatrix;

/// `‖x − y‖_F / ‖y‖_F`, falling back to the absolute error when `y = 0`.
pub(crate) fn rel_frobenius(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let diff = (x - y).norm();
    let scale = y.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
