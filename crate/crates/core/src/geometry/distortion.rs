use std::fmt::Write as _;

use crate::adapters::{lora_delta, lora_factor_total, Adapter, UniLoraAdapter};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::partition::PartitionMap;
use crate::rng::{gaussian_vec, seeded};
use crate::weightspace::{norm2, sub, ModelManifest};

/// An end-to-end map from trainable coordinates to a weight-space delta.
#[derive(Debug, Clone)]
pub enum ProbeMap {
    GPartIso(PartitionMap),
    GPartNonIso(PartitionMap),
    /// Factor vector `(vec B_l, vec A_l)_l ↦ (B_l A_l)_l`.
    Lora {
        manifest: ModelManifest,
        rank: usize,
    },
    UniLora(UniLoraAdapter),
}

impl ProbeMap {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeMap::GPartIso(_) => "gpart_iso",
            ProbeMap::GPartNonIso(_) => "gpart_noniso",
            ProbeMap::Lora { .. } => "lora",
            ProbeMap::UniLora(_) => "unilora",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ProbeMap::GPartIso(pm) | ProbeMap::GPartNonIso(pm) => pm.dim(),
            ProbeMap::Lora { manifest, rank } => lora_factor_total(manifest, *rank),
            ProbeMap::UniLora(u) => u.params().len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match self {
            ProbeMap::GPartIso(pm) => pm.project(x)?.into_inner(),
            ProbeMap::GPartNonIso(pm) => pm.broadcast(x)?.into_inner(),
            ProbeMap::Lora { manifest, rank } => lora_delta(manifest, *rank, x)?.into_inner(),
            ProbeMap::UniLora(u) => {
                let mut u = u.clone();
                u.set_params(x)?;
                u.delta().into_inner()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub kind: String,
    /// `‖f(x) − f(y)‖ / ‖x − y‖` per sampled pair.
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `max / min`
    pub spread: f64,
}

impl DistortionReport {
    /// `kind,pair,ratio` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,pair,ratio\n");
        for (i, r) in self.ratios.iter().enumerate() {
            let _ = writeln!(out, "{},{i},{}", self.kind, fmt_sig(*r));
        }
        out
    }
}

/// Samples `num_pairs` independent standard-normal coordinate pairs and
/// records weight-space over trainable-space distance ratios.
pub fn distortion_probe(map: &ProbeMap, num_pairs: usize, seed: u64) -> Result<DistortionReport> {
    if num_pairs < 10 {
        return Err(Error::Parameter(format!(
            "need at least 10 pairs, got {num_pairs}"
        )));
    }
    let dim = map.input_dim();
    let mut rng = seeded(seed);
    let mut ratios = Vec::with_capacity(num_pairs);
    while ratios.len() < num_pairs {
        let x = gaussian_vec(&mut rng, dim, 1.0);
        let y = gaussian_vec(&mut rng, dim, 1.0);
        let dist = norm2(&sub(&x, &y));
        if dist == 0.0 {
            continue;
        }
        let wdist = norm2(&sub(&map.apply(&x)?, &map.apply(&y)?));
        ratios.push(wdist / dist);
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DistortionReport {
        kind: map.name().to_string(),
        spread: max / min,
        ratios,
        min,
        max,
    })
}
