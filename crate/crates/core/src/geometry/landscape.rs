use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::adapters::{Adapter, GPartAdapter};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::rng::{gaussian_vec, seeded};
use crate::trainer::{Network, TaskData};
use crate::weightspace::norm2;

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSpec {
    pub grid_size: usize,
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub direction_seeds: Vec<u64>,
    /// Evaluate grid rows on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        Self {
            grid_size: 30,
            alpha_range: (-0.5, 0.5),
            beta_range: (-0.5, 0.5),
            direction_seeds: vec![0, 1, 2],
            parallel: false,
        }
    }
}

impl LandscapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::Parameter(format!(
                "grid size {} < 2",
                self.grid_size
            )));
        }
        for (name, (lo, hi)) in [("alpha", self.alpha_range), ("beta", self.beta_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Parameter(format!(
                    "{name} range [{lo}, {hi}] is empty or not finite"
                )));
            }
        }
        if self.direction_seeds.is_empty() {
            return Err(Error::Parameter(
                "at least one direction seed is required".into(),
            ));
        }
        Ok(())
    }

    pub fn center_index(&self) -> usize {
        self.grid_size / 2
    }
}

/// Grid coordinates around the range midpoint with step
/// `(hi − lo) / (2·⌊n/2⌋)`; index `⌊n/2⌋` is the midpoint exactly. Odd `n`
/// spans `[lo, hi]`; even `n` spans `[lo, hi − step]`.
pub fn grid_coords((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let k = n / 2;
    let mid = 0.5 * (lo + hi);
    let step = (hi - lo) / (2 * k) as f64;
    (0..n).map(|i| mid + (i as f64 - k as f64) * step).collect()
}

/// Two seeded standard-normal directions, each rescaled to `‖θ*‖`
/// (or to unit norm when `θ* = 0`).
pub fn random_directions(seed: u64, theta_star: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let target = match norm2(theta_star) {
        n if n > 0.0 => n,
        _ => 1.0,
    };
    let mut rng = seeded(seed);
    let mut draw = || {
        let mut d = gaussian_vec(&mut rng, theta_star.len(), 1.0);
        let n = norm2(&d);
        if n > 0.0 {
            d.iter_mut().for_each(|x| *x *= target / n);
        }
        d
    };
    let d1 = draw();
    let d2 = draw();
    (d1, d2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// One `alpha x beta` matrix of dev losses per direction seed.
    pub per_seed: Vec<DMatrix<f64>>,
    pub mean: DMatrix<f64>,
    pub theta_star: Vec<f64>,
    /// `(seed index, alpha index, beta index)` of non-finite cells.
    pub flagged: Vec<(usize, usize, usize)>,
}

impl LandscapeGrid {
    pub fn center(&self) -> (usize, usize) {
        (self.alphas.len() / 2, self.betas.len() / 2)
    }

    /// `seed,alpha,beta,loss` rows, seed blocks first, then a `mean` block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,alpha,beta,loss\n");
        let blocks = self
            .seeds
            .iter()
            .map(|s| s.to_string())
            .zip(&self.per_seed)
            .chain(std::iter::once(("mean".to_string(), &self.mean)));
        for (label, values) in blocks {
            for (i, a) in self.alphas.iter().enumerate() {
                for (j, b) in self.betas.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{label},{},{},{}",
                        fmt_sig(*a),
                        fmt_sig(*b),
                        fmt_sig(values[(i, j)])
                    );
                }
            }
        }
        out
    }
}

fn assemble(
    spec: &LandscapeSpec,
    theta_star: Vec<f64>,
    per_seed: Vec<DMatrix<f64>>,
) -> LandscapeGrid {
    let n = spec.grid_size;
    let mut flagged = Vec::new();
    for (s, m) in per_seed.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                if !m[(i, j)].is_finite() {
                    flagged.push((s, i, j));
                }
            }
        }
    }
    let mut mean = DMatrix::zeros(n, n);
    for m in &per_seed {
        mean += m;
    }
    mean /= per_seed.len() as f64;
    LandscapeGrid {
        alphas: grid_coords(spec.alpha_range, n),
        betas: grid_coords(spec.beta_range, n),
        seeds: spec.direction_seeds.clone(),
        per_seed,
        mean,
        theta_star,
        flagged,
    }
}

/// Fills one seed's grid; `row` maps an alpha index to its row of losses.
fn fill<F>(n: usize, parallel: bool, row: F) -> Result<DMatrix<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Vec<f64>> = if parallel {
        (0..n).into_par_iter().map(&row).collect::<Result<_>>()?
    } else {
        (0..n).map(&row).collect::<Result<_>>()?
    };
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Dev loss at `θ* + α δ₁ + β δ₂` over the grid for each direction seed.
/// Non-finite losses are kept and listed in `flagged`.
pub fn loss_landscape<A>(
    adapter: &A,
    network: &Network,
    w0: &[f64],
    task: &TaskData,
    spec: &LandscapeSpec,
) -> Result<LandscapeGrid>
where
    A: Adapter + Clone + Sync,
{
    spec.validate()?;
    let n = spec.grid_size;
    let theta_star = adapter.params().to_vec();
    let dev = task.dev_batch();
    let alphas = grid_coords(spec.alpha_range, n);
    let betas = grid_coords(spec.beta_range, n);

    let mut per_seed = Vec::with_capacity(spec.direction_seeds.len());
    for &seed in &spec.direction_seeds {
        let (d1, d2) = random_directions(seed, &theta_star);
        let grid = fill(n, spec.parallel, |i| {
            let mut local = adapter.clone();
            let mut theta = vec![0.0; theta_star.len()];
            betas
                .iter()
                .map(|&b| {
                    for (k, t) in theta.iter_mut().enumerate() {
                        *t = theta_star[k] + alphas[i] * d1[k] + b * d2[k];
                    }
                    local.set_params(&theta)?;
                    network.loss_unchecked(&local.merge(w0)?, &dev)
                })
                .collect()
        })?;
        per_seed.push(grid);
    }
    Ok(assemble(spec, theta_star, per_seed))
}

/// The same grid evaluated directly in weight space as
/// `w* + α Pδ₁ + β Pδ₂`, which must agree with [`loss_landscape`] for a
/// linear map.
pub fn gpart_weight_space_landscape(
    adapter: &GPartAdapter,
    network: &Network,
    w0: &[f64],
    task: &TaskData,
    spec: &LandscapeSpec,
) -> Result<LandscapeGrid> {
    spec.validate()?;
    let n = spec.grid_size;
    let theta_star = adapter.params().to_vec();
    let w_star = adapter.merge(w0)?;
    let dev = task.dev_batch();
    let alphas = grid_coords(spec.alpha_range, n);
    let betas = grid_coords(spec.beta_range, n);
    let lift = |d: &[f64]| -> Result<Vec<f64>> {
        let mut probe = adapter.clone();
        probe.set_params(d)?;
        Ok(probe.delta().into_inner())
    };

    let mut per_seed = Vec::with_capacity(spec.direction_seeds.len());
    for &seed in &spec.direction_seeds {
        let (d1, d2) = random_directions(seed, &theta_star);
        let (u1, u2) = (lift(&d1)?, lift(&d2)?);
        let grid = fill(n, spec.parallel, |i| {
            let mut w = vec![0.0; w_star.len()];
            betas
                .iter()
                .map(|&b| {
                    for (k, x) in w.iter_mut().enumerate() {
                        *x = w_star[k] + alphas[i] * u1[k] + b * u2[k];
                    }
                    network.loss_unchecked(&w, &dev)
                })
                .collect()
        })?;
        per_seed.push(grid);
    }
    Ok(assemble(spec, theta_star, per_seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_hit_midpoint() {
        let c = grid_coords((-0.5, 0.5), 30);
        assert_eq!(c.len(), 30);
        assert_eq!(c[15], 0.0);
        assert_eq!(c[0], -0.5);
        assert!(c[29] < 0.5);
        let c = grid_coords((-0.5, 0.5), 5);
        assert_eq!(c, vec![-0.5, -0.25, 0.0, 0.25, 0.5]);
    }

    #[test]
    fn directions_are_normalized_and_deterministic() {
        let theta: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let target = norm2(&theta);
        let (d1, d2) = random_directions(4, &theta);
        assert!((norm2(&d1) - target).abs() <= 1e-12 * target);
        assert!((norm2(&d2) - target).abs() <= 1e-12 * target);
        assert_eq!(random_directions(4, &theta), (d1.clone(), d2.clone()));
        let cos = crate::weightspace::dot(&d1, &d2) / (target * target);
        assert!(cos.abs() <= 0.5);
    }

    #[test]
    fn zero_theta_uses_unit_norm() {
        let (d1, _) = random_directions(1, &[0.0; 50]);
        assert!((norm2(&d1) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(LandscapeSpec::default().validate().is_ok());
        let bad = LandscapeSpec {
            grid_size: 1,
            ..LandscapeSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = LandscapeSpec {
            alpha_range: (0.5, -0.5),
            ..LandscapeSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
