use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::partition::PartitionMap;
use crate::rng::{gaussian, gaussian_vec, seeded};
use crate::weightspace::{norm2, sub};

use super::rel_frobenius;

const GAUGE_TOL: f64 = 1e-10;
const INJECTIVITY_SLACK: f64 = 1e-12;
const MAX_CONDITION: f64 = 100.0;
const SCALES: [f64; 2] = [0.1, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryCheck {
    pub name: String,
    pub seed: u64,
    /// Relative error for invariance checks; for injectivity, the shortfall
    /// `1 − ‖Pθ − Pθ'‖ / ‖θ − θ'‖`.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymmetryReport {
    pub checks: Vec<SymmetryCheck>,
}

impl SymmetryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SymmetryCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Gaussian `r x r` matrix, redrawn until its condition number is at most 100.
pub fn random_gauge(rank: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(rank, rank, |_, _| gaussian(rng));
        let s = g.singular_values();
        let (max, min) = (s.max(), s.min());
        if min > 0.0 && max / min <= MAX_CONDITION {
            return g;
        }
    }
}

/// `(B, A) ↦ (B G⁻¹, G A)`.
pub fn gauge_transform(
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let inv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("gauge matrix is singular".into()))?;
    Ok((b * inv, g * a))
}

/// For each seed: a random gauge `G`, the scale maps `λ ∈ {0.1, 10}`, and a
/// GPart injectivity check on a random pair over an `m·n` weight space.
pub fn symmetry_suite(a: &DMatrix<f64>, b: &DMatrix<f64>, seeds: &[u64]) -> Result<SymmetryReport> {
    let (r, n) = a.shape();
    let m = b.nrows();
    if r == 0 || b.ncols() != r {
        return Err(Error::Parameter(format!(
            "factors must be B: m x r and A: r x n with r >= 1 (got B {:?}, A {:?})",
            b.shape(),
            a.shape()
        )));
    }
    let product = b * a;
    let mut report = SymmetryReport::default();
    let mut push = |name: String, seed: u64, error: f64, tolerance: f64| {
        report.checks.push(SymmetryCheck {
            name,
            seed,
            error,
            tolerance,
            passed: error <= tolerance,
        });
    };

    for &seed in seeds {
        let mut rng = seeded(seed);
        let g = random_gauge(r, &mut rng);
        let (bg, ga) = gauge_transform(b, a, &g)?;
        push(
            "gauge".into(),
            seed,
            rel_frobenius(&(bg * ga), &product),
            GAUGE_TOL,
        );

        for lambda in SCALES {
            let scaled = (b * lambda) * (a * (1.0 / lambda));
            push(
                format!("scale({lambda})"),
                seed,
                rel_frobenius(&scaled, &product),
                GAUGE_TOL,
            );
        }

        let total = m * n;
        let dim = (total / 4).max(1);
        let pm = PartitionMap::build(seed, total, dim)?;
        let x = gaussian_vec(&mut rng, dim, 1.0);
        let y = gaussian_vec(&mut rng, dim, 1.0);
        let dist = norm2(&sub(&x, &y));
        let wdist = norm2(&sub(&pm.project(&x)?, &pm.project(&y)?));
        let shortfall = if dist > 0.0 { 1.0 - wdist / dist } else { 0.0 };
        push("injectivity".into(), seed, shortfall, INJECTIVITY_SLACK);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(rows, cols, |_, _| gaussian(&mut rng))
    }

    #[test]
    fn identity_gauge_is_identity() {
        let (a, b) = (random(3, 5, 1), random(4, 3, 2));
        let (b2, a2) = gauge_transform(&b, &a, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(b2, b);
        assert_eq!(a2, a);
    }

    #[test]
    fn scalar_gauge() {
        let (a, b) = (random(3, 5, 1), random(4, 3, 2));
        let (b2, a2) = gauge_transform(&b, &a, &(DMatrix::identity(3, 3) * 2.0)).unwrap();
        assert!((b2 - &b * 0.5).amax() <= 1e-15);
        assert!((a2 - &a * 2.0).amax() <= 1e-15);
    }

    #[test]
    fn random_gauge_r3_dense_oracle() {
        let (a, b) = (random(3, 7, 3), random(6, 3, 4));
        let g = random_gauge(3, &mut seeded(5));
        let inv = g.clone().try_inverse().unwrap();
        let err = rel_frobenius(&(&b * &inv * &g * &a), &(&b * &a));
        assert!(err <= 1e-10);
    }

    #[test]
    fn suite_passes_on_twenty_draws() {
        let (a, b) = (random(2, 8, 6), random(8, 2, 7));
        let seeds: Vec<u64> = (0..20).collect();
        let rep = symmetry_suite(&a, &b, &seeds).unwrap();
        assert_eq!(rep.checks.len(), 80);
        assert!(rep.all_passed(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn gauge_condition_bound() {
        let mut rng = seeded(11);
        for _ in 0..20 {
            let s = random_gauge(4, &mut rng).singular_values();
            assert!(s.max() / s.min() <= 100.0);
        }
    }
}
