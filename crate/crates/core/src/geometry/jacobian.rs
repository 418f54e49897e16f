use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense construction is limited to `r <= 4` and `m, n <= 16`.
pub const JACOBIAN_MAX_RANK: usize = 4;
pub const JACOBIAN_MAX_DIM: usize = 16;

/// Jacobian blocks of `(A, B) ↦ vec(BA)` under column-major `vec`:
/// `J_A = I_n ⊗ B` (mn × rn) and `J_B = Aᵀ ⊗ I_m` (mn × mr).
///
/// Both depend on the current factors, so equal steps in factor space move
/// `BA` by amounts that vary with where the factors currently sit.
pub fn lora_jacobian_blocks(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (r, n) = a.shape();
    let (m, rb) = b.shape();
    if r != rb {
        return Err(Error::Parameter(format!(
            "A is {r}x{n} but B is {m}x{rb}; inner dimensions must agree"
        )));
    }
    if r > JACOBIAN_MAX_RANK || m > JACOBIAN_MAX_DIM || n > JACOBIAN_MAX_DIM {
        return Err(Error::SizeGuard(format!(
            "dense Jacobian limited to r <= {JACOBIAN_MAX_RANK}, m, n <= {JACOBIAN_MAX_DIM} (got r={r}, m={m}, n={n})"
        )));
    }
    let j_a = DMatrix::<f64>::identity(n, n).kronecker(b);
    let j_b = a.transpose().kronecker(&DMatrix::<f64>::identity(m, m));
    Ok((j_a, j_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian, seeded};
    use nalgebra::DVector;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(rows, cols, |_, _| gaussian(&mut rng))
    }

    fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(m.as_slice())
    }

    #[test]
    fn directional_derivative_in_a_is_exact() {
        let (a, b, e) = (random(2, 5, 1), random(4, 2, 2), random(2, 5, 3));
        let (j_a, _) = lora_jacobian_blocks(&a, &b).unwrap();
        let t = 0.37;
        let lhs = vec_of(&(&b * (&a + &e * t))) - vec_of(&(&b * &a));
        let rhs = &j_a * vec_of(&e) * t;
        assert!((lhs - rhs).amax() <= 1e-14);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let (a, b) = (random(3, 6, 4), random(5, 3, 5));
        let (j_a, j_b) = lora_jacobian_blocks(&a, &b).unwrap();
        let h = 1e-6;
        let f = |a: &DMatrix<f64>, b: &DMatrix<f64>| vec_of(&(b * a));
        for k in 0..a.len() {
            let (mut ap, mut am) = (a.clone(), a.clone());
            ap[k] += h;
            am[k] -= h;
            let fd = (f(&ap, &b) - f(&am, &b)) / (2.0 * h);
            let col = j_a.column(k);
            assert!((fd - col).amax() <= 1e-7 * col.amax().max(1.0));
        }
        for k in 0..b.len() {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[k] += h;
            bm[k] -= h;
            let fd = (f(&a, &bp) - f(&a, &bm)) / (2.0 * h);
            let col = j_b.column(k);
            assert!((fd - col).amax() <= 1e-7 * col.amax().max(1.0));
        }
    }

    #[test]
    fn jacobian_scales_with_b() {
        let (a, b) = (random(2, 3, 6), random(3, 2, 7));
        let (j_a, _) = lora_jacobian_blocks(&a, &b).unwrap();
        let (j_a2, _) = lora_jacobian_blocks(&a, &(&b * 3.0)).unwrap();
        assert!((j_a * 3.0 - j_a2).amax() <= 1e-15);
    }

    #[test]
    fn spectra_depend_on_factorization() {
        let (a, b) = (random(2, 3, 8), random(3, 2, 9));
        let joint = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
            let (j_a, j_b) = lora_jacobian_blocks(a, b).unwrap();
            let mut j = DMatrix::zeros(9, 12);
            j.columns_mut(0, 6).copy_from(&j_a);
            j.columns_mut(6, 6).copy_from(&j_b);
            let mut s = j.singular_values().as_slice().to_vec();
            s.sort_by(|x, y| y.total_cmp(x));
            s
        };
        let s1 = joint(&a, &b);
        let s2 = joint(&(&a * 2.0), &(&b * 0.5));
        assert!(((&b * &a) - (&b * 0.5) * (&a * 2.0)).amax() <= 1e-15);
        let gap = s1
            .iter()
            .zip(&s2)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap > 0.1, "spectra {s1:?} vs {s2:?}");
    }

    #[test]
    fn guards() {
        assert!(matches!(
            lora_jacobian_blocks(&random(5, 3, 0), &random(3, 5, 0)),
            Err(Error::SizeGuard(_))
        ));
        assert!(matches!(
            lora_jacobian_blocks(&random(2, 3, 0), &random(3, 3, 0)),
            Err(Error::Parameter(_))
        ));
    }
}
