use super::{DenseTensor, TensorError, TensorResult};

/// Truncated singular value decomposition `m ≈ U · diag(σ) · V†`.
///
/// `right_isometry` holds `V†` (shape `k × n`), so the kept factors multiply
/// back together directly.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left_isometry: DenseTensor,
    pub singular_values: Vec<f64>,
    pub right_isometry: DenseTensor,
    /// Sum of squares of the dropped singular values.
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn kept(&self) -> usize {
        self.singular_values.len()
    }

    /// `U · diag(σ) · V†`.
    pub fn reconstruct(&self) -> DenseTensor {
        let (m, k) = (self.left_isometry.shape()[0], self.kept());
        let us = DenseTensor::matrix_from_fn(m, k, |i, j| self.left_isometry.at(i, j) * self.singular_values[j]);
        us.matmul(&self.right_isometry).expect("factor shapes agree")
    }
}

/// Unsorted factors `m = U · diag(σ) · V†` with `U` and `V` stored as
/// column isometries.
struct Factors {
    values: Vec<f64>,
    u: DenseTensor,
    v: DenseTensor,
}

impl Factors {
    fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite()) && self.u.is_finite() && self.v.is_finite()
    }
}

fn thin_factors(m: &DenseTensor) -> Option<Factors> {
    let svd = m.as_mat().thin_svd().ok()?;
    let s = svd.S().column_vector();
    let f = Factors {
        values: (0..s.nrows()).map(|i| s[i].re.max(0.0)).collect(),
        u: DenseTensor::from_mat(svd.U()),
        v: DenseTensor::from_mat(svd.V()),
    };
    f.is_finite().then_some(f)
}

fn adjoint_factors(m: &DenseTensor) -> Option<Factors> {
    let f = thin_factors(&m.adjoint().ok()?)?;
    Some(Factors { values: f.values, u: f.v, v: f.u })
}

fn full_factors(m: &DenseTensor) -> Option<Factors> {
    let svd = m.as_mat().svd().ok()?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let (u, v) = (svd.U(), svd.V());
    let f = Factors {
        values: (0..k).map(|i| s[i].re.max(0.0)).collect(),
        u: DenseTensor::matrix_from_fn(u.nrows(), k, |i, j| u[(i, j)]),
        v: DenseTensor::matrix_from_fn(v.nrows(), k, |i, j| v[(i, j)]),
    };
    f.is_finite().then_some(f)
}

/// Factorizes `m`, retrying on `m†` and then with the full decomposition
/// when the backend returns non-finite factors.
fn factorize(m: &DenseTensor) -> TensorResult<Factors> {
    if let Some(f) = thin_factors(m) {
        return Ok(f);
    }
    log::debug!("thin SVD of a {:?} matrix was not finite; retrying", m.shape());
    adjoint_factors(m).or_else(|| full_factors(m)).ok_or(TensorError::SvdFailed)
}

/// Deterministic thin SVD keeping at most `d_max` values, and dropping the
/// trailing ones with `σ_i / σ_1 < cutoff`. Kept values are not renormalized.
pub fn svd_truncate(m: &DenseTensor, d_max: usize, cutoff: f64) -> TensorResult<SvdResult> {
    m.expect_rank(2)?;
    assert!(d_max >= 1, "d_max must be positive");
    assert!(cutoff >= 0.0, "cutoff must be non-negative");
    if !m.is_finite() {
        return Err(TensorError::NonFinite);
    }
    if m.data().iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(TensorError::ZeroMatrix);
    }
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    let Factors { values: full, u, v } = factorize(m)?;

    // Descending, ties by index.
    let mut order: Vec<usize> = (0..full.len()).collect();
    order.sort_by(|&a, &b| full[b].total_cmp(&full[a]).then(a.cmp(&b)));

    let largest = full[order[0]];
    let mut keep = order.len().min(d_max);
    while keep > 1 && full[order[keep - 1]] / largest < cutoff {
        keep -= 1;
    }
    let discarded_weight: f64 = order[keep..].iter().map(|&i| full[i] * full[i]).sum();

    let left = DenseTensor::matrix_from_fn(rows, keep, |i, j| u.at(i, order[j]));
    let right = DenseTensor::matrix_from_fn(keep, cols, |i, j| v.at(j, order[i]).conj());
    Ok(SvdResult {
        left_isometry: left,
        singular_values: order[..keep].iter().map(|&i| full[i]).collect(),
        right_isometry: right,
        discarded_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use crate::oracle::dense::hermitian_eigenvalues;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::matrix_from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn isometry_residual(u: &DenseTensor, columns: bool) -> f64 {
        let g = if columns { u.adjoint().unwrap().matmul(u).unwrap() } else { u.matmul(&u.adjoint().unwrap()).unwrap() };
        g.max_abs_diff(&DenseTensor::identity(g.shape()[0]))
    }

    #[test]
    fn identity_has_unit_values() {
        let r = svd_truncate(&DenseTensor::identity(4), 4, 0.0).unwrap();
        assert_eq!(r.kept(), 4);
        for s in &r.singular_values {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn rank_one_outer_product() {
        let a = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let b = [C64::new(0.5, 0.5), C64::new(0.5, -0.5)];
        let m = DenseTensor::matrix_from_fn(2, 2, |i, j| a[i] * b[j].conj());
        let r = svd_truncate(&m, 8, 0.0).unwrap();
        assert!((r.singular_values[0] - 1.0).abs() < 1e-14);
        for s in &r.singular_values[1..] {
            assert!(*s < 1e-14);
        }
    }

    #[test]
    fn discarded_weight_matches_reference_spectrum() {
        let m = random(8, 8, 42);
        let r = svd_truncate(&m, 3, 0.0).unwrap();
        // σ² are the eigenvalues of M†M (Jacobi oracle).
        let gram = m.adjoint().unwrap().matmul(&m).unwrap();
        let mut ev = hermitian_eigenvalues(&gram);
        ev.sort_by(|a, b| b.total_cmp(a));
        let expected: f64 = ev[3..].iter().sum();
        assert!((r.discarded_weight - expected).abs() < 1e-10, "{} vs {expected}", r.discarded_weight);
        let err = r.reconstruct().sub(&m).unwrap().norm().powi(2);
        assert!((err - r.discarded_weight).abs() < 1e-10);
        for (s, e) in r.singular_values.iter().zip(&ev) {
            assert!((s * s - e).abs() < 1e-10);
        }
    }

    #[test]
    fn factors_are_isometries() {
        for (rows, cols) in [(6, 9), (9, 6), (5, 5)] {
            let r = svd_truncate(&random(rows, cols, 5), 100, 0.0).unwrap();
            assert!(isometry_residual(&r.left_isometry, true) < 1e-10);
            assert!(isometry_residual(&r.right_isometry, false) < 1e-10);
            assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn relative_cutoff_drops_small_values() {
        let m = DenseTensor::diagonal(&[C64::new(1.0, 0.0), C64::new(1e-3, 0.0), C64::new(1e-9, 0.0)]);
        let r = svd_truncate(&m, 3, 1e-6).unwrap();
        assert_eq!(r.kept(), 2);
        assert!((r.discarded_weight - 1e-18).abs() < 1e-24);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let err = svd_truncate(&DenseTensor::zeros(&[3, 3]), 2, 0.0).unwrap_err();
        assert_eq!(err.to_string(), "zero matrix at bond");
    }

    #[test]
    fn deterministic() {
        let m = random(12, 7, 9);
        let a = svd_truncate(&m, 5, 0.0).unwrap();
        let b = svd_truncate(&m, 5, 0.0).unwrap();
        assert_eq!(a.singular_values, b.singular_values);
        assert_eq!(a.left_isometry, b.left_isometry);
    }

    #[test]
    fn fallback_factorizations_reconstruct() {
        for (rows, cols) in [(7, 4), (4, 7), (5, 5)] {
            let m = random(rows, cols, 17);
            for f in [thin_factors(&m), adjoint_factors(&m), full_factors(&m)] {
                let f = f.unwrap();
                let k = f.values.len();
                assert_eq!(k, rows.min(cols));
                let us = DenseTensor::matrix_from_fn(rows, k, |i, j| f.u.at(i, j) * f.values[j]);
                let back = us.matmul(&f.v.adjoint().unwrap()).unwrap();
                assert!(back.max_abs_diff(&m) < 1e-12);
                assert!(isometry_residual(&f.u, true) < 1e-12);
                assert!(isometry_residual(&f.v, true) < 1e-12);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn full_rank_reconstructs(seed in 0u64..5000, rows in 1usize..7, cols in 1usize..7) {
            let m = random(rows, cols, seed);
            let r = svd_truncate(&m, rows.max(cols), 0.0).unwrap();
            proptest::prop_assert!(r.reconstruct().max_abs_diff(&m) < 1e-10);
        }
    }
}
