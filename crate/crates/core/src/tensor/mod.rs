//! Dense complex tensors stored in row-major order.
//!
//! Everything above this layer (chain tensors, gates, reduced density
//! matrices) is a [`DenseTensor`]. Rank-2 tensors double as matrices; the
//! heavy kernels (matrix products, singular value decomposition) borrow the
//! storage as a [`faer::MatRef`] without copying.

mod expm;
mod svd;

use std::fmt;

use faer::{linalg::matmul::matmul, Accum, MatRef, Par};
use num_complex::Complex64 as C64;
use thiserror::Error;

pub use expm::matrix_exponential;
pub use svd::{svd_truncate, SvdResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} implies {expected} elements but {found} were supplied")]
    ElementCount { shape: Vec<usize>, expected: usize, found: usize },

    #[error("tensor contains a non-finite amplitude")]
    NonFinite,

    #[error("zero-sized dimension in shape {0:?}")]
    ZeroDimension(Vec<usize>),

    #[error("cannot contract shapes {a:?} (axes {a_axes:?}) and {b:?} (axes {b_axes:?})")]
    ContractionMismatch {
        a: Vec<usize>,
        a_axes: Vec<usize>,
        b: Vec<usize>,
        b_axes: Vec<usize>,
    },

    #[error("expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },

    #[error("expected a square matrix, got shape {0:?}")]
    NotSquare(Vec<usize>),

    #[error("invalid axis permutation {perm:?} for rank {rank}")]
    Permutation { perm: Vec<usize>, rank: usize },

    #[error("cannot reshape {from:?} into {to:?}")]
    Reshape { from: Vec<usize>, to: Vec<usize> },

    #[error("zero matrix at bond")]
    ZeroMatrix,

    #[error("singular value decomposition failed to converge")]
    SvdFailed,
}

pub type TensorResult<T> = Result<T, TensorError>;

#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl DenseTensor {
    /// Builds a tensor from row-major data, checking element count and
    /// finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> TensorResult<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ZeroDimension(shape));
        }
        if expected != data.len() {
            return Err(TensorError::ElementCount { shape, expected, found: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self { shape, data })
    }

    // Internal constructor for data produced by our own kernels.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn scalar(z: C64) -> Self {
        Self { shape: Vec::new(), data: vec![z] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = C64::new(1.0, 0.0);
        }
        t
    }

    /// Vector (rank-1 tensor) from a slice.
    pub fn vector(v: &[C64]) -> Self {
        Self { shape: vec![v.len()], data: v.to_vec() }
    }

    /// Matrix from a closure over `(row, col)`.
    pub fn matrix_from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { shape: vec![rows, cols], data }
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let n = d.len();
        let mut t = Self::zeros(&[n, n]);
        for (i, &z) in d.iter().enumerate() {
            t.data[i * n + i] = z;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (k, (&i, &d)) in index.iter().zip(&self.shape).enumerate() {
            assert!(i < d, "index {i} out of range for axis {k} of size {d}");
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], z: C64) {
        let off = self.offset(index);
        self.data[off] = z;
    }

    /// Element `(i, j)` of a rank-2 tensor.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn expect_rank(&self, expected: usize) -> TensorResult<()> {
        if self.rank() != expected {
            return Err(TensorError::Rank { expected, shape: self.shape.clone() });
        }
        Ok(())
    }

    pub fn expect_square(&self) -> TensorResult<usize> {
        self.expect_rank(2)?;
        if self.shape[0] != self.shape[1] {
            return Err(TensorError::NotSquare(self.shape.clone()));
        }
        Ok(self.shape[0])
    }

    pub fn reshape(mut self, shape: &[usize]) -> TensorResult<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(TensorError::Reshape { from: self.shape, to: shape.to_vec() });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Reorders axes: axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> TensorResult<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::Permutation { perm: perm.to_vec(), rank });
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        let mut src = 0usize;
        for _ in 0..n {
            out.push(self.data[src]);
            // odometer increment over the new shape
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                src += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape: new_shape, data: out })
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> TensorResult<Self> {
        self.expect_rank(2)?;
        let (r, c) = (self.shape[0], self.shape[1]);
        Ok(Self::matrix_from_fn(c, r, |i, j| self.data[j * c + i].conj()))
    }

    pub fn transpose(&self) -> TensorResult<Self> {
        self.expect_rank(2)?;
        self.permute(&[1, 0])
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| x * z).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> TensorResult<Self> {
        if self.shape != other.shape {
            return Err(TensorError::Reshape { from: other.shape.clone(), to: self.shape.clone() });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn add(&self, other: &Self) -> TensorResult<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> TensorResult<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> TensorResult<C64> {
        let n = self.expect_square()?;
        Ok((0..n).map(|i| self.data[i * n + i]).sum())
    }

    /// Borrows a rank-2 tensor as a faer matrix view.
    pub fn as_mat(&self) -> MatRef<'_, C64> {
        assert_eq!(self.rank(), 2, "as_mat on rank-{} tensor", self.rank());
        MatRef::from_row_major_slice(&self.data, self.shape[0], self.shape[1])
    }

    pub fn from_mat(m: MatRef<'_, C64>) -> Self {
        Self::matrix_from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn matmul(&self, other: &Self) -> TensorResult<Self> {
        self.expect_rank(2)?;
        other.expect_rank(2)?;
        if self.shape[1] != other.shape[0] {
            return Err(TensorError::ContractionMismatch {
                a: self.shape.clone(),
                a_axes: vec![1],
                b: other.shape.clone(),
                b_axes: vec![0],
            });
        }
        Ok(matmul_raw(self.as_mat(), other.as_mat()))
    }

    /// Kronecker product of two matrices; the left factor is the slow index.
    pub fn kron(&self, other: &Self) -> TensorResult<Self> {
        self.expect_rank(2)?;
        other.expect_rank(2)?;
        let (ar, ac) = (self.shape[0], self.shape[1]);
        let (br, bc) = (other.shape[0], other.shape[1]);
        Ok(Self::matrix_from_fn(ar * br, ac * bc, |i, j| {
            self.data[(i / br) * ac + j / bc] * other.data[(i % br) * bc + j % bc]
        }))
    }

    /// Deviation of `self† self` from the identity (largest element).
    pub fn unitarity_residual(&self) -> TensorResult<f64> {
        let n = self.expect_square()?;
        let prod = self.adjoint()?.matmul(self)?;
        Ok(prod.max_abs_diff(&Self::identity(n)))
    }
}

/// Product of two faer views into a fresh row-major tensor.
pub(crate) fn matmul_raw<A, B>(a: MatRef<'_, A>, b: MatRef<'_, B>) -> DenseTensor
where
    A: faer::traits::Conjugate<Canonical = C64>,
    B: faer::traits::Conjugate<Canonical = C64>,
{
    let (m, n) = (a.nrows(), b.ncols());
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    {
        let dst = faer::MatMut::from_row_major_slice_mut(&mut out, m, n);
        matmul(dst, Accum::Replace, a, b, C64::new(1.0, 0.0), Par::Seq);
    }
    DenseTensor::from_raw(vec![m, n], out)
}

/// Contracts `a_axes` of `a` against `b_axes` of `b` (pairwise, in order).
///
/// The result carries the free axes of `a` followed by the free axes of `b`,
/// each in their original order. No complex conjugation is applied.
pub fn contract_pair(
    a: &DenseTensor,
    a_axes: &[usize],
    b: &DenseTensor,
    b_axes: &[usize],
) -> TensorResult<DenseTensor> {
    let mismatch = || TensorError::ContractionMismatch {
        a: a.shape.clone(),
        a_axes: a_axes.to_vec(),
        b: b.shape.clone(),
        b_axes: b_axes.to_vec(),
    };
    if a_axes.len() != b_axes.len()
        || a_axes.iter().any(|&x| x >= a.rank())
        || b_axes.iter().any(|&x| x >= b.rank())
        || a_axes.iter().zip(b_axes).any(|(&x, &y)| a.shape[x] != b.shape[y])
    {
        return Err(mismatch());
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|x| !a_axes.contains(x)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|x| !b_axes.contains(x)).collect();
    if free_a.len() + a_axes.len() != a.rank() || free_b.len() + b_axes.len() != b.rank() {
        // repeated axis
        return Err(mismatch());
    }
    let m: usize = free_a.iter().map(|&x| a.shape[x]).product();
    let k: usize = a_axes.iter().map(|&x| a.shape[x]).product();
    let n: usize = free_b.iter().map(|&x| b.shape[x]).product();

    let pa: Vec<usize> = free_a.iter().chain(a_axes).copied().collect();
    let pb: Vec<usize> = b_axes.iter().chain(&free_b).copied().collect();
    let at = a.permute(&pa)?;
    let bt = b.permute(&pb)?;
    let prod = matmul_raw(
        MatRef::from_row_major_slice(&at.data, m, k),
        MatRef::from_row_major_slice(&bt.data, k, n),
    );
    let shape: Vec<usize> =
        free_a.iter().map(|&x| a.shape[x]).chain(free_b.iter().map(|&x| b.shape[x])).collect();
    Ok(DenseTensor::from_raw(shape, prod.data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(shape: &[usize], rng: &mut impl Rng) -> DenseTensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        DenseTensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn new_rejects_bad_input() {
        assert!(matches!(
            DenseTensor::new(vec![2, 2], vec![c(0.0, 0.0); 3]),
            Err(TensorError::ElementCount { .. })
        ));
        assert_eq!(
            DenseTensor::new(vec![1], vec![c(f64::NAN, 0.0)]),
            Err(TensorError::NonFinite)
        );
    }

    #[test]
    fn identity_contraction_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random(&[3, 4], &mut rng);
        let r = contract_pair(&m, &[1], &DenseTensor::identity(4), &[0]).unwrap();
        assert_eq!(r.shape(), &[3, 4]);
        assert!(r.max_abs_diff(&m) < 1e-15);
    }

    #[test]
    fn vector_self_contraction_is_squared_norm() {
        let v = DenseTensor::vector(&[c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)]);
        let r = contract_pair(&v.conj(), &[0], &v, &[0]).unwrap();
        assert_eq!(r.rank(), 0);
        assert!((r.data()[0] - c(1.0 + 4.0 + 0.25 + 9.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn matches_triple_loop_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&[3, 4], &mut rng);
        let b = random(&[4, 5], &mut rng);
        let r = contract_pair(&a, &[1], &b, &[0]).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let mut acc = c(0.0, 0.0);
                for k in 0..4 {
                    acc += a.get(&[i, k]) * b.get(&[k, j]);
                }
                assert!((r.get(&[i, j]) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contraction_orders_free_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&[2, 3, 4], &mut rng);
        let b = random(&[4, 5, 2], &mut rng);
        // contract a.0 with b.2 and a.2 with b.0 -> result [3, 5]
        let r = contract_pair(&a, &[0, 2], &b, &[2, 0]).unwrap();
        assert_eq!(r.shape(), &[3, 5]);
        for j in 0..3 {
            for l in 0..5 {
                let mut acc = c(0.0, 0.0);
                for i in 0..2 {
                    for k in 0..4 {
                        acc += a.get(&[i, j, k]) * b.get(&[k, l, i]);
                    }
                }
                assert!((r.get(&[j, l]) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = DenseTensor::zeros(&[2, 3]);
        let b = DenseTensor::zeros(&[4, 2]);
        let err = contract_pair(&a, &[1], &b, &[0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn permute_matches_index_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(&[2, 3, 4], &mut rng);
        let p = a.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, i, j]), a.get(&[i, j, k]));
                }
            }
        }
        assert!(a.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn kron_layout() {
        let a = DenseTensor::matrix_from_fn(2, 2, |i, j| c((i * 2 + j) as f64, 0.0));
        let b = DenseTensor::identity(3);
        let k = a.kron(&b).unwrap();
        assert_eq!(k.at(3 + 1, 1), a.at(1, 0));
        assert_eq!(k.at(4, 2), c(0.0, 0.0));
    }

    proptest::proptest! {
        #[test]
        fn contraction_is_associative(seed in 0u64..10_000, d1 in 1usize..5, d2 in 1usize..5, d3 in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&[2, d1], &mut rng);
            let b = random(&[d1, 3, d2], &mut rng);
            let cc = random(&[d2, d3], &mut rng);
            let left = contract_pair(&contract_pair(&a, &[1], &b, &[0]).unwrap(), &[2], &cc, &[0]).unwrap();
            let bc = contract_pair(&b, &[2], &cc, &[0]).unwrap();
            let right = contract_pair(&a, &[1], &bc, &[0]).unwrap();
            proptest::prop_assert!(left.max_abs_diff(&right) < 1e-10);
        }
    }
}
