//! Naive dense state-vector routines, used as references for the chain.
//!
//! Nothing here goes through the tensor contraction or SVD code paths.

use num_complex::Complex64 as C64;

use crate::tensor::DenseTensor;

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations on the
/// equivalent real symmetric matrix `[[A, -B], [B, A]]`.
pub fn hermitian_eigenvalues(m: &DenseTensor) -> Vec<f64> {
    let n = m.shape()[0];
    assert_eq!(m.shape(), [n, n], "square matrix required");
    let size = 2 * n;
    let mut a = vec![0.0; size * size];
    for i in 0..n {
        for j in 0..n {
            let z = m.at(i, j);
            a[i * size + j] = z.re;
            a[(i + n) * size + j + n] = z.re;
            a[i * size + j + n] = -z.im;
            a[(i + n) * size + j] = z.im;
        }
    }
    jacobi_symmetric(&mut a, size);
    let mut ev: Vec<f64> = (0..size).map(|i| a[i * size + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.into_iter().step_by(2).collect()
}

fn jacobi_symmetric(a: &mut [f64], n: usize) {
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            return;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

/// Multi-index of a row-major flat index.
pub fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for s in (0..dims.len()).rev() {
        idx[s] = flat % dims[s];
        flat /= dims[s];
    }
    idx
}

pub fn flatten(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Applies `op` to the listed sites (in the listed order, which need not be
/// sorted or adjacent) of a state over `dims`.
pub fn apply_operator(psi: &[C64], dims: &[usize], sites: &[usize], op: &DenseTensor) -> Vec<C64> {
    let local: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
    let ld: usize = local.iter().product();
    assert_eq!(op.shape(), [ld, ld], "operator does not match the sites");
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for (flat, &amp) in psi.iter().enumerate() {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let idx = unflatten(flat, dims);
        let col = flatten(&sites.iter().map(|&s| idx[s]).collect::<Vec<_>>(), &local);
        for row in 0..ld {
            let coeff = op.at(row, col);
            if coeff == C64::new(0.0, 0.0) {
                continue;
            }
            let mut target = idx.clone();
            for (k, &s) in sites.iter().enumerate() {
                target[s] = unflatten(row, &local)[k];
            }
            out[flatten(&target, dims)] += coeff * amp;
        }
    }
    out
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_squared(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm_sqr()
}

/// `⟨ψ| O_sites |ψ⟩`.
pub fn expectation(psi: &[C64], dims: &[usize], sites: &[usize], op: &DenseTensor) -> C64 {
    inner(psi, &apply_operator(psi, dims, sites, op))
}

/// Reduced density matrix of the `keep` sites (in the listed order), by
/// explicit summation over all other indices.
pub fn reduced_density(psi: &[C64], dims: &[usize], keep: &[usize]) -> DenseTensor {
    let kd: Vec<usize> = keep.iter().map(|&s| dims[s]).collect();
    let n: usize = kd.iter().product();
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();
    let td: Vec<usize> = traced.iter().map(|&s| dims[s]).collect();
    let env: usize = td.iter().product();
    let mut rho = DenseTensor::zeros(&[n, n]);
    let mut idx = vec![0; dims.len()];
    for e in 0..env {
        let ei = unflatten(e, &td);
        for (k, &s) in traced.iter().enumerate() {
            idx[s] = ei[k];
        }
        let column: Vec<C64> = (0..n)
            .map(|r| {
                let ri = unflatten(r, &kd);
                for (k, &s) in keep.iter().enumerate() {
                    idx[s] = ri[k];
                }
                psi[flatten(&idx, dims)]
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let v = rho.get(&[i, j]) + column[i] * column[j].conj();
                rho.set(&[i, j], v);
            }
        }
    }
    rho
}

/// Von Neumann entropy (bits) of a density matrix.
pub fn entropy_bits(rho: &DenseTensor) -> f64 {
    hermitian_eigenvalues(rho).into_iter().filter(|&p| p > 1e-15).map(|p| -p * p.log2()).sum()
}
