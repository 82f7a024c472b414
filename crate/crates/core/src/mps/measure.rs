//! Read-only contractions over a [`VidalChain`].

use num_complex::Complex64 as C64;

use super::{MpsError, MpsResult, VidalChain};
use crate::tensor::{contract_pair, matmul_raw, DenseTensor};

use faer::MatRef;

/// Squared Schmidt coefficients at one bond, in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    pub weights: Vec<f64>,
    pub bond: usize,
}

impl SchmidtSpectrum {
    /// Von Neumann entropy in bits, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.weights)
    }
}

/// `-Σ p log₂ p` over positive weights.
pub fn entropy_bits(weights: &[f64]) -> f64 {
    weights.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum::<f64>().max(0.0)
}

/// Applies `op` (d×d) to axis 1 of a `[a, d, b]` tensor.
fn apply_on_middle(op: &DenseTensor, t: &DenseTensor) -> MpsResult<DenseTensor> {
    let r = contract_pair(op, &[1], t, &[1])?; // [d, a, b]
    Ok(r.permute(&[1, 0, 2])?)
}

impl VidalChain {
    pub fn schmidt_spectrum(&self, bond: usize) -> MpsResult<SchmidtSpectrum> {
        if bond > self.len() {
            return Err(MpsError::BondOutOfRange { bond, len: self.len() });
        }
        let mut weights: Vec<f64> = self.lambdas[bond].iter().map(|l| l * l).collect();
        weights.sort_by(|a, b| b.total_cmp(a));
        Ok(SchmidtSpectrum { weights, bond })
    }

    pub fn bond_entropy(&self, bond: usize) -> MpsResult<f64> {
        Ok(self.schmidt_spectrum(bond)?.entropy())
    }

    fn check_op(&self, site: usize, op: &DenseTensor) -> MpsResult<()> {
        if site >= self.len() {
            return Err(MpsError::SiteOutOfRange { site, len: self.len() });
        }
        let dim = self.physical_dim(site);
        if op.shape() != [dim, dim] {
            return Err(MpsError::OperatorShape { op: op.shape().to_vec(), dim, site });
        }
        Ok(())
    }

    /// One left-to-right transfer step through `site`:
    /// `L' = Σ_ij O_ij B^i† L B^j`, with `L[bra, ket]`. Starting from
    /// [`bond_weight_matrix`](Self::bond_weight_matrix) at the left bond, the
    /// trace of the final environment is the expectation value.
    pub fn transfer_left(&self, site: usize, op: Option<&DenseTensor>, env: &DenseTensor) -> MpsResult<DenseTensor> {
        let g = &self.tensors[site];
        let (dl, d, dr) = (g.shape()[0], g.shape()[1], g.shape()[2]);
        let y = matmul_raw(env.as_mat(), MatRef::from_row_major_slice(g.data(), dl, d * dr)).reshape(&[dl, d, dr])?;
        let z = match op {
            Some(o) => apply_on_middle(o, &y)?,
            None => y,
        };
        let gm = MatRef::from_row_major_slice(g.data(), dl * d, dr);
        let zm = MatRef::from_row_major_slice(z.data(), dl * d, dr);
        Ok(matmul_raw(gm.adjoint(), zm))
    }

    /// One right-to-left transfer step through `site`:
    /// `R' = Σ_ij O_ij B^j R B^i†`, with `R[ket, bra]`. Starting from the
    /// identity at the right bond, [`close_right`](Self::close_right) at the
    /// left bond gives the expectation value.
    pub fn transfer_right(&self, site: usize, op: Option<&DenseTensor>, env: &DenseTensor) -> MpsResult<DenseTensor> {
        let g = &self.tensors[site];
        let (dl, d, dr) = (g.shape()[0], g.shape()[1], g.shape()[2]);
        // Y[a, j, b'] = Σ_b B[a, j, b] R[b, b']
        let y = matmul_raw(MatRef::from_row_major_slice(g.data(), dl * d, dr), env.as_mat()).reshape(&[dl, d, dr])?;
        let z = match op {
            Some(o) => apply_on_middle(o, &y)?,
            None => y,
        };
        // R'[a, a'] = Σ_{i, b'} Z[a, i, b'] conj(B[a', i, b'])
        let zm = MatRef::from_row_major_slice(z.data(), dl, d * dr);
        let gm = MatRef::from_row_major_slice(g.data(), dl, d * dr);
        Ok(matmul_raw(zm, gm.adjoint()))
    }

    /// `Σ_a Λ[bond]_a² R[a, a]`: closes a right environment at `bond`.
    pub fn close_right(&self, bond: usize, env: &DenseTensor) -> C64 {
        self.lambdas[bond].iter().enumerate().map(|(a, l)| env.at(a, a) * (l * l)).sum()
    }

    /// Identity environment at `bond`, the start of a right-to-left sweep.
    pub fn right_identity(&self, bond: usize) -> DenseTensor {
        DenseTensor::identity(self.lambdas[bond].len())
    }

    /// `diag(Λ[bond]²)` as an environment matrix.
    pub fn bond_weight_matrix(&self, bond: usize) -> DenseTensor {
        let w: Vec<C64> = self.lambdas[bond].iter().map(|l| C64::new(l * l, 0.0)).collect();
        DenseTensor::diagonal(&w)
    }

    /// `⟨ψ| Π_k O_k |ψ⟩` for operators on distinct sites, using the canonical
    /// form outside the covered range.
    pub fn expectation_product(&self, ops: &[(usize, &DenseTensor)]) -> MpsResult<C64> {
        if ops.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        let mut sorted: Vec<(usize, &DenseTensor)> = ops.to_vec();
        sorted.sort_by_key(|(s, _)| *s);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(MpsError::SameSite(w[0].0));
            }
        }
        for &(s, op) in &sorted {
            self.check_op(s, op)?;
        }
        let (first, last) = (sorted[0].0, sorted[sorted.len() - 1].0);
        let mut env = self.bond_weight_matrix(first);
        let mut next = sorted.iter().peekable();
        for site in first..=last {
            let op = match next.peek() {
                Some(&&(s, op)) if s == site => {
                    next.next();
                    Some(op)
                }
                _ => None,
            };
            env = self.transfer_left(site, op, &env)?;
        }
        Ok(env.trace()?)
    }

    pub fn local_expectation(&self, site: usize, op: &DenseTensor) -> MpsResult<C64> {
        self.expectation_product(&[(site, op)])
    }

    pub fn two_point_correlation(
        &self,
        site_a: usize,
        op_a: &DenseTensor,
        site_b: usize,
        op_b: &DenseTensor,
    ) -> MpsResult<C64> {
        if site_a == site_b {
            return Err(MpsError::SameSite(site_a));
        }
        self.expectation_product(&[(site_a, op_a), (site_b, op_b)])
    }

    /// Reduced density matrix of the contiguous sites `first..=last`, indexed
    /// row-major over their physical legs in chain order.
    pub fn contract_window_density(&self, first: usize, last: usize) -> MpsResult<DenseTensor> {
        self.contract_window_density_limited(first, last, super::DEFAULT_DENSE_LIMIT)
    }

    pub fn contract_window_density_limited(&self, first: usize, last: usize, limit: usize) -> MpsResult<DenseTensor> {
        if last >= self.len() || first > last {
            return Err(MpsError::SiteOutOfRange { site: last, len: self.len() });
        }
        let dim: usize = (first..=last).map(|s| self.physical_dim(s)).product();
        if dim > limit {
            return Err(MpsError::DenseLimit { dim, limit });
        }
        let theta = self.window_theta(first, last - first + 1)?;
        let (dl, dr) = (theta.shape()[0], theta.shape()[theta.rank() - 1]);
        let t = theta.reshape(&[dl, dim, dr])?.permute(&[1, 0, 2])?.reshape(&[dim, dl * dr])?;
        let rho = matmul_raw(t.as_mat(), t.as_mat().adjoint());
        Ok(rho)
    }

    /// `⟨ψ|ψ⟩` by full contraction, without assuming canonical form.
    pub fn norm_squared(&self) -> MpsResult<f64> {
        let mut env = self.bond_weight_matrix(0);
        for site in 0..self.len() {
            env = self.transfer_left(site, None, &env)?;
        }
        Ok(env.trace()?.re)
    }

    /// Full state vector, row-major over the sites in chain order.
    pub fn to_state_vector(&self, limit: usize) -> MpsResult<Vec<C64>> {
        let dim: usize = self.physical_dims().iter().product();
        if dim > limit {
            return Err(MpsError::DenseLimit { dim, limit });
        }
        if self.lambdas[0].len() != 1 || self.lambdas[self.len()].len() != 1 {
            return Err(MpsError::OpenBoundary);
        }
        // acc: [prefix, D]
        let mut acc = DenseTensor::new(vec![1, 1], vec![C64::new(self.lambdas[0][0], 0.0)])?;
        for g in &self.tensors {
            let (dl, d, dr) = (g.shape()[0], g.shape()[1], g.shape()[2]);
            let m = g.clone().reshape(&[dl, d * dr])?;
            let rows = acc.shape()[0];
            acc = acc.matmul(&m)?.reshape(&[rows * d, dr])?;
        }
        Ok(acc.into_data())
    }

    /// Largest deviation from the canonical conditions over all sites.
    pub fn canonical_residual(&self) -> MpsResult<f64> {
        let mut worst: f64 = 0.0;
        for site in 0..self.len() {
            let (l, r) = self.site_canonical_residual(site)?;
            worst = worst.max(l).max(r);
        }
        Ok(worst)
    }

    /// Deviations `(‖Σ_i B^i† Λ_l² B^i − Λ_r²‖, ‖Σ_i B^i B^i† − 1‖)`, the
    /// left- and right-canonical conditions of the Vidal form.
    pub fn site_canonical_residual(&self, site: usize) -> MpsResult<(f64, f64)> {
        let dl = self.tensors[site].shape()[0];
        let left = self.transfer_left(site, None, &self.bond_weight_matrix(site))?;
        let right = self.transfer_right(site, None, &self.right_identity(site + 1))?;
        Ok((left.max_abs_diff(&self.bond_weight_matrix(site + 1)), right.max_abs_diff(&DenseTensor::identity(dl))))
    }
}
