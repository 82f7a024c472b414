//! Canonical matrix product state over one system site and a chain of
//! time-bin sites, with a Schmidt vector on every bond.
//!
//! ```text
//!  Λ[0]  B[0]  B[1]  ...  B[n-1]        B[s] = Γ[s] Λ[s+1]
//!   |     |     |           |
//!        i_0   i_1       i_{n-1}
//! ```
//!
//! Bond `b` sits to the left of site `b`; the boundary bonds `0` and `n` are
//! always the trivial `[1]`. Every Λ is normalized to unit 2-norm, so the
//! squared entries at a bond are the Schmidt weights of the cut there. Sites
//! are stored right-normalized (`Σ_i B^i B^i† = 1`), which is the Vidal form
//! with each Λ folded into the site on its left. Updates never divide by a
//! Schmidt coefficient.
//!
//! Sites are stored in a flat list in chain order. The system site carries a
//! [`SiteLabel`] like every other site and is found by label, not by a fixed
//! position: during time evolution it migrates to the right one position per
//! step.

pub mod measure;
pub mod snapshot;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{contract_pair, svd_truncate, DenseTensor, TensorError};

pub use measure::SchmidtSpectrum;

/// Schmidt coefficients below this are treated as exactly zero.
pub const SCHMIDT_FLOOR: f64 = 1e-12;

/// Largest allowed `‖u†u − 1‖_max` for gates handed to
/// [`VidalChain::apply_gate_window`].
pub const UNITARITY_TOL: f64 = 1e-8;

/// Default bound on the physical dimension of dense reductions.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("system state is not normalized (norm² = {0})")]
    Unnormalized(f64),

    #[error("a chain needs exactly one system site, found {0}")]
    SystemCount(usize),

    #[error("window of {width} sites at position {first} runs off a chain of {len} sites")]
    WindowOffChain { first: usize, width: usize, len: usize },

    #[error("gate windows must span 2 or 3 sites, got {0}")]
    WindowWidth(usize),

    #[error("gate of shape {gate:?} does not act on physical dimension {expected}")]
    GateShape { gate: Vec<usize>, expected: usize },

    #[error("gate is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("bond {bond} out of range for a chain of {len} sites")]
    BondOutOfRange { bond: usize, len: usize },

    #[error("site {site} out of range for a chain of {len} sites")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("operator of shape {op:?} does not match physical dimension {dim} at site {site}")]
    OperatorShape { op: Vec<usize>, dim: usize, site: usize },

    #[error("operators must act on distinct sites (both at {0})")]
    SameSite(usize),

    #[error("dense reduction of dimension {dim} exceeds the limit {limit}")]
    DenseLimit { dim: usize, limit: usize },

    #[error("open boundary bonds are required for dense contraction")]
    OpenBoundary,

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("snapshot I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub type MpsResult<T> = Result<T, MpsError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteKind {
    System,
    TimeBin,
}

/// Identity of a site: the system, or the time bin with index `p`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteLabel {
    pub kind: SiteKind,
    pub bin_index: Option<i64>,
}

impl SiteLabel {
    pub const SYSTEM: SiteLabel = SiteLabel { kind: SiteKind::System, bin_index: None };

    pub fn bin(p: i64) -> Self {
        Self { kind: SiteKind::TimeBin, bin_index: Some(p) }
    }

    pub fn is_system(&self) -> bool {
        self.kind == SiteKind::System
    }
}

/// Bond-dimension cap and relative singular-value cutoff.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub d_max: usize,
    pub cutoff: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { d_max: 64, cutoff: 1e-8 }
    }
}

/// What to do with the physical legs of a window before re-splitting it.
enum WindowOp<'a> {
    Matrix(&'a DenseTensor),
    /// Exchange the two physical legs of a 2-site window.
    Swap,
}

#[derive(Clone, Debug)]
pub struct VidalChain {
    labels: Vec<SiteLabel>,
    /// Right-normalized `B = ΓΛ_r`, `[left bond, physical, right bond]` per site.
    tensors: Vec<DenseTensor>,
    /// `len() + 1` vectors; entry `b` is the bond left of site `b`.
    lambdas: Vec<Vec<f64>>,
    trunc: Truncation,
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn p_rest(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn normalize_state(v: &[C64]) -> MpsResult<f64> {
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(MpsError::Unnormalized(n2));
    }
    Ok(n2)
}

impl VidalChain {
    /// Product state of the given local states (each must be normalized).
    pub fn product(sites: Vec<(SiteLabel, Vec<C64>)>, trunc: Truncation) -> MpsResult<Self> {
        let n_sys = sites.iter().filter(|(l, _)| l.is_system()).count();
        if n_sys != 1 {
            return Err(MpsError::SystemCount(n_sys));
        }
        let mut labels = Vec::with_capacity(sites.len());
        let mut tensors = Vec::with_capacity(sites.len());
        for (label, state) in sites {
            normalize_state(&state)?;
            let d = state.len();
            tensors.push(DenseTensor::new(vec![1, d, 1], state)?);
            labels.push(label);
        }
        let lambdas = vec![vec![1.0]; labels.len() + 1];
        Ok(Self { labels, tensors, lambdas, trunc })
    }

    /// `n_bins` vacuum bins with indices `-n_bins..=-1`, followed by the
    /// system in `system_state`.
    pub fn new_product_state(
        system_state: &[C64],
        bin_dim: usize,
        n_bins: usize,
        trunc: Truncation,
    ) -> MpsResult<Self> {
        let mut vac = vec![C64::new(0.0, 0.0); bin_dim];
        vac[0] = real(1.0);
        let mut sites: Vec<(SiteLabel, Vec<C64>)> =
            (0..n_bins).map(|j| (SiteLabel::bin(j as i64 - n_bins as i64), vac.clone())).collect();
        sites.push((SiteLabel::SYSTEM, system_state.to_vec()));
        Self::product(sites, trunc)
    }

    /// Canonical chain for an arbitrary state vector (row-major over the
    /// sites in order), by successive exact SVDs from the right.
    pub fn from_state_vector(labels: Vec<SiteLabel>, dims: &[usize], psi: &[C64], trunc: Truncation) -> MpsResult<Self> {
        let n_sys = labels.iter().filter(|l| l.is_system()).count();
        if n_sys != 1 {
            return Err(MpsError::SystemCount(n_sys));
        }
        assert_eq!(labels.len(), dims.len());
        let total: usize = dims.iter().product();
        if psi.len() != total {
            return Err(TensorError::ElementCount { shape: dims.to_vec(), expected: total, found: psi.len() }.into());
        }
        normalize_state(psi)?;
        let n = dims.len();
        let mut tensors = vec![DenseTensor::zeros(&[1, 1, 1]); n];
        let mut lambdas = vec![vec![1.0]; n + 1];
        // rest holds the sites 0..k with the bond-k index last
        let mut rest = DenseTensor::new(vec![total, 1], psi.to_vec())?;
        let mut d_right = 1;
        for k in (1..n).rev() {
            let rows: usize = dims[..k].iter().product();
            let m = rest.reshape(&[rows, dims[k] * d_right])?;
            let svd = svd_truncate(&m, usize::MAX, 0.0)?;
            let keep = svd.singular_values.iter().take_while(|&&s| s >= SCHMIDT_FLOOR).count().max(1);
            let norm: f64 = svd.singular_values[..keep].iter().map(|s| s * s).sum::<f64>().sqrt();
            let y = DenseTensor::matrix_from_fn(keep, dims[k] * d_right, |a, j| svd.right_isometry.at(a, j));
            rest = m.matmul(&y.adjoint()?)?;
            tensors[k] = y.reshape(&[keep, dims[k], d_right])?;
            lambdas[k] = svd.singular_values[..keep].iter().map(|s| s / norm).collect();
            d_right = keep;
        }
        tensors[0] = rest.reshape(&[1, dims[0], d_right])?;
        Ok(Self { labels, tensors, lambdas, trunc })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn set_truncation(&mut self, trunc: Truncation) {
        self.trunc = trunc;
    }

    pub fn labels(&self) -> &[SiteLabel] {
        &self.labels
    }

    pub fn label(&self, site: usize) -> SiteLabel {
        self.labels[site]
    }

    /// Right-normalized site tensor `B = ΓΛ_r`, `[left bond, physical, right bond]`.
    pub fn site_tensor(&self, site: usize) -> &DenseTensor {
        &self.tensors[site]
    }

    pub fn lambda(&self, bond: usize) -> &[f64] {
        &self.lambdas[bond]
    }

    pub fn physical_dim(&self, site: usize) -> usize {
        self.tensors[site].shape()[1]
    }

    pub fn physical_dims(&self) -> Vec<usize> {
        (0..self.len()).map(|s| self.physical_dim(s)).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.lambdas.iter().map(Vec::len).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.lambdas.iter().map(Vec::len).max().unwrap_or(1)
    }

    pub fn position_of(&self, label: SiteLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn system_position(&self) -> usize {
        self.position_of(SiteLabel::SYSTEM).expect("chain always holds the system site")
    }

    /// Appends a site in a pure local state at the right end.
    pub fn push_product_site(&mut self, label: SiteLabel, state: &[C64]) -> MpsResult<()> {
        if label.is_system() {
            return Err(MpsError::SystemCount(2));
        }
        normalize_state(state)?;
        let right = self.lambdas.last().expect("boundary bond");
        if right.len() != 1 {
            return Err(MpsError::OpenBoundary);
        }
        self.tensors.push(DenseTensor::new(vec![1, state.len(), 1], state.to_vec())?);
        self.labels.push(label);
        self.lambdas.push(vec![1.0]);
        Ok(())
    }

    fn check_window(&self, first: usize, width: usize) -> MpsResult<()> {
        if !(2..=3).contains(&width) {
            return Err(MpsError::WindowWidth(width));
        }
        if first + width > self.len() {
            return Err(MpsError::WindowOffChain { first, width, len: self.len() });
        }
        Ok(())
    }

    /// Applies `u` to the sites `first..first+width` (width 2 or 3, inferred
    /// from the gate size) and restores canonical form. Returns the relative
    /// weight discarded at each re-split bond, left to right.
    pub fn apply_gate_window(&mut self, first: usize, u: &DenseTensor) -> MpsResult<Vec<f64>> {
        let n = u.expect_square()?;
        let mut width = 0;
        let mut dim = 1;
        while dim < n && first + width < self.len() {
            dim *= self.physical_dim(first + width);
            width += 1;
        }
        if dim != n {
            let expected = (first..self.len().min(first + 3)).map(|s| self.physical_dim(s)).product();
            return Err(MpsError::GateShape { gate: u.shape().to_vec(), expected });
        }
        self.check_window(first, width)?;
        let residual = u.unitarity_residual()?;
        if residual > UNITARITY_TOL {
            return Err(MpsError::NotUnitary(residual));
        }
        self.apply_window(first, width, WindowOp::Matrix(u))
    }

    /// Like [`apply_gate_window`](Self::apply_gate_window) for a gate whose
    /// unitarity the caller has already established.
    pub(crate) fn apply_verified_gate(&mut self, first: usize, width: usize, u: &DenseTensor) -> MpsResult<Vec<f64>> {
        self.check_window(first, width)?;
        let dim: usize = (first..first + width).map(|s| self.physical_dim(s)).product();
        if u.shape() != [dim, dim] {
            return Err(MpsError::GateShape { gate: u.shape().to_vec(), expected: dim });
        }
        self.apply_window(first, width, WindowOp::Matrix(u))
    }

    /// Exchanges the sites at `left` and `left + 1` (state and labels). This is
    /// the two-site permutation gate; it is applied as an index permutation.
    pub fn swap_adjacent(&mut self, left: usize) -> MpsResult<f64> {
        self.check_window(left, 2)?;
        let w = self.apply_window(left, 2, WindowOp::Swap)?;
        self.labels.swap(left, left + 1);
        Ok(w[0])
    }

    /// Permutation unitary exchanging two sites of dimensions `d1`, `d2`.
    pub fn swap_gate(d1: usize, d2: usize) -> DenseTensor {
        let n = d1 * d2;
        let mut u = DenseTensor::zeros(&[n, n]);
        for i in 0..d1 {
            for j in 0..d2 {
                u.set(&[j * d1 + i, i * d2 + j], real(1.0));
            }
        }
        u
    }

    /// `B[first] ⋯ B[last]`, shape `[D_l, d_first, ..., d_last, D_r]`.
    fn window_product(&self, first: usize, width: usize) -> MpsResult<DenseTensor> {
        let mut theta = self.tensors[first].clone();
        for s in first + 1..first + width {
            let r = theta.rank();
            theta = contract_pair(&theta, &[r - 1], &self.tensors[s], &[0])?;
        }
        Ok(theta)
    }

    /// Θ = Λ[first] B[first] ⋯ B[last], the window's coefficients in the
    /// Schmidt bases of its two outer bonds.
    fn window_theta(&self, first: usize, width: usize) -> MpsResult<DenseTensor> {
        Ok(scale_left_bond(self.window_product(first, width)?, &self.lambdas[first]))
    }

    fn apply_window(&mut self, first: usize, width: usize, op: WindowOp<'_>) -> MpsResult<Vec<f64>> {
        let raw = self.window_product(first, width)?;
        let shape = raw.shape().to_vec();
        let (dl, dr) = (shape[0], shape[width + 1]);
        let phys: Vec<usize> = shape[1..=width].to_vec();
        let p: usize = phys.iter().product();

        let (raw, phys): (DenseTensor, Vec<usize>) = match op {
            WindowOp::Matrix(u) => {
                let t = raw.reshape(&[dl, p, dr])?;
                let applied = contract_pair(u, &[1], &t, &[1])?; // [p, dl, dr]
                (applied.permute(&[1, 0, 2])?, phys)
            }
            WindowOp::Swap => {
                debug_assert_eq!(width, 2);
                (raw.permute(&[0, 2, 1, 3])?, vec![phys[1], phys[0]])
            }
        };

        let lam_l = self.lambdas[first].clone();
        let mut discarded = vec![0.0; width - 1];

        // Sweep right to left, peeling one site per SVD. `rest` holds the
        // unsplit sites without Λ_l; the SVD sees Λ_l · rest, and the new
        // right factor is contracted back into `rest`.
        let mut rest = raw;
        let mut d_right = dr;
        for s in (1..width).rev() {
            let d = phys[s];
            let rows = dl * p_rest(&phys[..s]);
            let cols = d * d_right;
            let rest_m = rest.reshape(&[rows, cols])?;
            let m = scale_left_bond(rest_m.clone(), &lam_l);
            let total: f64 = m.data().iter().map(|z| z.norm_sqr()).sum();
            let svd = svd_truncate(&m, self.trunc.d_max, self.trunc.cutoff)?;
            let norm_all = total.sqrt();
            let keep = svd
                .singular_values
                .iter()
                .take_while(|&&x| x / norm_all >= SCHMIDT_FLOOR)
                .count()
                .max(1);
            let kept2: f64 = svd.singular_values[..keep].iter().map(|x| x * x).sum();
            discarded[s - 1] = svd.discarded_weight / total;
            let norm = kept2.sqrt();

            let y = DenseTensor::matrix_from_fn(keep, cols, |a, j| svd.right_isometry.at(a, j));
            rest = rest_m.matmul(&y.adjoint()?)?.scale(real((total / kept2).sqrt()));
            self.tensors[first + s] = y.reshape(&[keep, d, d_right])?;
            self.lambdas[first + s] = svd.singular_values[..keep].iter().map(|x| x / norm).collect();
            d_right = keep;
        }
        self.tensors[first] = rest.reshape(&[dl, phys[0], d_right])?;
        Ok(discarded)
    }
}

/// Multiplies the leading axis of `t` by `lam`.
fn scale_left_bond(t: DenseTensor, lam: &[f64]) -> DenseTensor {
    let shape = t.shape().to_vec();
    let block = t.len() / lam.len();
    let mut data = t.into_data();
    for (a, chunk) in data.chunks_mut(block).enumerate() {
        for z in chunk {
            *z *= lam[a];
        }
    }
    DenseTensor::from_raw(shape, data)
}
