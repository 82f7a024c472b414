use num_complex::Complex64 as C64;

use super::dense::{apply_operator, norm_squared};
use super::lindblad::{OracleError, OracleResult};
use crate::model::{build_step_unitary, BinOperators, ExperimentConfig};
use crate::mps::SiteLabel;

/// Largest dense dimension [`brute_force_evolve`] accepts.
pub const DENSE_BUDGET: usize = 1_000_000;

/// A dense state over the bins `-ℓ … n`, plus the system, laid out as
/// `b(-ℓ) … b(n-1), S, b(n)`.
#[derive(Clone, Debug)]
pub struct DenseEvolution {
    pub psi: Vec<C64>,
    pub dims: Vec<usize>,
    pub labels: Vec<SiteLabel>,
}

/// Applies the step unitary `n_steps` times on the full product space.
///
/// Every bin keeps a fixed slot; step `k` acts on the slots of the system,
/// `b(k)` and `b(k-ℓ)` directly, without any reordering.
pub fn brute_force_evolve(cfg: &ExperimentConfig, n_steps: usize) -> OracleResult<DenseEvolution> {
    let ops = BinOperators::for_config(cfg);
    let (ell, bin) = (cfg.ell, ops.bin_dim());
    let n_bins = n_steps + ell + 1;
    let dim = (0..n_bins).try_fold(cfg.system_dim(), |acc: usize, _| acc.checked_mul(bin));
    let dim = match dim {
        Some(d) if d <= DENSE_BUDGET => d,
        _ => return Err(OracleError::DenseBudget { dim: dim.unwrap_or(usize::MAX), limit: DENSE_BUDGET }),
    };
    let u = build_step_unitary(cfg, &ops).map_err(|e| OracleError::Model(e.to_string()))?;

    let sys_slot = n_steps + ell;
    let slot = |p: i64| -> usize {
        let s = (p + ell as i64) as usize;
        if s >= sys_slot {
            s + 1
        } else {
            s
        }
    };
    let mut dims = vec![bin; n_bins + 1];
    dims[sys_slot] = cfg.system_dim();
    let mut labels: Vec<SiteLabel> = (0..n_steps + ell).map(|s| SiteLabel::bin(s as i64 - ell as i64)).collect();
    labels.push(SiteLabel::SYSTEM);
    labels.push(SiteLabel::bin(n_steps as i64));

    let sys0 = cfg.initial_state();
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    // all bins in vacuum: only the system index varies
    let stride: usize = dims[sys_slot + 1..].iter().product();
    for (i, &a) in sys0.iter().enumerate() {
        psi[i * stride] = a;
    }
    for k in 0..n_steps as i64 {
        psi = apply_operator(&psi, &dims, &[sys_slot, slot(k), slot(k - ell as i64)], &u.matrix);
    }
    debug_assert!((norm_squared(&psi) - 1.0).abs() < 1e-10);
    Ok(DenseEvolution { psi, dims, labels })
}
