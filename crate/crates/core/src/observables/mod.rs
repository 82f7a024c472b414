//! Physics read-outs computed from a chain without modifying it.

use std::ops::Range;

use num_complex::Complex64 as C64;

use crate::engine::{ChainLayout, EngineError, EngineResult};
use crate::model::atom_excitation;
use crate::mps::VidalChain;
use crate::tensor::DenseTensor;

/// Default lower bound on the output flux `⟨ΔB†ΔB⟩` for g2.
pub const FLUX_FLOOR: f64 = 1e-12;

fn trace_product(rho: &DenseTensor, op: &DenseTensor) -> C64 {
    let n = rho.shape()[0];
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| rho.at(i, j) * op.at(j, i)).sum()
}

/// `⟨op⟩` at one site from its reduced density matrix.
pub fn site_expectation(chain: &VidalChain, site: usize, op: &DenseTensor) -> EngineResult<C64> {
    let rho = chain.contract_window_density(site, site)?;
    Ok(trace_product(&rho, op))
}

/// Reduced density matrix of the system site.
pub fn system_density(chain: &VidalChain) -> EngineResult<DenseTensor> {
    let s = chain.system_position();
    Ok(chain.contract_window_density(s, s)?)
}

/// Excitation probability of each atom.
pub fn system_populations(chain: &VidalChain) -> EngineResult<Vec<f64>> {
    let rho = system_density(chain)?;
    let atoms = rho.shape()[0].trailing_zeros() as usize;
    Ok((0..atoms).map(|n| trace_product(&rho, &atom_excitation(atoms, n)).re.clamp(0.0, 1.0)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProfile {
    pub t: f64,
    /// `t_A = p_A Δt` for `p_A = 0, 1, …`.
    pub t_a: Vec<f64>,
    /// `S(ρ_A)` in bits at each `t_A`.
    pub values: Vec<f64>,
    /// Atom–field entropy, the `t_A = 0` value.
    pub s_sys: f64,
    /// Circuit–output entropy, the `t_A = τ` value.
    pub s_circuit: f64,
}

/// `S(ρ_A)` for the system plus the last `p_A` bins, read from the bond
/// `k + ℓ - p_A`, for `p_A = 0 … min(p_max, k + ℓ)`.
pub fn entropy_profile(chain: &VidalChain, layout: ChainLayout, dt: f64, p_max: usize) -> EngineResult<EntropyProfile> {
    let top = layout.system_bond();
    let count = p_max.min(top);
    let mut values = Vec::with_capacity(count + 1);
    for p_a in 0..=count {
        values.push(chain.bond_entropy(top - p_a)?);
    }
    Ok(EntropyProfile {
        t: layout.k as f64 * dt,
        t_a: (0..=count).map(|p| p as f64 * dt).collect(),
        s_sys: chain.bond_entropy(layout.system_bond())?,
        s_circuit: chain.bond_entropy(layout.circuit_bond())?,
        values,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotonDistribution {
    /// `p[N]`, probability of `N` photons in the window, `N = 0 … n_max`.
    pub p: Vec<f64>,
    /// `1 - Σ p[N]`.
    pub tail_mass: f64,
}

impl PhotonDistribution {
    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Photon-number distribution over the bins in `window`, by a transfer
/// contraction carrying one environment per running photon count.
///
/// `number` must be diagonal in the bin basis (total photon number).
pub fn delay_photon_distribution(
    chain: &VidalChain,
    window: Range<usize>,
    number: &DenseTensor,
    n_max: usize,
) -> EngineResult<PhotonDistribution> {
    let d = number.shape()[0];
    let counts: Vec<usize> = (0..d).map(|i| number.at(i, i).re.round() as usize).collect();
    let top = counts.iter().copied().max().unwrap_or(0);
    let projectors: Vec<Option<DenseTensor>> = (0..=top)
        .map(|n| {
            let diag: Vec<C64> = counts.iter().map(|&c| C64::new(if c == n { 1.0 } else { 0.0 }, 0.0)).collect();
            counts.contains(&n).then(|| DenseTensor::diagonal(&diag))
        })
        .collect();
    let mut envs: Vec<Option<DenseTensor>> = vec![None; n_max + 1];
    envs[0] = Some(chain.bond_weight_matrix(window.start));
    for site in window {
        let mut next: Vec<Option<DenseTensor>> = vec![None; n_max + 1];
        for (have, env) in envs.iter().enumerate() {
            let Some(env) = env else { continue };
            for (n, proj) in projectors.iter().enumerate() {
                let Some(proj) = proj else { continue };
                if have + n > n_max {
                    continue;
                }
                let t = chain.transfer_left(site, Some(proj), env)?;
                next[have + n] = Some(match next[have + n].take() {
                    Some(acc) => acc.add(&t)?,
                    None => t,
                });
            }
        }
        envs = next;
    }
    let p: Vec<f64> = envs
        .iter()
        .map(|e| e.as_ref().map_or(0.0, |e| e.trace().map(|z| z.re.clamp(0.0, 1.0)).unwrap_or(0.0)))
        .collect();
    let tail_mass = (1.0 - p.iter().sum::<f64>()).max(0.0);
    Ok(PhotonDistribution { p, tail_mass })
}

/// Position of the reference output bin `q = k - ℓ - 1` and the number of
/// output bins at or before it.
fn reference_bin(layout: ChainLayout) -> EngineResult<usize> {
    layout.newest_output().ok_or_else(|| EngineError::Observable("no output bins yet".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub nu: Vec<f64>,
    pub s: Vec<f64>,
    pub m: usize,
    pub incoherent: bool,
}

/// Convention string recorded alongside emitted spectra.
pub const SPECTRUM_CONVENTION: &str =
    "S(nu) = 2 Re[(1/dt) sum_{p=0}^{M-1} w_p C(p) exp(i nu p dt)], w_0 = 1/2, w_p = 1 otherwise, C(p) = <dB^dag(t_q) dB(t_{q-p})>, q = k_max - ell - 1";

/// `C(p) = ⟨ΔB†(t_q) ΔB(t_{q-p})⟩` for `p = 0 … m-1`, in one right-to-left
/// sweep, optionally minus `⟨ΔB†(t_q)⟩⟨ΔB(t_{q-p})⟩`.
pub fn output_correlations(
    chain: &VidalChain,
    layout: ChainLayout,
    annihilate: &DenseTensor,
    m: usize,
    incoherent: bool,
) -> EngineResult<Vec<C64>> {
    let q = reference_bin(layout)?;
    if m == 0 || m > q + 1 {
        return Err(EngineError::Observable(format!(
            "M = {m} is too large for the {} output bins up to the reference bin",
            q + 1
        )));
    }
    let create = annihilate.adjoint()?;
    let number = create.matmul(annihilate)?;
    let mut out = Vec::with_capacity(m);
    out.push(site_expectation(chain, q, &number)?);
    let mut env = chain.transfer_right(q, Some(&create), &chain.right_identity(q + 1))?;
    for p in 1..m {
        let s = q - p;
        out.push(chain.close_right(s, &chain.transfer_right(s, Some(annihilate), &env)?));
        env = chain.transfer_right(s, None, &env)?;
    }
    if incoherent {
        let bq = site_expectation(chain, q, &create)?;
        for (p, c) in out.iter_mut().enumerate() {
            *c -= bq * site_expectation(chain, q - p, annihilate)?;
        }
    }
    Ok(out)
}

/// One-sided transform of correlations onto `nu`.
pub fn transform_correlations(corr: &[C64], dt: f64, nu: &[f64]) -> Vec<f64> {
    nu.iter()
        .map(|&v| {
            let sum: C64 = corr
                .iter()
                .enumerate()
                .map(|(p, c)| {
                    let w = if p == 0 { 0.5 } else { 1.0 };
                    c * C64::from_polar(w, v * p as f64 * dt)
                })
                .sum();
            2.0 * sum.re / dt
        })
        .collect()
}

/// Default correlation length `floor(0.8 q)` with `q = k - ℓ - 1`.
pub fn default_m(layout: ChainLayout) -> usize {
    ((0.8 * layout.k.saturating_sub(layout.ell + 1) as f64).floor() as usize).max(1)
}

pub fn output_spectrum(
    chain: &VidalChain,
    layout: ChainLayout,
    annihilate: &DenseTensor,
    dt: f64,
    nu: &[f64],
    m: usize,
    incoherent: bool,
) -> EngineResult<Spectrum> {
    let corr = output_correlations(chain, layout, annihilate, m, incoherent)?;
    Ok(Spectrum { nu: nu.to_vec(), s: transform_correlations(&corr, dt, nu), m, incoherent })
}

/// Photon flux `⟨ΔB†ΔB⟩ / Δt` of the newest output bin.
pub fn output_flux(chain: &VidalChain, layout: ChainLayout, annihilate: &DenseTensor, dt: f64) -> EngineResult<f64> {
    let q = reference_bin(layout)?;
    let number = annihilate.adjoint()?.matmul(annihilate)?;
    Ok(site_expectation(chain, q, &number)?.re / dt)
}

/// `g2(pΔt)` for `p = 0 … p_max`, normalized by `n(q) n(q-p)` with
/// `n = ⟨ΔB†ΔB⟩`, so that a coherent field gives exactly 1.
pub fn g2_function(
    chain: &VidalChain,
    layout: ChainLayout,
    annihilate: &DenseTensor,
    p_max: usize,
    flux_floor: f64,
) -> EngineResult<Vec<f64>> {
    let q = reference_bin(layout)?;
    if p_max > q {
        return Err(EngineError::Observable(format!("p_max = {p_max} exceeds the {q} earlier output bins")));
    }
    let create = annihilate.adjoint()?;
    let number = create.matmul(annihilate)?;
    let n_q = site_expectation(chain, q, &number)?.re;
    if n_q <= flux_floor {
        return Err(EngineError::Observable("no output flux; g2 undefined".into()));
    }
    let pair = create.matmul(&create)?.matmul(annihilate)?.matmul(annihilate)?;
    let mut out = Vec::with_capacity(p_max + 1);
    out.push((site_expectation(chain, q, &pair)?.re / (n_q * n_q)).max(0.0));
    let mut env = chain.transfer_right(q, Some(&number), &chain.right_identity(q + 1))?;
    for p in 1..=p_max {
        let s = q - p;
        let joint = chain.close_right(s, &chain.transfer_right(s, Some(&number), &env)?).re;
        let n_s = site_expectation(chain, s, &number)?.re;
        if n_s <= flux_floor {
            return Err(EngineError::Observable("no output flux; g2 undefined".into()));
        }
        out.push((joint / (n_q * n_s)).max(0.0));
        env = chain.transfer_right(s, None, &env)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
