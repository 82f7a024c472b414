//! The stroboscopic time-bin map.
//!
//! After `k` steps the chain reads
//!
//! ```text
//! b(-ℓ) … b(k-ℓ-1) | b(k-ℓ) … b(k-1) | S | b(k)
//!   output field       delay line          fresh vacuum
//! ```
//!
//! Step `k` routes `b(k-ℓ)` next to the system with swaps, applies the
//! step unitary to `(b(k-ℓ), S, b(k))`, routes `b(k-ℓ)` back, moves the
//! system past `b(k)` and appends the vacuum bin `b(k+1)`.

mod series;

pub use series::{run, run_with, ObservableSeries, Record, Recorder, RunOptions};

use std::ops::Range;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::{BinOperators, ConfigError, ExperimentConfig, StepUnitary};
use crate::mps::{MpsError, SiteLabel, Truncation, VidalChain};
use crate::tensor::{DenseTensor, TensorError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("chain layout broken before step {step}: {detail}")]
    Layout { step: usize, detail: String },
    #[error(
        "cumulative discarded weight {discarded:.3e} exceeds the budget {budget:.3e} at step {step}; increase d_max (currently {d_max})"
    )]
    TruncationBudget { step: usize, discarded: f64, budget: f64, d_max: usize },
    #[error("{0}")]
    Observable(String),
}

pub type EngineResult<T> = Result<T, EngineError>;

/// Where everything sits in the chain after `k` steps with delay `ℓ`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ChainLayout {
    pub k: usize,
    pub ell: usize,
}

impl ChainLayout {
    /// Position of bin `p` (`p ≥ -ℓ`).
    pub fn bin_position(&self, p: i64) -> usize {
        (p + self.ell as i64) as usize
    }

    pub fn system_position(&self) -> usize {
        self.k + self.ell
    }

    /// Positions of the delay-line bins `k-ℓ … k-1`.
    pub fn delay_window(&self) -> Range<usize> {
        self.k..self.k + self.ell
    }

    /// Bond separating the output field from the delay line.
    pub fn circuit_bond(&self) -> usize {
        self.k
    }

    /// Bond separating the system from everything emitted so far.
    pub fn system_bond(&self) -> usize {
        self.system_position()
    }

    /// Position of the most recent output bin, `k-ℓ-1`.
    pub fn newest_output(&self) -> Option<usize> {
        self.k.checked_sub(1)
    }

    pub fn chain_len(&self) -> usize {
        self.k + self.ell + 2
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionState {
    pub chain: VidalChain,
    pub k: usize,
    pub ell: usize,
    pub dt: f64,
    pub cumulative_discarded_weight: f64,
    pub trunc_budget: f64,
    vacuum: Vec<C64>,
    /// Left environment of the frozen prefix `0..frozen`, on bond `frozen`.
    norm_env: Option<(usize, DenseTensor)>,
}

impl EvolutionState {
    /// Product state: `ℓ` vacuum bins, the system, and the vacuum bin `0`.
    pub fn initial(cfg: &ExperimentConfig) -> EngineResult<Self> {
        let ops = BinOperators::for_config(cfg);
        let trunc = Truncation { d_max: cfg.d_max, cutoff: cfg.svd_cutoff };
        Self::from_system(&cfg.initial_state(), &ops.vacuum(), cfg.ell, cfg.dt, trunc, cfg.trunc_budget)
    }

    pub fn from_system(
        system: &[C64],
        vacuum: &[C64],
        ell: usize,
        dt: f64,
        trunc: Truncation,
        trunc_budget: f64,
    ) -> EngineResult<Self> {
        assert!(ell >= 1, "delay must span at least one bin");
        let mut sites: Vec<(SiteLabel, Vec<C64>)> =
            (0..ell).map(|j| (SiteLabel::bin(j as i64 - ell as i64), vacuum.to_vec())).collect();
        sites.push((SiteLabel::SYSTEM, system.to_vec()));
        sites.push((SiteLabel::bin(0), vacuum.to_vec()));
        let chain = VidalChain::product(sites, trunc)?;
        Ok(Self {
            chain,
            k: 0,
            ell,
            dt,
            cumulative_discarded_weight: 0.0,
            trunc_budget,
            vacuum: vacuum.to_vec(),
            norm_env: None,
        })
    }

    pub fn layout(&self) -> ChainLayout {
        ChainLayout { k: self.k, ell: self.ell }
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.dt
    }

    fn check_layout(&self) -> EngineResult<()> {
        let lay = self.layout();
        let broken = |detail: String| EngineError::Layout { step: self.k, detail };
        if self.chain.len() != lay.chain_len() {
            return Err(broken(format!("expected {} sites, found {}", lay.chain_len(), self.chain.len())));
        }
        if self.chain.label(lay.system_position()) != SiteLabel::SYSTEM {
            return Err(broken(format!("system not at position {}", lay.system_position())));
        }
        let fresh = self.chain.label(lay.system_position() + 1);
        if fresh != SiteLabel::bin(self.k as i64) {
            return Err(broken(format!("missing vacuum bin {} (found {fresh:?})", self.k)));
        }
        Ok(())
    }

    /// Advances by one bin; returns the weight discarded during the step.
    pub fn step(&mut self, u: &StepUnitary) -> EngineResult<f64> {
        self.check_layout()?;
        let lay = self.layout();
        let sys = lay.system_position();
        let mut discarded = 0.0;
        // route b(k-ℓ) from position k to k+ℓ-1
        for pos in lay.k..sys - 1 {
            discarded += self.chain.swap_adjacent(pos)?;
        }
        let w = self.chain.apply_verified_gate(sys - 1, 3, &u.window)?;
        discarded += w.iter().sum::<f64>();
        for pos in (lay.k..sys - 1).rev() {
            discarded += self.chain.swap_adjacent(pos)?;
        }
        discarded += self.chain.swap_adjacent(sys)?;
        self.chain.push_product_site(SiteLabel::bin(self.k as i64 + 1), &self.vacuum)?;
        self.k += 1;
        self.cumulative_discarded_weight += discarded;
        if self.cumulative_discarded_weight > self.trunc_budget {
            return Err(EngineError::TruncationBudget {
                step: self.k,
                discarded: self.cumulative_discarded_weight,
                budget: self.trunc_budget,
                d_max: self.chain.truncation().d_max,
            });
        }
        Ok(discarded)
    }

    /// `⟨ψ|ψ⟩` by full contraction. The frozen output prefix is folded into a
    /// cached environment so repeated calls only pay for the active tail.
    pub fn norm_squared(&mut self) -> EngineResult<f64> {
        let frozen = self.k;
        let (mut at, mut env) = match self.norm_env.take() {
            Some((at, env)) if at <= frozen => (at, env),
            _ => (0, self.chain.bond_weight_matrix(0)),
        };
        while at < frozen {
            env = self.fold_site(at, &env)?;
            at += 1;
        }
        self.norm_env = Some((at, env.clone()));
        for site in at..self.chain.len() {
            env = self.fold_site(site, &env)?;
        }
        Ok(env.trace()?.re)
    }

    fn fold_site(&self, site: usize, env: &DenseTensor) -> EngineResult<DenseTensor> {
        Ok(self.chain.transfer_left(site, None, env)?)
    }
}

/// Free-function form of [`EvolutionState::step`].
pub fn step(state: &mut EvolutionState, u: &StepUnitary) -> EngineResult<f64> {
    state.step(u)
}
