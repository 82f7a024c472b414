use crate::model::{build_step_unitary, BinOperators, ExperimentConfig};
use crate::observables::{entropy_profile, site_expectation, system_populations, EntropyProfile};

use super::{EngineResult, EvolutionState};

/// Observation hook fired after every step.
pub trait Recorder {
    fn on_step(&mut self, state: &EvolutionState) -> EngineResult<()>;
}

impl<F: FnMut(&EvolutionState) -> EngineResult<()>> Recorder for F {
    fn on_step(&mut self, state: &EvolutionState) -> EngineResult<()> {
        self(state)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Steps between entries of the default series.
    pub record_stride: usize,
    /// Steps between full contractions of `⟨ψ|ψ⟩`; `None` skips them.
    pub norm_stride: Option<usize>,
    /// Steps between entropy profiles; `None` skips them.
    pub profile_stride: Option<usize>,
    /// Largest `p_A` of each recorded profile.
    pub profile_p_max: usize,
}

impl RunOptions {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            record_stride: cfg.record_stride,
            norm_stride: Some(cfg.record_stride),
            profile_stride: None,
            profile_p_max: 2 * cfg.ell,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub step: usize,
    /// Excitation probability per atom.
    pub pe: Vec<f64>,
    /// Mean photon number in the delay line.
    pub n_delay: f64,
    /// `⟨ψ|ψ⟩`, when computed at this step.
    pub norm: Option<f64>,
    pub discarded_weight: f64,
    pub s_sys: f64,
    pub s_circuit: f64,
    pub max_bond: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSeries {
    pub records: Vec<Record>,
    pub profiles: Vec<EntropyProfile>,
}

impl ObservableSeries {
    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Mean of `f` over records with `t ≥ t_from`.
    pub fn tail_mean(&self, t_from: f64, f: impl Fn(&Record) -> f64) -> Option<f64> {
        let tail: Vec<f64> = self.records.iter().filter(|r| r.t >= t_from - 1e-12).map(f).collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

fn record(state: &mut EvolutionState, ops: &BinOperators, with_norm: bool) -> EngineResult<Record> {
    let lay = state.layout();
    let number = ops.total_number();
    let mut n_delay = 0.0;
    for site in lay.delay_window() {
        n_delay += site_expectation(&state.chain, site, &number)?.re;
    }
    let norm = if with_norm { Some(state.norm_squared()?) } else { None };
    Ok(Record {
        t: state.time(),
        step: state.k,
        pe: system_populations(&state.chain)?,
        n_delay,
        norm,
        discarded_weight: state.cumulative_discarded_weight,
        s_sys: state.chain.bond_entropy(lay.system_bond())?,
        s_circuit: state.chain.bond_entropy(lay.circuit_bond())?,
        max_bond: state.chain.max_bond_dim(),
    })
}

fn due(stride: Option<usize>, k: usize) -> bool {
    stride.is_some_and(|s| k % s == 0)
}

/// Evolves `cfg` from `t = 0` to `t_max` with the default options.
pub fn run(cfg: &ExperimentConfig, hooks: &mut [&mut dyn Recorder]) -> EngineResult<(EvolutionState, ObservableSeries)> {
    run_with(cfg, &RunOptions::for_config(cfg), hooks)
}

pub fn run_with(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    hooks: &mut [&mut dyn Recorder],
) -> EngineResult<(EvolutionState, ObservableSeries)> {
    let ops = BinOperators::for_config(cfg);
    let u = build_step_unitary(cfg, &ops)?;
    let mut state = EvolutionState::initial(cfg)?;
    let mut series = ObservableSeries::default();
    let n = cfg.n_steps();
    for _ in 0..n {
        state.step(&u)?;
        let k = state.k;
        if due(Some(opts.record_stride), k) {
            let with_norm = due(opts.norm_stride, k);
            series.records.push(record(&mut state, &ops, with_norm)?);
        }
        if due(opts.profile_stride, k) {
            series.profiles.push(entropy_profile(&state.chain, state.layout(), cfg.dt, opts.profile_p_max)?);
        }
        for hook in hooks.iter_mut() {
            hook.on_step(&state)?;
        }
        if k % 500 == 0 {
            log::debug!("step {k}/{n}: max bond {}, discarded {:.2e}", state.chain.max_bond_dim(), state.cumulative_discarded_weight);
        }
    }
    Ok((state, series))
}
