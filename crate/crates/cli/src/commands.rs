use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use tbmps::engine::{run_with, EvolutionState, ObservableSeries, RunOptions};
use tbmps::model::{BinOperators, ExperimentConfig, Setup};
use tbmps::observables::{self, FLUX_FLOOR, SPECTRUM_CONVENTION};
use tbmps::oracle::{self, CrossTerms};
use tbmps::tensor::DenseTensor;

use crate::error::{CliError, CliResult};
use crate::output::{num, OutputDir};

/// Fraction of `t_max` at the end of a run averaged as the steady state.
pub const STEADY_TAIL: f64 = 0.25;

/// Largest photon number resolved in `photon_dist.csv`.
pub const PHOTON_N_MAX: usize = 20;

fn steady_start(cfg: &ExperimentConfig) -> f64 {
    (1.0 - STEADY_TAIL) * cfg.t_max
}

fn evolve(cfg: &ExperimentConfig, profiles: bool) -> CliResult<(EvolutionState, ObservableSeries)> {
    let mut opts = RunOptions::for_config(cfg);
    if profiles {
        opts.profile_stride = Some(cfg.record_stride);
    }
    log::info!("evolving {} steps, ell = {}, d_max = {}", cfg.n_steps(), cfg.ell, cfg.d_max);
    Ok(run_with(cfg, &opts, &mut [])?)
}

fn write_timeseries(out: &mut OutputDir, series: &ObservableSeries) -> CliResult<()> {
    let rows = series.records.iter().map(|r| {
        vec![
            num(r.t),
            num(r.pe[0]),
            r.pe.get(1).map_or_else(String::new, |&p| num(p)),
            num(r.n_delay),
            r.norm.map_or_else(String::new, num),
            num(r.discarded_weight),
        ]
    });
    out.write_csv("timeseries.csv", &["t", "pe1", "pe2", "n_delay", "norm", "disc_weight"], rows)
}

fn write_entropy(out: &mut OutputDir, series: &ObservableSeries) -> CliResult<()> {
    let rows = series
        .profiles
        .iter()
        .flat_map(|p| p.t_a.iter().zip(&p.values).map(move |(&ta, &s)| vec![num(p.t), num(ta), num(s)]));
    out.write_csv("entropy.csv", &["t", "t_A", "S"], rows)
}

fn write_photon_dist(out: &mut OutputDir, cfg: &ExperimentConfig, state: &EvolutionState) -> CliResult<()> {
    let ops = BinOperators::for_config(cfg);
    let n_max = PHOTON_N_MAX.min(cfg.ell * ops.modes() * cfg.d_ph);
    let dist =
        observables::delay_photon_distribution(&state.chain, state.layout().delay_window(), &ops.total_number(), n_max)?;
    out.note("photon_dist_tail_mass", dist.tail_mass);
    let rows = dist.p.iter().enumerate().map(|(n, &p)| vec![n.to_string(), num(p)]);
    out.write_csv("photon_dist.csv", &["N", "p_N"], rows)
}

/// Output mode read by the spectrum, g2 and flux: the only mode of the
/// mirror and mode L of the two-atom waveguide.
fn output_mode(ops: &BinOperators) -> &DenseTensor {
    &ops.annihilate[0]
}

pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<()> {
    let mut out = OutputDir::create(out_dir, "run")?;
    let (state, series) = evolve(cfg, true)?;
    write_timeseries(&mut out, &series)?;
    write_entropy(&mut out, &series)?;
    write_photon_dist(&mut out, cfg, &state)?;
    out.finish(cfg, state.cumulative_discarded_weight)?;
    Ok(())
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<()> {
    let mut out = OutputDir::create(out_dir, "spectrum")?;
    let (state, series) = evolve(cfg, false)?;
    write_timeseries(&mut out, &series)?;
    let ops = BinOperators::for_config(cfg);
    let a = output_mode(&ops);
    let layout = state.layout();
    let m = cfg.spectrum.m.unwrap_or_else(|| observables::default_m(layout));
    let spec =
        observables::output_spectrum(&state.chain, layout, a, cfg.dt, &cfg.spectrum.grid(), m, cfg.spectrum.incoherent)?;
    out.note("spectrum_convention", SPECTRUM_CONVENTION);
    out.note("spectrum_m", m);
    let rows = spec.nu.iter().zip(&spec.s).map(|(&nu, &s)| vec![num(nu), num(s)]);
    out.write_csv("spectrum.csv", &["nu", "S_nu"], rows)?;

    let q = layout.newest_output().unwrap_or(0);
    let p_max = cfg.g2_p_max.unwrap_or(2 * cfg.ell).min(q);
    match observables::g2_function(&state.chain, layout, a, p_max, FLUX_FLOOR) {
        Ok(g2) => {
            let rows = g2.iter().enumerate().map(|(p, &g)| vec![num(p as f64 * cfg.dt), num(g)]);
            out.write_csv("g2.csv", &["tprime", "g2"], rows)?;
        }
        Err(e) => {
            log::warn!("g2.csv not written: {e}");
            out.note("g2_skipped", e.to_string());
        }
    }
    out.finish(cfg, state.cumulative_discarded_weight)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
struct Cell {
    phi: f64,
    gamma_tau: f64,
    pe_ss: f64,
    flux_ss: f64,
    s_circuit_ss: f64,
    discarded: f64,
}

fn cell_config(base: &ExperimentConfig, phi: f64, gamma_tau: f64) -> CliResult<ExperimentConfig> {
    let mut file = base.to_file();
    file.phi = Some(phi);
    file.tau = Some(gamma_tau / base.gamma());
    file.resolve().map_err(|e| CliError::Config(format!("cell phi = {phi}, gamma_tau = {gamma_tau}: {e}")))
}

fn run_cell(cfg: &ExperimentConfig, gamma_tau: f64) -> CliResult<Cell> {
    let ops = BinOperators::for_config(cfg);
    let a = output_mode(&ops);
    let from = steady_start(cfg);
    let stride = cfg.record_stride;
    let mut fluxes: Vec<f64> = Vec::new();
    let mut flux_hook = |s: &EvolutionState| {
        if s.k % stride == 0 && s.time() >= from - 1e-12 && s.layout().newest_output().is_some() {
            fluxes.push(observables::output_flux(&s.chain, s.layout(), a, cfg.dt)?);
        }
        Ok(())
    };
    let mut opts = RunOptions::for_config(cfg);
    opts.norm_stride = None;
    let (state, series) = run_with(cfg, &opts, &mut [&mut flux_hook])?;
    let mean = |f: fn(&tbmps::engine::Record) -> f64| series.tail_mean(from, f).unwrap_or(f64::NAN);
    let flux_ss = if fluxes.is_empty() { f64::NAN } else { fluxes.iter().sum::<f64>() / fluxes.len() as f64 };
    Ok(Cell {
        phi: cfg.phi,
        gamma_tau,
        pe_ss: mean(|r| r.pe[0]),
        flux_ss,
        s_circuit_ss: mean(|r| r.s_circuit),
        discarded: state.cumulative_discarded_weight,
    })
}

pub fn cmd_sweep(
    base: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
    phi_steps: usize,
    gamma_taus: &[f64],
) -> CliResult<()> {
    if phi_steps == 0 || gamma_taus.is_empty() {
        return Err(CliError::Config("sweep needs at least one phi step and one gamma_tau".into()));
    }
    let mut cells = Vec::with_capacity(phi_steps * gamma_taus.len());
    for (i, &gt) in gamma_taus.iter().enumerate() {
        for j in 0..phi_steps {
            let phi = TAU * j as f64 / phi_steps as f64;
            cells.push(((j, i), gt, cell_config(base, phi, gt)?));
        }
    }
    let mut out = OutputDir::create(out_dir, "sweep")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    log::info!("sweeping {} cells on {} workers", cells.len(), workers.max(1));
    let mut results: Vec<((usize, usize), CliResult<Cell>)> =
        pool.install(|| cells.par_iter().map(|(key, gt, cfg)| (*key, run_cell(cfg, *gt))).collect());
    results.sort_by_key(|(key, _)| *key);
    let mut done = Vec::with_capacity(results.len());
    for (_, r) in results {
        done.push(r?);
    }
    let discarded = done.iter().map(|c| c.discarded).fold(0.0, f64::max);
    let rows = done
        .iter()
        .map(|c| vec![num(c.phi), num(c.gamma_tau), num(c.pe_ss), num(c.flux_ss), num(c.s_circuit_ss)]);
    out.write_csv("sweep.csv", &["phi", "gamma_tau", "pe_ss", "flux_ss", "S_circuit_ss"], rows)?;
    out.note("phi_steps", phi_steps);
    out.note("gamma_taus", gamma_taus.to_vec());
    out.note("steady_tail_fraction", STEADY_TAIL);
    out.finish(base, discarded)?;
    Ok(())
}

fn max_abs_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let n = a.shape()[0];
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (a.at(i, j) - b.at(i, j)).norm()).fold(0.0, f64::max)
}

/// Runs the chain and its Markovian reference, prints the largest deviation
/// and returns it.
pub fn cmd_compare(cfg: &ExperimentConfig, out_dir: &Path, tolerance: f64) -> CliResult<f64> {
    let mut out = OutputDir::create(out_dir, "compare")?;
    let stride = cfg.record_stride;
    let deviation;
    let (state, series) = match cfg.setup {
        Setup::Mirror => {
            let want = oracle::mirror_effective_bloch(cfg)?.at(1, 1).re;
            let (state, series) = evolve(cfg, false)?;
            let got = series.tail_mean(steady_start(cfg), |r| r.pe[0]).unwrap_or(f64::NAN);
            deviation = if want > 0.0 { (got - want).abs() / want } else { (got - want).abs() };
            println!("steady-state pe: chain {got:.8e}, effective Bloch {want:.8e}");
            out.note("pe_ss_chain", got);
            out.note("pe_ss_oracle", want);
            (state, series)
        }
        Setup::TwoAtoms => {
            let mut densities: Vec<(f64, DenseTensor)> = Vec::new();
            let mut hook = |s: &EvolutionState| {
                if s.k % stride == 0 {
                    densities.push((s.time(), observables::system_density(&s.chain)?));
                }
                Ok(())
            };
            let (state, series) = run_with(cfg, &RunOptions::for_config(cfg), &mut [&mut hook])?;
            let grid: Vec<f64> = densities.iter().map(|(t, _)| *t).collect();
            let reference = oracle::integrate_two_atom_master_eq(cfg, &grid, cfg.dt / 10.0, CrossTerms::StepLimit)?;
            deviation = densities
                .iter()
                .zip(&reference)
                .flat_map(|((_, rho), want)| {
                    (0..2).map(move |n| max_abs_diff(&oracle::atom_marginal(rho, n), &oracle::atom_marginal(want, n)))
                })
                .fold(0.0, f64::max);
            (state, series)
        }
    };
    println!("max deviation: {deviation:.8e} (tolerance {tolerance:.3e})");
    write_timeseries(&mut out, &series)?;
    out.note("max_deviation", deviation);
    out.note("tolerance", tolerance);
    out.finish(cfg, state.cumulative_discarded_weight)?;
    if !(deviation <= tolerance) {
        return Err(CliError::Tolerance { deviation, tolerance });
    }
    Ok(deviation)
}
