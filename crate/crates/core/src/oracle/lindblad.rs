//! Markovian reference dynamics by fixed-step RK4 on the density matrix.

use num_complex::Complex64 as C64;
use thiserror::Error;

use super::dense::hermitian_eigenvalues;
use crate::model::{atom_lowering, build_system_hamiltonian, ExperimentConfig, Setup};
use crate::tensor::DenseTensor;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("integration step {step} must be positive and at most {limit}")]
    StepTooLarge { step: f64, limit: f64 },
    #[error("time grid must start at 0 or later and be non-decreasing")]
    BadGrid,
    #[error("density matrix left the physical set at t = {t}: {detail}")]
    Unphysical { t: f64, detail: String },
    #[error("the effective Bloch limit requires gamma_L = gamma_R (got {gamma_l} and {gamma_r})")]
    Asymmetric { gamma_l: f64, gamma_r: f64 },
    #[error("this oracle needs setup {0:?}")]
    WrongSetup(Setup),
    #[error("dense budget exceeded: dimension {dim} > {limit}")]
    DenseBudget { dim: usize, limit: usize },
    #[error("{0}")]
    Model(String),
}

pub type OracleResult<T> = Result<T, OracleError>;

/// Which cross terms the two-atom master equation carries.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CrossTerms {
    /// `+(γ_L e^{iφ}[c_2, ρ c_1†] + γ_R e^{iφ}[c_1, ρ c_2†] + h.c.)`: the
    /// `τ → 0` limit of the step operators, with the left-moving mode
    /// carrying light from atom 1 to atom 2.
    StepLimit,
    /// `-(γ_L e^{iφ}[c_1, ρ c_2†] + γ_R e^{iφ}[c_2, ρ c_1†] - h.c.)` exactly as
    /// usually printed. It does not preserve hermiticity, which the guard
    /// reports.
    AsPrinted,
}

fn mm(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    a.matmul(b).expect("square operators of one size")
}

fn plus(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    a.add(b).expect("same shape")
}

fn minus(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    a.sub(b).expect("same shape")
}

fn dag(a: &DenseTensor) -> DenseTensor {
    a.adjoint().expect("rank 2")
}

/// `D[c]ρ = cρc† - {c†c, ρ}/2`.
pub fn dissipator(c: &DenseTensor, rho: &DenseTensor) -> DenseTensor {
    let cd = dag(c);
    let cdc = mm(&cd, c);
    let anti = plus(&mm(&cdc, rho), &mm(rho, &cdc)).scale(C64::new(0.5, 0.0));
    minus(&mm(&mm(c, rho), &cd), &anti)
}

fn commutator(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    minus(&mm(a, b), &mm(b, a))
}

/// Right-hand side `dρ/dt` of a master equation.
pub trait Liouvillian {
    fn apply(&self, rho: &DenseTensor) -> DenseTensor;
}

impl<F: Fn(&DenseTensor) -> DenseTensor> Liouvillian for F {
    fn apply(&self, rho: &DenseTensor) -> DenseTensor {
        self(rho)
    }
}

/// `-i[H, ρ] + Σ_j D[c_j]ρ`.
pub struct Lindblad {
    pub h: DenseTensor,
    pub jumps: Vec<DenseTensor>,
}

impl Liouvillian for Lindblad {
    fn apply(&self, rho: &DenseTensor) -> DenseTensor {
        let mut out = commutator(&self.h, rho).scale(C64::new(0.0, -1.0));
        for c in &self.jumps {
            out = plus(&out, &dissipator(c, rho));
        }
        out
    }
}

pub struct TwoAtomMasterEquation {
    pub h: DenseTensor,
    pub c1: DenseTensor,
    pub c2: DenseTensor,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub phi: f64,
    pub form: CrossTerms,
}

impl TwoAtomMasterEquation {
    pub fn new(cfg: &ExperimentConfig, form: CrossTerms) -> OracleResult<Self> {
        if cfg.setup != Setup::TwoAtoms {
            return Err(OracleError::WrongSetup(Setup::TwoAtoms));
        }
        Ok(Self {
            h: build_system_hamiltonian(cfg),
            c1: atom_lowering(2, 0),
            c2: atom_lowering(2, 1),
            gamma_l: cfg.gamma_l,
            gamma_r: cfg.gamma_r,
            phi: cfg.phi,
            form,
        })
    }
}

impl Liouvillian for TwoAtomMasterEquation {
    fn apply(&self, rho: &DenseTensor) -> DenseTensor {
        let gamma = self.gamma_l + self.gamma_r;
        let e = C64::from_polar(1.0, self.phi);
        let mut out = commutator(&self.h, rho).scale(C64::new(0.0, -1.0));
        out = plus(&out, &plus(&dissipator(&self.c1, rho), &dissipator(&self.c2, rho)).scale(C64::new(gamma, 0.0)));
        let (first, second) = match self.form {
            CrossTerms::StepLimit => (
                commutator(&self.c2, &mm(rho, &dag(&self.c1))).scale(e * self.gamma_l),
                commutator(&self.c1, &mm(rho, &dag(&self.c2))).scale(e * self.gamma_r),
            ),
            CrossTerms::AsPrinted => (
                commutator(&self.c1, &mm(rho, &dag(&self.c2))).scale(e * self.gamma_l),
                commutator(&self.c2, &mm(rho, &dag(&self.c1))).scale(e * self.gamma_r),
            ),
        };
        let x = plus(&first, &second);
        let cross = match self.form {
            CrossTerms::StepLimit => plus(&x, &dag(&x)),
            CrossTerms::AsPrinted => minus(&dag(&x), &x),
        };
        plus(&out, &cross)
    }
}

/// Hermiticity, unit trace and positivity within the stated tolerances.
pub fn check_density(rho: &DenseTensor, t: f64) -> OracleResult<()> {
    let herm = rho.max_abs_diff(&dag(rho));
    if herm > 1e-10 {
        return Err(OracleError::Unphysical { t, detail: format!("hermiticity residual {herm:.3e}") });
    }
    let tr = rho.trace().expect("square");
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(OracleError::Unphysical { t, detail: format!("trace {tr}") });
    }
    let min = hermitian_eigenvalues(rho).into_iter().fold(f64::INFINITY, f64::min);
    if min < -1e-9 {
        return Err(OracleError::Unphysical { t, detail: format!("eigenvalue {min:.3e}") });
    }
    Ok(())
}

/// Classical RK4 with fixed step at most `step`, sampled on `t_grid`.
/// Every sample passes [`check_density`].
pub fn integrate(l: &impl Liouvillian, rho0: &DenseTensor, t_grid: &[f64], step: f64) -> OracleResult<Vec<DenseTensor>> {
    if !(step > 0.0) {
        return Err(OracleError::StepTooLarge { step, limit: f64::INFINITY });
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(OracleError::BadGrid);
    }
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        let n = (span / step - 1e-9).ceil().max(0.0) as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                rho = rk4_step(l, &rho, h);
            }
        }
        t = target;
        check_density(&rho, t)?;
        out.push(rho.clone());
    }
    Ok(out)
}

pub fn rk4_step(l: &impl Liouvillian, rho: &DenseTensor, h: f64) -> DenseTensor {
    let half = C64::new(h / 2.0, 0.0);
    let k1 = l.apply(rho);
    let k2 = l.apply(&plus(rho, &k1.scale(half)));
    let k3 = l.apply(&plus(rho, &k2.scale(half)));
    let k4 = l.apply(&plus(rho, &k3.scale(C64::new(h, 0.0))));
    let sum = plus(&plus(&k1, &k4), &plus(&k2, &k3).scale(C64::new(2.0, 0.0)));
    plus(rho, &sum.scale(C64::new(h / 6.0, 0.0)))
}

/// Pure-state density matrix.
pub fn projector(psi: &[C64]) -> DenseTensor {
    let n = psi.len();
    DenseTensor::matrix_from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// Two-atom master equation in the `τ → 0` limit, starting from the
/// configured initial state. The step must not exceed `Δt / 10`.
pub fn integrate_two_atom_master_eq(
    cfg: &ExperimentConfig,
    t_grid: &[f64],
    step: f64,
    form: CrossTerms,
) -> OracleResult<Vec<DenseTensor>> {
    let limit = cfg.dt / 10.0;
    if step > limit * (1.0 + 1e-12) || step <= 0.0 {
        return Err(OracleError::StepTooLarge { step, limit });
    }
    let me = TwoAtomMasterEquation::new(cfg, form)?;
    integrate(&me, &projector(&cfg.initial_state()), t_grid, step)
}

/// Driven, damped two-level atom with `H = -Δ|e⟩⟨e| - (Ω|g⟩⟨e| + h.c.)/2`.
pub fn bloch_liouvillian(gamma: f64, omega: C64, delta: f64) -> Lindblad {
    let sm = atom_lowering(1, 0);
    let sp = dag(&sm);
    let h = minus(
        &mm(&sp, &sm).scale(C64::new(-delta, 0.0)),
        &plus(&sm.scale(omega * 0.5), &sp.scale(omega.conj() * 0.5)),
    );
    Lindblad { h, jumps: vec![sm.scale(C64::new(gamma.sqrt(), 0.0))] }
}

pub fn integrate_single_atom_bloch(
    gamma: f64,
    omega: C64,
    delta: f64,
    rho0: &DenseTensor,
    t_grid: &[f64],
    step: f64,
) -> OracleResult<Vec<DenseTensor>> {
    integrate(&bloch_liouvillian(gamma, omega, delta), rho0, t_grid, step)
}

/// Analytic steady state of the single-atom Bloch equations.
pub fn bloch_steady_state(gamma: f64, omega: C64, delta: f64) -> DenseTensor {
    let o2 = omega.norm_sqr();
    let denom = delta * delta + gamma * gamma / 4.0 + o2 / 2.0;
    let pe = if denom > 0.0 { (o2 / 4.0) / denom } else { 0.0 };
    let coh = if denom > 0.0 {
        C64::new(0.0, 1.0) * omega.conj() * (1.0 - 2.0 * pe) / C64::new(gamma, -2.0 * delta)
    } else {
        C64::new(0.0, 0.0)
    };
    // ρ_eg = coh, basis (g, e)
    DenseTensor::new(vec![2, 2], vec![C64::new(1.0 - pe, 0.0), coh.conj(), coh, C64::new(pe, 0.0)]).expect("2x2")
}

/// `γ_eff = 2γ cos²(φ/2)` and `Δ_eff = Δ - (γ/2) sin φ` for a mirror with
/// `γ_L = γ_R`.
pub fn mirror_effective_parameters(cfg: &ExperimentConfig) -> OracleResult<(f64, f64)> {
    if cfg.setup != Setup::Mirror {
        return Err(OracleError::WrongSetup(Setup::Mirror));
    }
    if (cfg.gamma_l - cfg.gamma_r).abs() > 1e-12 {
        return Err(OracleError::Asymmetric { gamma_l: cfg.gamma_l, gamma_r: cfg.gamma_r });
    }
    let gamma = cfg.gamma();
    let gamma_eff = 2.0 * gamma * (cfg.phi / 2.0).cos().powi(2);
    let delta_eff = cfg.delta[0] - gamma / 2.0 * cfg.phi.sin();
    Ok((gamma_eff, delta_eff))
}

/// Steady state of the Markovian mirror limit.
pub fn mirror_effective_bloch(cfg: &ExperimentConfig) -> OracleResult<DenseTensor> {
    let (gamma_eff, delta_eff) = mirror_effective_parameters(cfg)?;
    Ok(bloch_steady_state(gamma_eff, cfg.omega[0], delta_eff))
}

/// Partial trace of a two-atom density matrix onto atom `n`.
pub fn atom_marginal(rho: &DenseTensor, n: usize) -> DenseTensor {
    DenseTensor::matrix_from_fn(2, 2, |i, j| {
        (0..2)
            .map(|o| {
                let (r, c) = if n == 0 { (i * 2 + o, j * 2 + o) } else { (o * 2 + i, o * 2 + j) };
                rho.at(r, c)
            })
            .sum()
    })
}
