//! Operator content of the two circuits: bin operators, system Hamiltonians
//! and the per-step unitary.
//!
//! Basis conventions: `|g⟩ = 0`, `|e⟩ = 1`; two atoms are ordered
//! `atom1 ⊗ atom2`; a two-mode bin is ordered `L ⊗ R`; the step space is
//! `system ⊗ bin_k ⊗ bin_{k-ℓ}`.

mod config;

pub use config::{initial_state, ConfigError, ConfigFile, ExperimentConfig, G2File, Setup, SpectrumFile, SpectrumSettings};

use num_complex::Complex64 as C64;

use crate::tensor::{matrix_exponential, DenseTensor, TensorResult};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Atomic lowering operator `|g⟩⟨e|`.
pub fn sigma_minus() -> DenseTensor {
    let mut m = DenseTensor::zeros(&[2, 2]);
    m.set(&[0, 1], c(1.0, 0.0));
    m
}

/// Truncated single-mode annihilator with `⟨n|a|n+1⟩ = sqrt(n+1)`.
pub fn truncated_annihilator(levels: usize) -> DenseTensor {
    let mut a = DenseTensor::zeros(&[levels, levels]);
    for n in 0..levels - 1 {
        a.set(&[n, n + 1], c(((n + 1) as f64).sqrt(), 0.0));
    }
    a
}

/// Noise-increment operators on one time bin.
#[derive(Clone, Debug)]
pub struct BinOperators {
    /// `ΔB` per mode, acting on the whole bin space.
    pub annihilate: Vec<DenseTensor>,
    /// Photon number per mode, acting on the whole bin space.
    pub number: Vec<DenseTensor>,
    pub levels: usize,
    pub dt: f64,
}

impl BinOperators {
    pub fn new(modes: usize, d_ph: usize, dt: f64) -> Self {
        let levels = d_ph + 1;
        let a = truncated_annihilator(levels).scale(c(dt.sqrt(), 0.0));
        let n_single = DenseTensor::diagonal(&(0..levels).map(|n| c(n as f64, 0.0)).collect::<Vec<_>>());
        let id = DenseTensor::identity(levels);
        let embed = |op: &DenseTensor, mode: usize| -> DenseTensor {
            (0..modes).fold(DenseTensor::identity(1), |acc, m| acc.kron(if m == mode { op } else { &id }).unwrap())
        };
        Self {
            annihilate: (0..modes).map(|m| embed(&a, m)).collect(),
            number: (0..modes).map(|m| embed(&n_single, m)).collect(),
            levels,
            dt,
        }
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self::new(cfg.setup.modes(), cfg.d_ph, cfg.dt)
    }

    pub fn modes(&self) -> usize {
        self.annihilate.len()
    }

    pub fn bin_dim(&self) -> usize {
        self.levels.pow(self.modes() as u32)
    }

    /// Total photon number (all modes).
    pub fn total_number(&self) -> DenseTensor {
        self.number.iter().skip(1).fold(self.number[0].clone(), |acc, n| acc.add(n).unwrap())
    }

    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![c(0.0, 0.0); self.bin_dim()];
        v[0] = c(1.0, 0.0);
        v
    }
}

/// Lowering operator of atom `n` embedded in the system space.
pub fn atom_lowering(atoms: usize, n: usize) -> DenseTensor {
    let (id, sm) = (DenseTensor::identity(2), sigma_minus());
    (0..atoms).fold(DenseTensor::identity(1), |acc, m| acc.kron(if m == n { &sm } else { &id }).unwrap())
}

/// `|e⟩⟨e|` of atom `n` embedded in the system space.
pub fn atom_excitation(atoms: usize, n: usize) -> DenseTensor {
    let s = atom_lowering(atoms, n);
    s.adjoint().unwrap().matmul(&s).unwrap()
}

/// `H = Σ_n [-Δ_n |e⟩⟨e| - (Ω_n |g⟩⟨e| + Ω_n* |e⟩⟨g|)/2]` with ħ = 1.
pub fn build_system_hamiltonian(cfg: &ExperimentConfig) -> DenseTensor {
    let atoms = cfg.setup.atoms();
    let dim = 1 << atoms;
    let mut h = DenseTensor::zeros(&[dim, dim]);
    for n in 0..atoms {
        let s = atom_lowering(atoms, n);
        let sd = s.adjoint().unwrap();
        let term = sd
            .matmul(&s)
            .unwrap()
            .scale(c(-cfg.delta[n], 0.0))
            .sub(&s.scale(cfg.omega[n] * 0.5))
            .unwrap()
            .sub(&sd.scale(cfg.omega[n].conj() * 0.5))
            .unwrap();
        h = h.add(&term).unwrap();
    }
    h
}

/// `A ⊗ B ⊗ C` on `system ⊗ bin_k ⊗ bin_{k-ℓ}`.
fn on_step_space(sys: &DenseTensor, new: &DenseTensor, old: &DenseTensor) -> DenseTensor {
    sys.kron(new).unwrap().kron(old).unwrap()
}

/// `X - X†`.
fn minus_hc(x: &DenseTensor) -> DenseTensor {
    x.sub(&x.adjoint().unwrap()).unwrap()
}

/// `G = -i H Δt + Σ_n O_n` on `system ⊗ bin_k ⊗ bin_{k-ℓ}`.
///
/// Mirror: `O = (√γ_R ΔB†(k) + √γ_L e^{iφ} ΔB†(k-ℓ)) c - h.c.`
///
/// Two atoms:
/// `O_1 = (√γ_L ΔB_L†(k) + √γ_R e^{iφ} ΔB_R†(k-ℓ)) c_1 - h.c.`,
/// `O_2 = (√γ_L e^{iφ} ΔB_L†(k-ℓ) + √γ_R ΔB_R†(k)) c_2 - h.c.`
pub fn build_step_generator(cfg: &ExperimentConfig, ops: &BinOperators) -> DenseTensor {
    let bin_id = DenseTensor::identity(ops.bin_dim());
    let h = build_system_hamiltonian(cfg);
    let mut g = on_step_space(&h, &bin_id, &bin_id).scale(c(0.0, -cfg.dt));
    let (gl, gr) = (cfg.gamma_l.sqrt(), cfg.gamma_r.sqrt());
    let phase = C64::from_polar(1.0, cfg.phi);
    let dag = |m: &DenseTensor| m.adjoint().unwrap();

    let mut add = |coeff: C64, lower: &DenseTensor, new: &DenseTensor, old: &DenseTensor| {
        if coeff.norm() == 0.0 {
            return;
        }
        let x = on_step_space(lower, new, old).scale(coeff);
        g = g.add(&minus_hc(&x)).unwrap();
    };
    match cfg.setup {
        Setup::Mirror => {
            let cm = sigma_minus();
            let bd = dag(&ops.annihilate[0]);
            add(c(gr, 0.0), &cm, &bd, &bin_id);
            add(phase * gl, &cm, &bin_id, &bd);
        }
        Setup::TwoAtoms => {
            let (c1, c2) = (atom_lowering(2, 0), atom_lowering(2, 1));
            let (bl, br) = (dag(&ops.annihilate[0]), dag(&ops.annihilate[1]));
            add(c(gl, 0.0), &c1, &bl, &bin_id);
            add(phase * gr, &c1, &bin_id, &br);
            add(phase * gl, &c2, &bin_id, &bl);
            add(c(gr, 0.0), &c2, &br, &bin_id);
        }
    }
    g
}

/// `exp(G)` together with its window-ordered copy.
#[derive(Clone, Debug)]
pub struct StepUnitary {
    /// On `system ⊗ bin_k ⊗ bin_{k-ℓ}`.
    pub matrix: DenseTensor,
    /// The same operator on `bin_{k-ℓ} ⊗ system ⊗ bin_k`, the order in which
    /// the three sites sit in the chain when it is applied.
    pub window: DenseTensor,
    pub sys_dim: usize,
    pub bin_dim: usize,
    pub unitarity_residual: f64,
}

impl StepUnitary {
    pub fn from_matrix(matrix: DenseTensor, sys_dim: usize, bin_dim: usize) -> TensorResult<Self> {
        let unitarity_residual = matrix.unitarity_residual()?;
        let n = sys_dim * bin_dim * bin_dim;
        let window = matrix
            .clone()
            .reshape(&[sys_dim, bin_dim, bin_dim, sys_dim, bin_dim, bin_dim])?
            .permute(&[2, 0, 1, 5, 3, 4])?
            .reshape(&[n, n])?;
        Ok(Self { matrix, window, sys_dim, bin_dim, unitarity_residual })
    }

    pub fn identity(sys_dim: usize, bin_dim: usize) -> Self {
        Self::from_matrix(DenseTensor::identity(sys_dim * bin_dim * bin_dim), sys_dim, bin_dim).unwrap()
    }
}

pub fn build_step_unitary(cfg: &ExperimentConfig, ops: &BinOperators) -> TensorResult<StepUnitary> {
    let g = build_step_generator(cfg, ops);
    StepUnitary::from_matrix(matrix_exponential(&g)?, cfg.system_dim(), ops.bin_dim())
}
