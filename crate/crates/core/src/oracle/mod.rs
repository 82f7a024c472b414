//! Reference solvers that share no numerics with the chain simulator.

pub mod dense;
pub mod lindblad;
mod stroboscopic;

pub use lindblad::{
    atom_marginal, bloch_steady_state, check_density, integrate_single_atom_bloch, integrate_two_atom_master_eq,
    mirror_effective_bloch, mirror_effective_parameters, projector, CrossTerms, OracleError, OracleResult,
};
pub use stroboscopic::{brute_force_evolve, DenseEvolution, DENSE_BUDGET};
