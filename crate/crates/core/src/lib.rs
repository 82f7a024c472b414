//! Matrix-product-state simulation of photonic circuits with time delays.

pub mod engine;
pub mod model;
pub mod mps;
pub mod observables;
pub mod oracle;
pub mod tensor;
