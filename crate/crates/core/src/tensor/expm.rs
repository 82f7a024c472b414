use num_complex::Complex64 as C64;

use super::{DenseTensor, TensorResult};

const TAYLOR_TOL: f64 = 1e-17;
const MAX_TERMS: usize = 40;

fn one_norm(m: &DenseTensor) -> f64 {
    let n = m.shape()[0];
    (0..n).map(|j| (0..n).map(|i| m.at(i, j).norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(g)` by scaling and squaring around a truncated Taylor series.
///
/// The input is scaled to 1-norm ≤ 1/2, the series is summed until the next
/// term falls below 1e-17 relative to the partial sum, and the result is
/// squared back up.
pub fn matrix_exponential(g: &DenseTensor) -> TensorResult<DenseTensor> {
    let n = g.expect_square()?;
    let norm = one_norm(g);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = g.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));

    let mut sum = DenseTensor::identity(n);
    let mut term = DenseTensor::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.matmul(&a)?.scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term)?;
        if one_norm(&term) <= TAYLOR_TOL * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum)?;
    }
    Ok(sum)
}
