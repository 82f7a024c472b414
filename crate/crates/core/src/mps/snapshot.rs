//! Binary checkpoint format for a [`VidalChain`].
//!
//! Layout (all integers `u64`, all reals IEEE-754 `f64`, little-endian):
//!
//! ```text
//! "TBMP" version:u8
//! d_max cutoff n_sites
//! n_sites × { kind:u8 bin_index:i64 dl d dr (re im)×(dl·d·dr) }
//! (n_sites+1) × { len λ×len }
//! ```

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::{MpsError, MpsResult, SiteKind, SiteLabel, Truncation, VidalChain};
use crate::tensor::DenseTensor;

pub const MAGIC: [u8; 4] = *b"TBMP";
pub const VERSION: u8 = 1;

fn put_u64(w: &mut impl Write, x: u64) -> MpsResult<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, x: f64) -> MpsResult<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn get_u64(r: &mut impl Read) -> MpsResult<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> MpsResult<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_len(r: &mut impl Read, what: &str) -> MpsResult<usize> {
    let n = get_u64(r)?;
    if n == 0 || n > (1 << 32) {
        return Err(MpsError::Snapshot(format!("implausible {what} {n}")));
    }
    Ok(n as usize)
}

pub fn write_snapshot(chain: &VidalChain, w: &mut impl Write) -> MpsResult<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION])?;
    put_u64(w, chain.trunc.d_max as u64)?;
    put_f64(w, chain.trunc.cutoff)?;
    put_u64(w, chain.len() as u64)?;
    for (label, g) in chain.labels.iter().zip(&chain.tensors) {
        let kind = match label.kind {
            SiteKind::System => 0u8,
            SiteKind::TimeBin => 1u8,
        };
        w.write_all(&[kind])?;
        w.write_all(&label.bin_index.unwrap_or(0).to_le_bytes())?;
        for &s in g.shape() {
            put_u64(w, s as u64)?;
        }
        for z in g.data() {
            put_f64(w, z.re)?;
            put_f64(w, z.im)?;
        }
    }
    for lam in &chain.lambdas {
        put_u64(w, lam.len() as u64)?;
        for &x in lam {
            put_f64(w, x)?;
        }
    }
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> MpsResult<VidalChain> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    if head[..4] != MAGIC {
        return Err(MpsError::Snapshot("bad magic".into()));
    }
    if head[4] != VERSION {
        return Err(MpsError::Snapshot(format!("unsupported version {}", head[4])));
    }
    let d_max = get_len(r, "d_max")?;
    let cutoff = get_f64(r)?;
    let n = get_len(r, "site count")?;
    let mut labels = Vec::with_capacity(n);
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let idx = get_u64(r)? as i64;
        let label = match kind[0] {
            0 => SiteLabel::SYSTEM,
            1 => SiteLabel::bin(idx),
            k => return Err(MpsError::Snapshot(format!("unknown site kind {k}"))),
        };
        let shape = vec![get_len(r, "dimension")?, get_len(r, "dimension")?, get_len(r, "dimension")?];
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(C64::new(get_f64(r)?, get_f64(r)?));
        }
        labels.push(label);
        tensors.push(DenseTensor::new(shape, data)?);
    }
    let mut lambdas = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let len = get_len(r, "bond dimension")?;
        let mut lam = Vec::with_capacity(len);
        for _ in 0..len {
            lam.push(get_f64(r)?);
        }
        lambdas.push(lam);
    }
    let n_sys = labels.iter().filter(|l| l.is_system()).count();
    if n_sys != 1 {
        return Err(MpsError::SystemCount(n_sys));
    }
    for (s, g) in tensors.iter().enumerate() {
        if g.shape()[0] != lambdas[s].len() || g.shape()[2] != lambdas[s + 1].len() {
            return Err(MpsError::Snapshot(format!("site {s} does not match its bonds")));
        }
    }
    Ok(VidalChain { labels, tensors, lambdas, trunc: Truncation { d_max, cutoff } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VidalChain {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, s)];
        VidalChain::from_state_vector(vec![SiteLabel::bin(-1), SiteLabel::SYSTEM], &[2, 2], &psi, Truncation::default())
            .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let chain = sample();
        let mut buf = Vec::new();
        write_snapshot(&chain, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"TBMP");
        assert_eq!(buf[4], 1);
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back.labels, chain.labels);
        assert_eq!(back.tensors, chain.tensors);
        assert_eq!(back.lambdas, chain.lambdas);
        assert_eq!(back.trunc, chain.trunc);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(matches!(read_snapshot(&mut wrong.as_slice()), Err(MpsError::Snapshot(_))));
        buf[4] = 9;
        assert!(read_snapshot(&mut buf.as_slice()).unwrap_err().to_string().contains("version 9"));
    }

    #[test]
    fn truncated_input_is_an_io_error() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_snapshot(&mut buf.as_slice()), Err(MpsError::Io(_))));
    }
}
