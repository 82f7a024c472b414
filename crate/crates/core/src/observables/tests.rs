use super::*;
use crate::model::truncated_annihilator;
use crate::mps::{SiteLabel, Truncation};
use crate::oracle::dense;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn wide() -> Truncation {
    Truncation { d_max: 512, cutoff: 0.0 }
}

/// Labels for a chain after `k` steps with delay `ell`.
fn labels(layout: ChainLayout) -> Vec<SiteLabel> {
    let mut l: Vec<SiteLabel> = (0..layout.k + layout.ell).map(|s| SiteLabel::bin(s as i64 - layout.ell as i64)).collect();
    l.push(SiteLabel::SYSTEM);
    l.push(SiteLabel::bin(layout.k as i64));
    l
}

fn dims(layout: ChainLayout, bin: usize) -> Vec<usize> {
    let mut d = vec![bin; layout.chain_len()];
    d[layout.system_position()] = 2;
    d
}

fn random_chain(layout: ChainLayout, bin: usize, seed: u64, excitation: f64) -> (VidalChain, Vec<C64>) {
    let d = dims(layout, bin);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = d.iter().product();
    let mut psi: Vec<C64> = (0..n)
        .map(|flat| {
            let photons: usize = dense::unflatten(flat, &d).iter().enumerate().filter(|(s, _)| *s != layout.system_position()).map(|(_, &i)| i).sum();
            let scale = excitation.powi(photons as i32);
            c(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
        })
        .collect();
    let norm = dense::norm_squared(&psi).sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    (VidalChain::from_state_vector(labels(layout), &d, &psi, wide()).unwrap(), psi)
}

fn coherent(alpha: C64, levels: usize) -> Vec<C64> {
    let mut v: Vec<C64> = Vec::with_capacity(levels);
    let mut term = c(1.0, 0.0);
    for n in 0..levels {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        v.push(term);
    }
    let norm = dense::norm_squared(&v).sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn product_chain(layout: ChainLayout, bin_state: &[C64]) -> VidalChain {
    let sites = labels(layout)
        .into_iter()
        .map(|l| if l.is_system() { (l, vec![c(1., 0.), c(0., 0.)]) } else { (l, bin_state.to_vec()) })
        .collect();
    VidalChain::product(sites, wide()).unwrap()
}

fn number(levels: usize) -> DenseTensor {
    DenseTensor::diagonal(&(0..levels).map(|n| c(n as f64, 0.0)).collect::<Vec<_>>())
}

#[test]
fn populations_of_product_states() {
    let g = VidalChain::new_product_state(&[c(1., 0.), c(0., 0.)], 3, 2, wide()).unwrap();
    assert_eq!(system_populations(&g).unwrap(), vec![0.0]);
    let ee = VidalChain::new_product_state(&[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)], 3, 2, wide()).unwrap();
    assert_eq!(system_populations(&ee).unwrap(), vec![1.0, 1.0]);
}

#[test]
fn product_state_profile_is_flat_zero() {
    let layout = ChainLayout { k: 3, ell: 2 };
    let chain = product_chain(layout, &coherent(c(0.3, 0.), 3));
    let prof = entropy_profile(&chain, layout, 0.1, 10).unwrap();
    assert_eq!(prof.values.len(), 6);
    assert!(prof.values.iter().all(|&v| v == 0.0));
    assert!((prof.t - 0.3).abs() < 1e-15);
}

#[test]
fn bell_pair_across_the_cut_gives_one_bit() {
    let layout = ChainLayout { k: 1, ell: 1 };
    // sites: b(-1), b(0), S, b(1); entangle b(-1) with S
    let d = dims(layout, 2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![c(0., 0.); 16];
    psi[dense::flatten(&[0, 0, 0, 0], &d)] = c(s, 0.);
    psi[dense::flatten(&[1, 0, 1, 0], &d)] = c(s, 0.);
    let chain = VidalChain::from_state_vector(labels(layout), &d, &psi, wide()).unwrap();
    let prof = entropy_profile(&chain, layout, 0.1, 5).unwrap();
    // p_A = 0 (bond 2) and p_A = 1 (bond 1) cut the pair; p_A = 2 does not
    assert!((prof.values[0] - 1.0).abs() < 1e-12);
    assert!((prof.values[1] - 1.0).abs() < 1e-12);
    assert!(prof.values[2].abs() < 1e-12);
    assert_eq!(prof.s_circuit, prof.values[1]);
}

#[test]
fn profile_matches_dense_entropies() {
    let layout = ChainLayout { k: 2, ell: 2 };
    let (chain, psi) = random_chain(layout, 2, 3, 1.0);
    let d = dims(layout, 2);
    let prof = entropy_profile(&chain, layout, 0.1, 10).unwrap();
    for (p_a, v) in prof.values.iter().enumerate() {
        let bond = layout.system_bond() - p_a;
        let right: Vec<usize> = (bond..d.len()).collect();
        let rho = dense::reduced_density(&psi, &d, &right);
        assert!((v - dense::entropy_bits(&rho)).abs() < 1e-8);
    }
}

#[test]
fn vacuum_delay_line_has_no_photons() {
    let layout = ChainLayout { k: 2, ell: 3 };
    let chain = product_chain(layout, &[c(1., 0.), c(0., 0.), c(0., 0.)]);
    let dist = delay_photon_distribution(&chain, layout.delay_window(), &number(3), 4).unwrap();
    assert!((dist.p[0] - 1.0).abs() < 1e-14);
    assert!(dist.tail_mass < 1e-14);
}

#[test]
fn single_photon_shared_by_two_bins() {
    let layout = ChainLayout { k: 0, ell: 2 };
    let d = dims(layout, 3);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![c(0., 0.); d.iter().product()];
    psi[dense::flatten(&[1, 0, 0, 0], &d)] = c(s, 0.);
    psi[dense::flatten(&[0, 1, 0, 0], &d)] = c(0., s);
    let chain = VidalChain::from_state_vector(labels(layout), &d, &psi, wide()).unwrap();
    let dist = delay_photon_distribution(&chain, layout.delay_window(), &number(3), 3).unwrap();
    assert!((dist.p[1] - 1.0).abs() < 1e-12);
}

#[test]
fn photon_distribution_matches_projectors() {
    let layout = ChainLayout { k: 1, ell: 3 };
    let (chain, psi) = random_chain(layout, 3, 9, 0.4);
    let d = dims(layout, 3);
    let n_max = 3;
    let dist = delay_photon_distribution(&chain, layout.delay_window(), &number(3), n_max).unwrap();
    let mut want = vec![0.0; 7];
    for (flat, z) in psi.iter().enumerate() {
        let idx = dense::unflatten(flat, &d);
        let n: usize = layout.delay_window().map(|s| idx[s]).sum();
        want[n] += z.norm_sqr();
    }
    for n in 0..=n_max {
        assert!((dist.p[n] - want[n]).abs() < 1e-8);
    }
    assert!((dist.tail_mass - want[n_max + 1..].iter().sum::<f64>()).abs() < 1e-8);
    let full = delay_photon_distribution(&chain, layout.delay_window(), &number(3), 6).unwrap();
    let summed: f64 = layout.delay_window().map(|s| site_expectation(&chain, s, &number(3)).unwrap().re).sum();
    assert!((full.mean() - summed).abs() < 1e-8);
    assert!((full.p.iter().sum::<f64>() + full.tail_mass - 1.0).abs() < 1e-8);
}

#[test]
fn correlations_match_dense_oracle() {
    let layout = ChainLayout { k: 4, ell: 1 };
    let (chain, psi) = random_chain(layout, 3, 17, 0.6);
    let d = dims(layout, 3);
    let a = truncated_annihilator(3).scale(c(0.1f64.sqrt(), 0.0));
    let ad = a.adjoint().unwrap();
    let q = layout.newest_output().unwrap();
    let corr = output_correlations(&chain, layout, &a, 4, false).unwrap();
    assert!((corr[0] - dense::expectation(&psi, &d, &[q], &ad.matmul(&a).unwrap())).norm() < 1e-10);
    for p in 1..4 {
        let want = dense::expectation(&psi, &d, &[q - p, q], &a.kron(&ad).unwrap());
        assert!((corr[p] - want).norm() < 1e-10, "p = {p}");
    }
    let n = ad.matmul(&a).unwrap();
    let g2 = g2_function(&chain, layout, &a, 3, FLUX_FLOOR).unwrap();
    let nq = dense::expectation(&psi, &d, &[q], &n).re;
    let pair = ad.matmul(&ad).unwrap().matmul(&a).unwrap().matmul(&a).unwrap();
    assert!((g2[0] - dense::expectation(&psi, &d, &[q], &pair).re / (nq * nq)).abs() < 1e-9);
    for p in 1..=3 {
        let joint = dense::expectation(&psi, &d, &[q - p, q], &n.kron(&n).unwrap()).re;
        let ns = dense::expectation(&psi, &d, &[q - p], &n).re;
        assert!((g2[p] - joint / (nq * ns)).abs() < 1e-9);
    }
    assert!(output_correlations(&chain, layout, &a, 5, false).is_err());
}

#[test]
fn vacuum_output_has_flat_zero_spectrum() {
    let layout = ChainLayout { k: 6, ell: 1 };
    let chain = product_chain(layout, &[c(1., 0.), c(0., 0.), c(0., 0.)]);
    let a = truncated_annihilator(3);
    let s = output_spectrum(&chain, layout, &a, 0.1, &[-1.0, 0.0, 2.0], 4, false).unwrap();
    assert!(s.s.iter().all(|&v| v == 0.0));
    let err = g2_function(&chain, layout, &a, 2, FLUX_FLOOR).unwrap_err();
    assert_eq!(err.to_string(), "no output flux; g2 undefined");
}

#[test]
fn coherent_output_statistics() {
    let layout = ChainLayout { k: 9, ell: 1 };
    let chain = product_chain(layout, &coherent(c(0.2, 0.1), 10));
    let a = truncated_annihilator(10);
    let g2 = g2_function(&chain, layout, &a, 6, FLUX_FLOOR).unwrap();
    assert!(g2.iter().all(|g| (g - 1.0).abs() < 1e-6), "{g2:?}");
    let incoh = output_spectrum(&chain, layout, &a, 0.1, &[-3.0, 0.0, 1.5], 6, true).unwrap();
    assert!(incoh.s.iter().all(|v| v.abs() < 1e-8));
    let coh = output_spectrum(&chain, layout, &a, 0.1, &[0.0], 6, false).unwrap();
    // 2 (1/Δt) |α|² (1/2 + 5)
    assert!((coh.s[0] - 2.0 * 10.0 * 0.05 * 5.5).abs() < 1e-9);
}

#[test]
fn default_m_is_eighty_percent_of_q() {
    assert_eq!(default_m(ChainLayout { k: 111, ell: 10 }), 80);
}
