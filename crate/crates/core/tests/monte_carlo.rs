//! Closed-form statistics against sample averages of the simulated amplifier.

use std::f64::consts::PI;

use maisac_core::comm::LinkTerms;
use maisac_core::config::SystemConfig;
use maisac_core::numerics::{complex_normal, rng, CMatrix, SimRng};
use maisac_core::oracle;
use maisac_core::pa::{bussgang_gain, distortion_covariance, BussgangModel};
use maisac_core::sensing::FimTerms;
use num_complex::Complex64;
use rand::Rng;

const DRAWS: usize = 100_000;

fn unit_power_w(r: &mut SimRng, n: usize, k: usize, power: f64) -> CMatrix {
    let m = CMatrix::from_fn(n, k, |_, _| complex_normal(r, 1.0));
    m.scale(Complex64::new((power / m.frob_norm_sqr()).sqrt(), 0.0))
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    a.sub(b).frob_norm() / b.frob_norm()
}

fn in_disk(r: &mut SimRng, eps: f64) -> Complex64 {
    Complex64::from_polar(eps * r.gen::<f64>().sqrt(), r.gen_range(0.0..2.0 * PI))
}

#[test]
fn full_bussgang_matrix_matches_cross_correlation() {
    let mut r = rng(11, 0);
    let w = unit_power_w(&mut r, 4, 4, 1.0);
    let b3 = Complex64::new(-0.12, 0.08);
    let est = oracle::bussgang_full(&mut r, &w, 1.0, b3, DRAWS).unwrap();
    let exact = bussgang_gain(&w, 1.0, b3);
    assert!(rel(&est, &exact) < 0.02, "{}", rel(&est, &exact));
}

#[test]
fn per_antenna_gain_and_distortion_match_samples() {
    let mut r = rng(12, 0);
    for _ in 0..3 {
        let w = unit_power_w(&mut r, 4, 2, 1.0);
        let b3 = in_disk(&mut r, 0.2);
        let est = oracle::bussgang_diag(&mut r, &w, 0.9, b3, DRAWS);
        let exact = bussgang_gain(&w, 0.9, b3);
        for (i, g) in est.iter().enumerate() {
            let e = exact[(i, i)];
            assert!((g - e).norm() <= 0.02 * e.norm());
        }
        let cov = oracle::distortion_covariance(&mut r, &w, 0.9, b3, DRAWS);
        let q = distortion_covariance(&w, b3);
        assert!(rel(&cov, &q) < 0.05, "{}", rel(&cov, &q));
    }
}

#[test]
fn sindr_matches_received_samples() {
    let cfg = SystemConfig::default();
    let scenario = cfg.scenario(5).unwrap();
    let layout = cfg.spread_layout().unwrap();
    let ch = scenario.channels(&layout).unwrap();
    let mut r = rng(13, 0);
    let w: Vec<CMatrix> = (0..2).map(|_| unit_power_w(&mut r, 4, 2, 1.0)).collect();
    let b3 = [in_disk(&mut r, 0.2), in_disk(&mut r, 0.2)];
    let exact = LinkTerms::new(&ch.comm, &w, &BussgangModel::new(&w, 1.0, &b3));
    let est = oracle::sindr(&mut r, &ch.comm, &w, 1.0, &b3, cfg.noise_w(), DRAWS);
    for (k, s) in est.iter().enumerate() {
        let e = exact.sindr(k, cfg.noise_w());
        assert!((s - e).abs() <= 0.03 * e, "user {k}: {s} vs {e}");
    }
}

#[test]
fn expected_fim_matches_sample_average() {
    let cfg = SystemConfig::default();
    let noise = cfg.noise_w();
    for seed in 0..3 {
        let scenario = cfg.scenario(seed).unwrap();
        let layout = cfg.spread_layout().unwrap();
        let ch = scenario.channels(&layout).unwrap();
        let mut r = rng(seed, 21);
        let w: Vec<CMatrix> = (0..2).map(|_| unit_power_w(&mut r, 4, 2, 1.0)).collect();
        for eps in [0.0, 0.2] {
            let b3: Vec<Complex64> = (0..2).map(|_| in_disk(&mut r, eps)).collect();
            for b in 0..2 {
                let derivs: Vec<&[CMatrix; 2]> = ch.derivs.iter().map(|row| &row[b]).collect();
                let exact = FimTerms::new(&derivs, &w, noise).matrix(1.0, &b3);
                let est = oracle::fim(&mut r, &derivs, &w, 1.0, &b3, noise, DRAWS);
                let diff: f64 = (0..2)
                    .flat_map(|i| (0..2).map(move |j| (i, j)))
                    .map(|(i, j)| (est[i][j] - exact[i][j]).powi(2))
                    .sum();
                let norm: f64 = exact.iter().flatten().map(|x| x * x).sum();
                let err = (diff / norm).sqrt();
                assert!(err < 0.03, "seed {seed} sAP {b} eps {eps}: {err}");
            }
        }
    }
}
