//! Tangent-surrogate radius solve against exhaustive search of the quartic.

use maisac_core::config::SystemConfig;
use maisac_core::numerics::{complex_normal, rng, CMatrix};
use maisac_core::robust::{
    constraint_margin, solve_epsilon, theta_sets, worst_case_crlb, SolveOptions, Surrogate,
    ThetaSet,
};
use num_complex::Complex64;
use rand::Rng;

fn thetas(seed: u64) -> Vec<ThetaSet> {
    let cfg = SystemConfig::default();
    let ch = cfg
        .scenario(seed)
        .unwrap()
        .channels(&cfg.spread_layout().unwrap())
        .unwrap();
    let mut r = rng(seed, 3);
    let w: Vec<CMatrix> = (0..2)
        .map(|_| {
            let m = CMatrix::from_fn(4, 2, |_, _| complex_normal(&mut r, 1.0));
            m.scale(Complex64::new((1.0 / m.frob_norm_sqr()).sqrt(), 0.0))
        })
        .collect();
    theta_sets(&ch, &w, cfg.noise_w(), 1.0)
}

fn brute_force(t: &[ThetaSet], gamma: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let n = 100_000;
    (0..=n)
        .map(|i| 0.5 * i as f64 / n as f64)
        .filter(|&e| constraint_margin(e, t, gamma).is_some_and(|m| m >= 0.0))
        .map(|e| (e, f(e)))
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|b| b.0)
}

#[test]
fn matches_exhaustive_search() {
    let mut r = rng(0, 17);
    for seed in 0..50 {
        let t = thetas(seed);
        let target = r.gen_range(0.05..0.45);
        let gamma = t
            .iter()
            .map(|x| worst_case_crlb(target, x))
            .fold(0.0, f64::max);
        let peak = r.gen_range(0.0..0.5);
        let objectives: [Box<dyn Fn(f64) -> f64>; 3] = [
            Box::new(|e| e),
            Box::new(|e| -e),
            Box::new(move |e| -(e - peak).powi(2)),
        ];
        for f in &objectives {
            let brute = brute_force(&t, gamma, f).expect("feasible by construction");
            for surrogate in [Surrogate::Inner, Surrogate::Printed] {
                let opts = SolveOptions {
                    surrogate,
                    ..SolveOptions::default()
                };
                let sca = solve_epsilon(&t, gamma, f, &opts);
                assert!(sca.feasible);
                assert!(
                    (sca.epsilon_star - brute).abs() <= 1e-4,
                    "seed {seed} {surrogate:?}: sca {} vs brute {brute}",
                    sca.epsilon_star
                );
            }
        }
    }
}

#[test]
fn inner_surrogate_iterates_are_feasible_and_monotone() {
    let mut r = rng(1, 17);
    for seed in 0..50 {
        let t = thetas(seed);
        let target = r.gen_range(0.05..0.45);
        let gamma = t
            .iter()
            .map(|x| worst_case_crlb(target, x))
            .fold(0.0, f64::max);
        let sca = solve_epsilon(&t, gamma, |e| e, &SolveOptions::default());
        let values: Vec<f64> = sca.history.iter().map(|h| h.objective).collect();
        assert!(
            values.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "{values:?}"
        );
        for h in &sca.history {
            assert!(constraint_margin(h.epsilon, &t, gamma).is_some_and(|m| m >= -1e-9 * gamma));
        }
    }
}
