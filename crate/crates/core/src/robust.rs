//! Worst-case sensing constraint over the coefficient disk `|beta3_a| <= eps`.
//!
//! Every expected FIM entry is `c + Re(linear in beta3) + Re(bilinear in beta3)
//! + sum_a 2|beta3_a|^2 D_a`, so the triangle inequality gives bounds that are
//! quadratic in `eps`. Products of those bounds bound the determinant, and the
//! CRLB trace requirement becomes a quartic polynomial inequality in `eps`.

use num_complex::Complex64;

use crate::comm::{LinkBudget, Solution};
use crate::error::Result;
use crate::geometry::ChannelSet;
use crate::numerics::{cabs, Real};
use crate::sensing::{fim_terms, FimTerms};

/// Triangle-inequality aggregates of one FIM entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryBound<S = f64> {
    /// Value at `beta3 = 0`.
    pub c: S,
    /// Coefficient of `eps`.
    pub linear: S,
    /// Coefficient of `eps^2` from the bilinear terms.
    pub cross: S,
    /// Positive and negative parts of the distortion term.
    pub dist_up: S,
    pub dist_lo: S,
}

impl<S: Real> EntryBound<S> {
    fn new(terms: &FimTerms<S>, e: usize, beta1: f64) -> Self {
        let t = &terms.entries[e];
        let b1 = S::from_f64(beta1);
        let (mut c, mut linear, mut cross) = (S::zero(), S::zero(), S::zero());
        for p in t.pairs.iter().flatten() {
            c = c + p.plain.re * b1 * b1;
            linear = linear + (cabs(p.left) + cabs(p.right)) * (b1 + b1);
            cross = cross + cabs(p.both).scale(4.0);
        }
        let (mut dist_up, mut dist_lo) = (S::zero(), S::zero());
        for &d in &t.distortion {
            dist_up = dist_up + d.relu().scale(2.0);
            dist_lo = dist_lo + d.min(S::zero()).scale(2.0);
        }
        Self {
            c,
            linear,
            cross,
            dist_up,
            dist_lo,
        }
    }

    pub fn upper(&self, eps: f64) -> S {
        self.c + self.linear.scale(eps) + (self.cross + self.dist_up).scale(eps * eps)
    }

    pub fn lower(&self, eps: f64) -> S {
        self.c - self.linear.scale(eps) + (self.dist_lo - self.cross).scale(eps * eps)
    }

    /// Bound on `|entry|` over the disk.
    pub fn magnitude(&self, eps: f64) -> S {
        self.c.abs() + self.linear.scale(eps) + self.spread().scale(eps * eps)
    }

    fn spread(&self) -> S {
        self.cross + self.dist_up - self.dist_lo
    }
}

/// Aggregates of one sAP, arranged as the coefficients of the constraint
/// polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSet<S = f64> {
    pub entries: [EntryBound<S>; 4],
    /// Linear coefficient of the trace upper bound.
    pub theta: S,
    /// Quadratic coefficient of the trace upper bound.
    pub theta_dot: S,
    /// Linear decrements of the two diagonal lower bounds.
    pub theta_1: S,
    pub theta_2: S,
    /// Linear increments of the two off-diagonal magnitude bounds.
    pub theta_3: S,
    pub theta_4: S,
    /// Quadratic terms of the diagonal lower bounds (non-positive).
    pub theta_dot_1: S,
    pub theta_dot_2: S,
    /// Quadratic terms of the off-diagonal magnitude bounds (non-negative).
    pub theta_dot_3: S,
    pub theta_dot_4: S,
}

impl<S: Real> ThetaSet<S> {
    pub fn new(terms: &FimTerms<S>, beta1: f64) -> Self {
        let entries = [0, 1, 2, 3].map(|e| EntryBound::new(terms, e, beta1));
        let [d1, o12, o21, d2] = entries;
        Self {
            entries,
            theta: d1.linear + d2.linear,
            theta_dot: d1.cross + d1.dist_up + d2.cross + d2.dist_up,
            theta_1: d1.linear,
            theta_2: d2.linear,
            theta_3: o12.linear,
            theta_4: o21.linear,
            theta_dot_1: d1.dist_lo - d1.cross,
            theta_dot_2: d2.dist_lo - d2.cross,
            theta_dot_3: o12.spread(),
            theta_dot_4: o21.spread(),
        }
    }

    pub fn c(&self, e: usize) -> S {
        self.entries[e].c
    }

    /// Upper bound on `F11 + F22`.
    pub fn trace_upper(&self, eps: f64) -> S {
        self.c(0) + self.c(3) + self.theta.scale(eps) + self.theta_dot.scale(eps * eps)
    }

    /// `gamma` times the coefficients of `L11 L22 - U12 U21` in powers of `eps`.
    pub fn g_coefficients(&self, gamma: f64) -> [S; 5] {
        let (c11, c22) = (self.c(0), self.c(3));
        let (c12, c21) = (self.c(1).abs(), self.c(2).abs());
        let (t1, t2, t3, t4) = (self.theta_1, self.theta_2, self.theta_3, self.theta_4);
        let (d1, d2, d3, d4) = (
            self.theta_dot_1,
            self.theta_dot_2,
            self.theta_dot_3,
            self.theta_dot_4,
        );
        [
            c11 * c22 - c12 * c21,
            -(c11 * t2 + c22 * t1) - (c12 * t4 + c21 * t3),
            c11 * d2 + c22 * d1 + t1 * t2 - (c12 * d4 + c21 * d3 + t3 * t4),
            -(t1 * d2 + t2 * d1) - (t3 * d4 + t4 * d3),
            d1 * d2 - d3 * d4,
        ]
        .map(|x| x.scale(gamma))
    }
}

pub fn theta_sets<S: Real>(
    channels: &ChannelSet<S>,
    w: &[crate::numerics::Mat<S>],
    noise: f64,
    beta1: f64,
) -> Vec<ThetaSet<S>> {
    fim_terms(channels, w, noise)
        .iter()
        .map(|t| ThetaSet::new(t, beta1))
        .collect()
}

pub fn theta_set(
    channels: &ChannelSet,
    sol: &Solution,
    budget: &LinkBudget,
    beta1: f64,
) -> Vec<ThetaSet> {
    theta_sets(channels, &sol.w, budget.noise_sap, beta1)
}

/// `(lower, upper)` bounds of entry `(n1, n2)` over the disk of radius `eps`.
pub fn fim_bounds(entry: (usize, usize), eps: f64, thetas: &ThetaSet) -> (f64, f64) {
    let e = &thetas.entries[crate::sensing::entry_index(entry.0, entry.1)];
    (e.lower(eps), e.upper(eps))
}

/// Lower bound on `F11 F22` and upper bound on `|F12 F21|`.
pub fn product_bounds<S: Real>(eps: f64, thetas: &ThetaSet<S>) -> (S, S) {
    let [d1, o12, o21, d2] = &thetas.entries;
    let (l1, l2) = (d1.lower(eps), d2.lower(eps));
    let diag = if l1.value() > 0.0 && l2.value() > 0.0 {
        l1 * l2
    } else {
        S::zero()
    };
    (diag, o12.magnitude(eps) * o21.magnitude(eps))
}

fn poly<S: Real>(coef: &[S; 5], eps: f64) -> S {
    coef.iter()
        .rev()
        .fold(S::zero(), |acc, &c| acc.scale(eps) + c)
}

/// `gamma (L11 L22 - U12 U21)` as a quartic in `eps`.
pub fn g<S: Real>(eps: f64, thetas: &ThetaSet<S>, gamma: f64) -> S {
    poly(&thetas.g_coefficients(gamma), eps)
}

/// [`g`] with its cubic and quartic terms replaced by tangents at `eps0`.
pub fn g_sca<S: Real>(eps: f64, eps0: f64, thetas: &ThetaSet<S>, gamma: f64) -> S {
    let [g0, g1, g2, g3, g4] = thetas.g_coefficients(gamma);
    let cube = eps0.powi(3) + 3.0 * eps0 * eps0 * (eps - eps0);
    let quart = eps0.powi(4) + 4.0 * eps0.powi(3) * (eps - eps0);
    g0 + g1.scale(eps) + g2.scale(eps * eps) + g3.scale(cube) + g4.scale(quart)
}

/// Tangent surrogate that keeps negative cubic and quartic terms exact, so
/// it never exceeds [`g`] and stays tangent at `eps0`.
pub fn g_sca_inner<S: Real>(eps: f64, eps0: f64, thetas: &ThetaSet<S>, gamma: f64) -> S {
    let [g0, g1, g2, g3, g4] = thetas.g_coefficients(gamma);
    let cube = |c: S| {
        if c.value() > 0.0 {
            c.scale(eps0.powi(3) + 3.0 * eps0 * eps0 * (eps - eps0))
        } else {
            c.scale(eps.powi(3))
        }
    };
    let quart = |c: S| {
        if c.value() > 0.0 {
            c.scale(eps0.powi(4) + 4.0 * eps0.powi(3) * (eps - eps0))
        } else {
            c.scale(eps.powi(4))
        }
    };
    g0 + g1.scale(eps) + g2.scale(eps * eps) + cube(g3) + quart(g4)
}

/// Which tangent surrogate the radius solve iterates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Surrogate {
    /// Both higher-order terms linearised regardless of sign.
    Printed,
    /// Only terms whose tangent under-estimates them are linearised.
    #[default]
    Inner,
}

impl Surrogate {
    fn eval(self, eps: f64, eps0: f64, t: &ThetaSet, gamma: f64) -> f64 {
        match self {
            Surrogate::Printed => g_sca(eps, eps0, t, gamma),
            Surrogate::Inner => g_sca_inner(eps, eps0, t, gamma),
        }
    }
}

/// Whether both diagonal lower bounds stay non-negative, which the product
/// bound needs.
fn diagonal_bounds_valid<S: Real>(eps: f64, thetas: &ThetaSet<S>) -> bool {
    thetas.entries[0].lower(eps).value() >= 0.0 && thetas.entries[3].lower(eps).value() >= 0.0
}

/// Upper bound on `Tr(CRLB)` over the disk, infinite when the determinant
/// bound is not positive.
pub fn worst_case_crlb(eps: f64, thetas: &ThetaSet) -> f64 {
    let (diag, off) = product_bounds(eps, thetas);
    let det = diag - off;
    if det > 0.0 {
        thetas.trace_upper(eps) / det
    } else {
        f64::INFINITY
    }
}

/// Normalised margin `(gamma det_lower - trace_upper) / trace_upper`; the
/// worst-case requirement holds iff it is non-negative.
pub fn crlb_slack<S: Real>(eps: f64, thetas: &ThetaSet<S>, gamma: f64) -> S {
    let (diag, off) = product_bounds(eps, thetas);
    let lhs = thetas.trace_upper(eps);
    ((diag - off).scale(gamma) - lhs) / lhs
}

/// Sum of constraint violations over all sAPs.
pub fn crlb_violation(eps: f64, thetas: &[ThetaSet], gamma: f64) -> f64 {
    thetas
        .iter()
        .map(|t| (-crlb_slack(eps, t, gamma)).max(0.0))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub lower: f64,
    pub upper: f64,
    pub eps_init: f64,
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub surrogate: Surrogate,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 0.5,
            eps_init: 0.05,
            grid: 2001,
            tol: 1e-6,
            max_iter: 50,
            surrogate: Surrogate::Inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub epsilon: f64,
    pub objective: f64,
    /// Smallest surrogate constraint margin over the sAPs.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSolve {
    pub epsilon_0: f64,
    pub epsilon_star: f64,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
    pub feasible: bool,
}

/// Surrogate margin `g_sca - trace_upper` of the worst sAP, or `None` when a
/// diagonal lower bound turns negative.
fn surrogate_margin(
    form: Surrogate,
    eps: f64,
    eps0: f64,
    thetas: &[ThetaSet],
    gamma: f64,
) -> Option<f64> {
    thetas
        .iter()
        .map(|t| {
            diagonal_bounds_valid(eps, t)
                .then(|| form.eval(eps, eps0, t, gamma) - t.trace_upper(eps))
        })
        .try_fold(f64::INFINITY, |m, s| s.map(|s| m.min(s)))
}

/// Margin of the original quartic constraint, as [`surrogate_margin`].
pub fn constraint_margin(eps: f64, thetas: &[ThetaSet], gamma: f64) -> Option<f64> {
    thetas
        .iter()
        .map(|t| diagonal_bounds_valid(eps, t).then(|| g(eps, t, gamma) - t.trace_upper(eps)))
        .try_fold(f64::INFINITY, |m, s| s.map(|s| m.min(s)))
}

/// Maximise `objective(eps)` on `[lower, upper]` subject to the worst-case
/// constraint of every sAP, by successive tangent surrogates of the quartic.
/// Each surrogate problem is solved by a dense grid followed by refinement
/// toward the constraint boundary or golden-section search.
pub fn solve_epsilon(
    thetas: &[ThetaSet],
    gamma: f64,
    objective: impl Fn(f64) -> f64,
    options: &SolveOptions,
) -> EpsilonSolve {
    let SolveOptions {
        lower, upper, grid, ..
    } = *options;
    let grid = grid.max(2);
    let step = (upper - lower) / (grid - 1) as f64;
    let mut eps0 = options.eps_init.clamp(lower, upper);
    let mut out = EpsilonSolve {
        epsilon_0: eps0,
        epsilon_star: lower,
        iterations: 0,
        history: Vec::new(),
        feasible: false,
    };
    for iter in 0..options.max_iter {
        let ok = |e: f64| {
            surrogate_margin(options.surrogate, e, eps0, thetas, gamma).is_some_and(|m| m >= 0.0)
        };
        let best = (0..grid)
            .map(|i| lower + step * i as f64)
            .filter(|&e| ok(e))
            .map(|e| (e, objective(e)))
            .fold(None, |best: Option<(f64, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((e_grid, _)) = best else {
            out.feasible = false;
            out.epsilon_star = lower;
            out.iterations = iter + 1;
            return out;
        };
        let eps = refine(e_grid, step, lower, upper, &ok, &objective);
        let slack = surrogate_margin(options.surrogate, eps, eps0, thetas, gamma)
            .unwrap_or(f64::NEG_INFINITY);
        out.history.push(HistoryEntry {
            epsilon: eps,
            objective: objective(eps),
            slack,
        });
        out.iterations = iter + 1;
        out.epsilon_star = eps;
        out.feasible = true;
        out.epsilon_0 = eps0;
        if (eps - eps0).abs() < options.tol {
            break;
        }
        eps0 = eps;
    }
    out
}

fn refine(
    e: f64,
    step: f64,
    lower: f64,
    upper: f64,
    ok: &impl Fn(f64) -> bool,
    objective: &impl Fn(f64) -> f64,
) -> f64 {
    let (left, right) = ((e - step).max(lower), (e + step).min(upper));
    let f = |x: f64| objective(x);
    // boundary case: push toward the infeasible neighbour if it is better
    for nb in [left, right] {
        if nb != e && !ok(nb) && f(nb) > f(e) {
            let (mut good, mut bad) = (e, nb);
            for _ in 0..60 {
                let mid = 0.5 * (good + bad);
                if ok(mid) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return if f(good) >= f(e) { good } else { e };
        }
    }
    if !(ok(left) && ok(right)) {
        return e;
    }
    // interior case: golden section on the bracket
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (left, right);
    for _ in 0..80 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if f(x1) >= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let x = 0.5 * (a + b);
    if ok(x) && f(x) >= f(e) {
        x
    } else {
        e
    }
}

/// Coefficient vector on the disk boundary with a common phase.
pub fn boundary_coefficients(taps: usize, eps: f64, phase: f64) -> Vec<Complex64> {
    vec![Complex64::from_polar(eps, phase); taps]
}

/// Convenience: thetas for a solution, failing on missing derivative data.
pub fn thetas_for(
    channels: &ChannelSet,
    sol: &Solution,
    budget: &LinkBudget,
    beta1: f64,
) -> Result<Vec<ThetaSet>> {
    if channels.derivs.is_empty() {
        return Err(crate::Error::InvalidArgument(
            "channel set has no sensing derivatives".into(),
        ));
    }
    Ok(theta_set(channels, sol, budget, beta1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::numerics::{complex_normal, fd_gradient, rng, CMatrix, SimRng};
    use crate::sensing::ENTRIES;
    use rand::Rng;
    use std::f64::consts::PI;

    struct Case {
        terms: Vec<FimTerms>,
        thetas: Vec<ThetaSet>,
        w: Vec<CMatrix>,
        channels: ChannelSet,
        noise: f64,
    }

    fn case(seed: u64, power: f64) -> Case {
        let cfg = SystemConfig::default();
        let ch = cfg
            .scenario(seed)
            .unwrap()
            .channels(&cfg.spread_layout().unwrap())
            .unwrap();
        let mut r = rng(seed, 99);
        let w: Vec<CMatrix> = (0..2)
            .map(|_| {
                let m = CMatrix::from_fn(4, 2, |_, _| complex_normal(&mut r, 1.0));
                m.scale(Complex64::new((power / m.frob_norm_sqr()).sqrt(), 0.0))
            })
            .collect();
        let noise = cfg.noise_w();
        let terms = fim_terms(&ch, &w, noise);
        let thetas = terms.iter().map(|t| ThetaSet::new(t, 1.0)).collect();
        Case {
            terms,
            thetas,
            w,
            channels: ch,
            noise,
        }
    }

    fn in_disk(r: &mut SimRng, eps: f64) -> Vec<Complex64> {
        (0..2)
            .map(|_| Complex64::from_polar(eps * r.gen::<f64>().sqrt(), r.gen_range(0.0..2.0 * PI)))
            .collect()
    }

    #[test]
    fn zero_beamformer_gives_zero_aggregates() {
        let mut c = case(1, 1.0);
        c.w.iter_mut().for_each(|w| *w = CMatrix::zeros(4, 2));
        for t in theta_sets(&c.channels, &c.w, c.noise, 1.0) {
            assert_eq!(t.theta, 0.0);
            assert_eq!(t.theta_dot, 0.0);
            assert!(t.entries.iter().all(|e| e.c == 0.0 && e.cross == 0.0));
        }
    }

    #[test]
    fn aggregates_scale_with_power_of_their_degree() {
        let c = case(2, 1.0);
        let s: f64 = 1.7;
        let scaled: Vec<CMatrix> =
            c.w.iter()
                .map(|w| w.scale(Complex64::from_polar(s, 0.4)))
                .collect();
        let t2 = theta_sets(&c.channels, &scaled, c.noise, 1.0);
        for (a, b) in c.thetas.iter().zip(&t2) {
            for (x, y) in a.entries.iter().zip(&b.entries) {
                let close = |u: f64, v: f64, p: i32| {
                    (u * s.powi(p) - v).abs() <= 1e-9 * v.abs().max(1e-300)
                };
                assert!(close(x.c, y.c, 2));
                assert!(close(x.linear, y.linear, 4));
                assert!(close(x.cross, y.cross, 6));
                assert!(close(x.dist_up, y.dist_up, 6));
            }
            assert!(a.theta >= a.theta_1 + a.theta_2 - 1e-12 * a.theta);
            assert!(a.theta_dot_3 >= 0.0 && a.theta_dot_4 >= 0.0);
            assert!(a.theta_dot_1 <= 0.0 && a.theta_dot_2 <= 0.0);
        }
    }

    #[test]
    fn entry_bounds_collapse_at_zero_radius_and_widen() {
        let c = case(3, 1.0);
        let t = &c.thetas[0];
        for (n1, n2) in ENTRIES {
            let (lo, hi) = fim_bounds((n1, n2), 0.0, t);
            assert_eq!(lo, hi);
            let mut prev = (lo, hi);
            for i in 1..=50 {
                let b = fim_bounds((n1, n2), 0.01 * i as f64, t);
                assert!(b.0 <= prev.0 && b.1 >= prev.1);
                prev = b;
            }
        }
        let (diag, off) = product_bounds(0.0, t);
        assert!((diag - t.c(0) * t.c(3)).abs() <= 1e-12 * diag);
        assert!((off - t.c(1).abs() * t.c(2).abs()).abs() <= 1e-12 * diag);
    }

    #[test]
    fn bounds_sandwich_expected_entries() {
        for seed in 0..5 {
            let c = case(seed, 1.0);
            let mut r = rng(seed, 5);
            let eps = r.gen_range(0.05..0.3);
            for (terms, t) in c.terms.iter().zip(&c.thetas) {
                let (diag, off) = product_bounds(eps, t);
                for _ in 0..1000 {
                    let b3 = in_disk(&mut r, eps);
                    let f: Vec<f64> = (0..4).map(|e| terms.entry(e, 1.0, &b3)).collect();
                    for (e, &(n1, n2)) in ENTRIES.iter().enumerate() {
                        let (lo, hi) = fim_bounds((n1, n2), eps, t);
                        let tol = 1e-9 * t.c(0).abs();
                        assert!(lo <= f[e] + tol && f[e] <= hi + tol);
                    }
                    let tol = 1e-9 * t.c(0) * t.c(3);
                    assert!(diag <= f[0] * f[3] + tol);
                    assert!(off + tol >= (f[1] * f[2]).abs());
                    let m = crate::sensing::FimMatrix {
                        entries: terms.matrix(1.0, &b3),
                        sap: 0,
                    };
                    if let Ok(tr) = crate::sensing::crlb_trace(&m) {
                        assert!(tr <= worst_case_crlb(eps, t) * (1.0 + 1e-9));
                    }
                }
            }
        }
    }

    #[test]
    fn surrogate_is_tangent() {
        for seed in 0..20 {
            let c = case(seed, 1.0);
            let mut r = rng(seed, 6);
            let t = &c.thetas[0];
            let gamma = 0.05;
            let e0 = r.gen_range(0.0..0.5);
            let gv = g(e0, t, gamma);
            assert!(
                (g_sca(e0, e0, t, gamma) - gv).abs()
                    <= 1e-12 * gv.abs().max(t.c(0) * t.c(3) * gamma)
            );
            let h = 1e-5;
            let slope = (g_sca(e0 + h, e0, t, gamma) - g_sca(e0 - h, e0, t, gamma)) / (2.0 * h);
            let fd = fd_gradient(|x| g(x[0], t, gamma), &[e0], h).unwrap()[0];
            assert!((slope - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            let inner = g_sca_inner(e0, e0, t, gamma);
            assert!((inner - gv).abs() <= 1e-12 * gv.abs().max(t.c(0) * t.c(3) * gamma));
            let inner_slope =
                (g_sca_inner(e0 + h, e0, t, gamma) - g_sca_inner(e0 - h, e0, t, gamma)) / (2.0 * h);
            assert!((inner_slope - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            for i in 0..=50 {
                let e = 0.01 * i as f64;
                assert!(g_sca_inner(e, e0, t, gamma) <= g(e, t, gamma) + 1e-12 * gv.abs().max(1.0));
            }
            let [g0, g1, g2, _, _] = t.g_coefficients(gamma);
            let e = r.gen_range(0.0..0.5);
            let reduced = g0 + g1 * e + g2 * e * e;
            assert!(
                (g_sca(e, 0.0, t, gamma) - reduced).abs() <= 1e-12 * reduced.abs().max(g0.abs())
            );
        }
    }

    #[test]
    fn inactive_constraint_and_decreasing_objective_give_lower_end() {
        let c = case(7, 1.0);
        let s = solve_epsilon(&c.thetas, 1e9, |e| -e, &SolveOptions::default());
        assert!(s.feasible);
        assert_eq!(s.epsilon_star, 0.0);
    }

    #[test]
    fn unreachable_threshold_is_flagged() {
        let c = case(8, 1e-6);
        let s = solve_epsilon(&c.thetas, 1e-12, |e| e, &SolveOptions::default());
        assert!(!s.feasible);
        assert_eq!(s.epsilon_star, 0.0);
    }

    #[test]
    fn solve_is_deterministic() {
        let c = case(9, 1.0);
        let gamma = worst_case_crlb(0.2, &c.thetas[0]).max(worst_case_crlb(0.2, &c.thetas[1]));
        let a = solve_epsilon(&c.thetas, gamma, |e| e, &SolveOptions::default());
        let b = solve_epsilon(&c.thetas, gamma, |e| e, &SolveOptions::default());
        assert_eq!(a, b);
    }
}
