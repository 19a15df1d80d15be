//! Downlink SINDR, sum rate and the quadratic-transform quantities used by
//! the alternating optimizer, plus the worst-case lower bound on the
//! transformed objective when only `|beta3| <= eps` is known.

use std::f64::consts::{LN_2, PI};

use num_complex::{Complex, Complex64};

use crate::geometry::{ChannelSet, MaLayout};
use crate::numerics::{cabs, cscale, cst, inner, CMatrix, CVec, Cx, Mat, Real};
use crate::pa::{cubic_moment, gram_diag, BussgangModel, PaParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// UE receiver noise power in watts.
    pub noise_ue: f64,
    /// sAP receiver noise power in watts.
    pub noise_sap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// `w[a]` is `N_T x K`.
    pub w: Vec<CMatrix>,
    pub layout: MaLayout,
    pub mu: Vec<f64>,
    pub zeta: Vec<Complex64>,
    pub kappa: f64,
}

impl Solution {
    pub fn new(w: Vec<CMatrix>, layout: MaLayout) -> Self {
        let k = w.first().map_or(0, |m| m.cols());
        Self {
            w,
            layout,
            mu: vec![0.0; k],
            zeta: vec![Complex64::new(0.0, 0.0); k],
            kappa: 0.0,
        }
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }

    pub fn power_feasible(&self, p_max: f64) -> bool {
        self.w
            .iter()
            .all(|w| w.frob_norm_sqr() <= p_max * (1.0 + 1e-12))
    }
}

/// Scale `w` radially onto the ball `||w||_F^2 <= p_max`.
pub fn project_power<S: Real>(w: &Mat<S>, p_max: f64) -> Mat<S> {
    let norm = w.frob_norm();
    if norm.value() <= p_max.sqrt() {
        return w.clone();
    }
    let s = S::from_f64(p_max.sqrt()) / norm;
    w.map(|z| cscale(z, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateUnit {
    Bits,
    Nats,
}

impl RateUnit {
    fn log1p<S: Real>(self, x: S) -> S {
        let l = (S::one() + x).ln();
        match self {
            RateUnit::Nats => l,
            RateUnit::Bits => l.scale(1.0 / LN_2),
        }
    }
}

/// Effective gains `gain[k][j] = sum_a h_{a,k}^H Xi_a w_{a,j}` and the
/// distortion power `distortion[k] = sum_a h_{a,k}^H Xi_hat_a h_{a,k}`.
#[derive(Debug, Clone)]
pub struct LinkTerms<S = f64> {
    pub gain: Vec<CVec<S>>,
    pub distortion: Vec<S>,
}

impl<S: Real> LinkTerms<S> {
    pub fn new(comm: &[Vec<CVec<S>>], w: &[Mat<S>], bm: &BussgangModel<S>) -> Self {
        let users = w.first().map_or(0, |m| m.cols());
        let zero = Complex::new(S::zero(), S::zero());
        let mut gain = vec![vec![zero; users]; users];
        let mut distortion = vec![S::zero(); users];
        for (a, wa) in w.iter().enumerate() {
            for (k, h) in comm[a].iter().enumerate() {
                let hx: CVec<S> = h
                    .iter()
                    .zip(&bm.gain[a])
                    .map(|(hi, g)| hi.conj() * *g)
                    .collect();
                for (j, g) in gain[k].iter_mut().enumerate() {
                    let col = (0..wa.rows()).fold(zero, |acc, m| acc + hx[m] * wa[(m, j)]);
                    *g = *g + col;
                }
                let q = &bm.distortion[a];
                if q.frob_norm_sqr().value() > 0.0 {
                    distortion[k] = distortion[k] + inner(h, &q.apply(h)).re;
                }
            }
        }
        Self { gain, distortion }
    }

    pub fn users(&self) -> usize {
        self.gain.len()
    }

    /// `Psi_k`: total received power at UE `k` including noise.
    pub fn psi(&self, k: usize, noise: f64) -> S {
        let total = self.gain[k]
            .iter()
            .fold(S::zero(), |acc, g| acc + g.norm_sqr());
        total + self.distortion[k] + S::from_f64(noise)
    }

    pub fn sindr(&self, k: usize, noise: f64) -> S {
        let rest = self.gain[k]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .fold(S::zero(), |acc, (_, g)| acc + g.norm_sqr());
        self.gain[k][k].norm_sqr() / (rest + self.distortion[k] + S::from_f64(noise))
    }

    pub fn sum_rate(&self, noise: f64, unit: RateUnit) -> S {
        (0..self.users()).fold(S::zero(), |acc, k| acc + unit.log1p(self.sindr(k, noise)))
    }

    pub fn zeta_star(&self, k: usize, mu: S, noise: f64) -> Cx<S> {
        cscale(self.gain[k][k], (S::one() + mu).sqrt() / self.psi(k, noise))
    }

    /// Quadratic-transform objective without the noise and log terms.
    pub fn delta(&self, mu: &[S], zeta: &[Cx<S>]) -> S {
        (0..self.users()).fold(S::zero(), |acc, k| {
            let desired = (zeta[k].conj() * self.gain[k][k]).re * (S::one() + mu[k]).sqrt();
            let spread = self.psi(k, 0.0);
            acc + desired.scale(2.0) - zeta[k].norm_sqr() * spread
        })
    }

    /// Full transformed objective `sum_k (log(1+mu) - mu - |zeta|^2 sigma^2) + delta`.
    pub fn fp_objective(&self, mu: &[S], zeta: &[Cx<S>], noise: f64, unit: RateUnit) -> S {
        let aux = (0..self.users()).fold(S::zero(), |acc, k| {
            acc + unit.log1p(mu[k]) - mu[k] - zeta[k].norm_sqr().scale(noise)
        });
        aux + self.delta(mu, zeta)
    }

    /// The un-transformed fractional term of the log-dual objective.
    pub fn log_dual_objective(&self, mu: &[S], noise: f64, unit: RateUnit) -> S {
        (0..self.users()).fold(S::zero(), |acc, k| {
            let frac = (S::one() + mu[k]) * self.gain[k][k].norm_sqr() / self.psi(k, noise);
            acc + unit.log1p(mu[k]) - mu[k] + frac
        })
    }
}

/// Communication quantities that are linear or quadratic in `beta3`.
///
/// `gain[k][j] = nominal[k][j] + sum_a beta3_a cubic[k][j][a]` and the
/// distortion power is `sum_a 2 |beta3_a|^2 qform[k][a]`.
#[derive(Debug, Clone)]
pub struct RobustTerms<S = f64> {
    pub nominal: Vec<CVec<S>>,
    pub cubic: Vec<Vec<CVec<S>>>,
    pub qform: Vec<Vec<S>>,
}

/// How the interference power is bounded over the uncertainty disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterferenceBound {
    /// `|n|^2 + eps^2 |sum_a c_a|^2`: drops the cross term, not a valid bound
    /// for every coefficient in the disk.
    Printed,
    /// `(|n| + eps sum_a |c_a|)^2`: valid everywhere in the disk.
    #[default]
    Triangle,
}

impl<S: Real> RobustTerms<S> {
    pub fn new(comm: &[Vec<CVec<S>>], w: &[Mat<S>], beta1: f64) -> Self {
        let taps = w.len();
        let users = w.first().map_or(0, |m| m.cols());
        let zero = Complex::new(S::zero(), S::zero());
        let mut nominal = vec![vec![zero; users]; users];
        let mut cubic = vec![vec![vec![zero; taps]; users]; users];
        let mut qform = vec![vec![S::zero(); taps]; users];
        for (a, wa) in w.iter().enumerate() {
            let power = gram_diag(wa);
            let q = cubic_moment(wa);
            for (k, h) in comm[a].iter().enumerate() {
                for j in 0..users {
                    let (mut lin, mut cub) = (zero, zero);
                    for m in 0..wa.rows() {
                        let t = h[m].conj() * wa[(m, j)];
                        lin = lin + t;
                        cub = cub + cscale(t, power[m]);
                    }
                    nominal[k][j] = nominal[k][j] + lin.scale(S::from_f64(beta1));
                    cubic[k][j][a] = cub.scale(S::from_f64(2.0));
                }
                qform[k][a] = inner(h, &q.apply(h)).re;
            }
        }
        Self {
            nominal,
            cubic,
            qform,
        }
    }

    pub fn users(&self) -> usize {
        self.nominal.len()
    }

    /// Exact link terms for a specific coefficient vector.
    pub fn link_terms(&self, beta3: &[Complex64]) -> LinkTerms<S> {
        let b: Vec<Cx<S>> = beta3.iter().map(|&z| cst(z)).collect();
        let gain = self
            .nominal
            .iter()
            .zip(&self.cubic)
            .map(|(row, crow)| {
                row.iter()
                    .zip(crow)
                    .map(|(&n, c)| c.iter().zip(&b).fold(n, |acc, (ci, bi)| acc + *ci * *bi))
                    .collect()
            })
            .collect();
        let distortion = self
            .qform
            .iter()
            .map(|q| {
                q.iter().zip(beta3).fold(S::zero(), |acc, (&qa, b3)| {
                    acc + qa.scale(2.0 * b3.norm_sqr())
                })
            })
            .collect();
        LinkTerms { gain, distortion }
    }

    fn debit(&self, k: usize, j: usize) -> S {
        self.cubic[k][j]
            .iter()
            .fold(S::zero(), |acc, &c| acc + cabs(c))
    }

    fn interference_bound(&self, k: usize, j: usize, eps: f64, form: InterferenceBound) -> S {
        let n = self.nominal[k][j];
        match form {
            InterferenceBound::Printed => {
                let sum = self.cubic[k][j]
                    .iter()
                    .fold(Complex::new(S::zero(), S::zero()), |acc, &c| acc + c);
                n.norm_sqr() + sum.norm_sqr().scale(eps * eps)
            }
            InterferenceBound::Triangle => {
                let t = cabs(n) + self.debit(k, j).scale(eps);
                t * t
            }
        }
    }

    /// Upper bound on everything UE `k` receives besides noise.
    fn spread_bound(&self, k: usize, eps: f64, form: InterferenceBound) -> S {
        self.interference_bound(k, k, eps, form) + self.leakage_bound(k, eps, form)
    }

    /// Upper bound on the interference from other users plus distortion.
    fn leakage_bound(&self, k: usize, eps: f64, form: InterferenceBound) -> S {
        let interference = (0..self.users())
            .filter(|&j| j != k)
            .fold(S::zero(), |acc, j| {
                acc + self.interference_bound(k, j, eps, form)
            });
        interference + S::sum(&self.qform[k]).scale(2.0 * eps * eps)
    }

    /// Lower bound on `delta` over every `|beta3_a| <= eps`.
    pub fn lower_bound(&self, eps: f64, mu: &[S], zeta: &[Cx<S>], form: InterferenceBound) -> S {
        (0..self.users()).fold(S::zero(), |acc, k| {
            let nominal = (zeta[k].conj() * self.nominal[k][k]).re;
            let debit = cabs(zeta[k]) * self.debit(k, k).scale(eps);
            let desired = (nominal - debit) * (S::one() + mu[k]).sqrt();
            acc + desired.scale(2.0) - zeta[k].norm_sqr() * self.spread_bound(k, eps, form)
        })
    }

    /// Guaranteed useful amplitude at UE `k` and the bounded received power
    /// beyond it, noise included.
    fn worst_case(&self, k: usize, eps: f64, noise: f64, form: InterferenceBound) -> (S, S) {
        let n = cabs(self.nominal[k][k]);
        let slack = self.debit(k, k).scale(eps);
        let amp = (n - slack).relu();
        // own-stream bound minus amp^2, expanded to avoid cancellation
        let excess = match form {
            InterferenceBound::Triangle if amp.value() > 0.0 => (n * slack).scale(4.0),
            _ => self.interference_bound(k, k, eps, form) - amp * amp,
        };
        let rest = excess + self.leakage_bound(k, eps, form) + S::from_f64(noise);
        (amp, rest)
    }

    pub fn worst_case_sindr(&self, k: usize, eps: f64, noise: f64, form: InterferenceBound) -> S {
        let (amp, rest) = self.worst_case(k, eps, noise, form);
        amp * amp / rest
    }

    /// Maximiser of the transformed worst-case objective over `(mu, zeta)`.
    pub fn robust_aux(&self, eps: f64, noise: f64, form: InterferenceBound) -> (Vec<S>, CVec<S>) {
        (0..self.users())
            .map(|k| {
                let (amp, rest) = self.worst_case(k, eps, noise, form);
                let signal = amp * amp;
                let psi = rest + signal;
                let mu = signal / rest;
                let n = self.nominal[k][k];
                let mag = cabs(n);
                let zeta = if mag.value() > 0.0 {
                    cscale(n, (S::one() + mu).sqrt() * amp / (psi * mag))
                } else {
                    Complex::new(S::zero(), S::zero())
                };
                (mu, zeta)
            })
            .unzip()
    }

    /// Worst-case objective at fixed auxiliaries, in `unit` for the log terms.
    pub fn robust_objective(
        &self,
        eps: f64,
        mu: &[S],
        zeta: &[Cx<S>],
        noise: f64,
        form: InterferenceBound,
        unit: RateUnit,
    ) -> S {
        let aux = (0..self.users()).fold(S::zero(), |acc, k| {
            acc + unit.log1p(mu[k]) - mu[k] - zeta[k].norm_sqr().scale(noise)
        });
        aux + self.lower_bound(eps, mu, zeta, form)
    }

    /// Sum of `log(1 + worst-case SINDR)`.
    pub fn worst_case_rate(
        &self,
        eps: f64,
        noise: f64,
        form: InterferenceBound,
        unit: RateUnit,
    ) -> S {
        (0..self.users()).fold(S::zero(), |acc, k| {
            acc + unit.log1p(self.worst_case_sindr(k, eps, noise, form))
        })
    }
}

impl RobustTerms<f64> {
    /// Lowest sum rate (bits) over a common-phase grid at `|beta3_a| = eps`.
    pub fn adversarial_rate(&self, eps: f64, noise: f64, phases: usize) -> (f64, f64) {
        let taps = self.qform.first().map_or(0, |q| q.len());
        (0..phases.max(1))
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / phases.max(1) as f64;
                let b3 = vec![Complex64::from_polar(eps, theta); taps];
                (self.link_terms(&b3).sum_rate(noise, RateUnit::Bits), theta)
            })
            .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
    }

    /// Lowest sum rate (bits) found over the disk `|beta3_a| <= eps`.
    ///
    /// Starts from the worst common phase on a `phases`-point grid, then runs
    /// per-tAP coordinate descent over the grid at radii `0`, `eps/2`, `eps`.
    pub fn disk_worst_rate(&self, eps: f64, noise: f64, phases: usize) -> (f64, Vec<Complex64>) {
        let taps = self.qform.first().map_or(0, |q| q.len());
        let phases = phases.max(1);
        let rate = |b3: &[Complex64]| self.link_terms(b3).sum_rate(noise, RateUnit::Bits);
        let ring = |r: f64| {
            (0..phases).map(move |i| Complex64::from_polar(r, 2.0 * PI * i as f64 / phases as f64))
        };
        let mut best = ring(eps)
            .map(|c| {
                let b3 = vec![c; taps];
                (rate(&b3), b3)
            })
            .fold((f64::INFINITY, Vec::new()), |acc, cur| {
                if cur.0 < acc.0 {
                    cur
                } else {
                    acc
                }
            });
        let candidates: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0))
            .chain(ring(0.5 * eps))
            .chain(ring(eps))
            .collect();
        for _ in 0..ADVERSARY_SWEEPS {
            let mut improved = false;
            for a in 0..taps {
                for &c in &candidates {
                    let mut b3 = best.1.clone();
                    b3[a] = c;
                    let r = rate(&b3);
                    if r < best.0 - 1e-12 * best.0.abs() {
                        best = (r, b3);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best
    }
}

/// Coordinate-descent passes of the adversarial coefficient search.
const ADVERSARY_SWEEPS: usize = 20;

pub fn sindr(
    k: usize,
    channels: &ChannelSet,
    bm: &BussgangModel,
    sol: &Solution,
    budget: &LinkBudget,
) -> f64 {
    LinkTerms::new(&channels.comm, &sol.w, bm).sindr(k, budget.noise_ue)
}

pub fn sum_rate(
    channels: &ChannelSet,
    bm: &BussgangModel,
    sol: &Solution,
    budget: &LinkBudget,
) -> f64 {
    LinkTerms::new(&channels.comm, &sol.w, bm).sum_rate(budget.noise_ue, RateUnit::Bits)
}

pub fn mu_star(
    k: usize,
    channels: &ChannelSet,
    bm: &BussgangModel,
    sol: &Solution,
    budget: &LinkBudget,
) -> f64 {
    sindr(k, channels, bm, sol, budget)
}

pub fn zeta_star(
    k: usize,
    channels: &ChannelSet,
    bm: &BussgangModel,
    sol: &Solution,
    budget: &LinkBudget,
) -> Complex64 {
    LinkTerms::new(&channels.comm, &sol.w, bm).zeta_star(k, sol.mu[k], budget.noise_ue)
}

pub fn delta(channels: &ChannelSet, bm: &BussgangModel, sol: &Solution) -> f64 {
    LinkTerms::new(&channels.comm, &sol.w, bm).delta(&sol.mu, &sol.zeta)
}

pub fn delta_robust_lower(
    channels: &ChannelSet,
    sol: &Solution,
    params: &PaParams,
    form: InterferenceBound,
) -> f64 {
    RobustTerms::new(&channels.comm, &sol.w, params.beta1).lower_bound(
        params.epsilon,
        &sol.mu,
        &sol.zeta,
        form,
    )
}

/// Lift an `f64` channel set into another scalar type as constants.
pub fn lift_comm<S: Real>(comm: &[Vec<Vec<Complex64>>]) -> Vec<Vec<CVec<S>>> {
    comm.iter()
        .map(|row| {
            row.iter()
                .map(|h| h.iter().map(|&z| cst(z)).collect())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;
    use crate::numerics::{complex_normal, rng, SimRng};
    use rand::Rng;

    pub(crate) struct Instance {
        pub channels: ChannelSet,
        pub w: Vec<CMatrix>,
    }

    fn layout(taps: usize, n: usize) -> MaLayout {
        let b = Interval { lo: -2.0, hi: 2.0 };
        MaLayout::spread(taps, n, 1, 2, b, b, 0.5).unwrap()
    }

    fn instance(r: &mut SimRng, taps: usize, n: usize, users: usize) -> Instance {
        let amp = 10f64.powf(r.gen_range(-5.0..-3.0));
        let comm = (0..taps)
            .map(|_| {
                (0..users)
                    .map(|_| (0..n).map(|_| complex_normal(r, amp * amp)).collect())
                    .collect()
            })
            .collect();
        let p = r.gen_range(0.2..2.0);
        let w = (0..taps)
            .map(|_| {
                let m = CMatrix::from_fn(n, users, |_, _| complex_normal(r, 1.0));
                let s = (p / m.frob_norm_sqr()).sqrt();
                m.scale(Complex64::new(s, 0.0))
            })
            .collect();
        Instance {
            channels: ChannelSet {
                comm,
                sensing: vec![],
                derivs: vec![],
            },
            w,
        }
    }

    fn beta3_in_disk(r: &mut SimRng, taps: usize, eps: f64) -> Vec<Complex64> {
        (0..taps)
            .map(|_| Complex64::from_polar(eps * r.gen::<f64>().sqrt(), r.gen_range(0.0..2.0 * PI)))
            .collect()
    }

    const NOISE: f64 = 1e-12;

    fn budget() -> LinkBudget {
        LinkBudget {
            noise_ue: NOISE,
            noise_sap: NOISE,
        }
    }

    #[test]
    fn zero_beamformer_gives_zero_sindr() {
        let mut r = rng(1, 0);
        let mut inst = instance(&mut r, 2, 3, 2);
        inst.w.iter_mut().for_each(|w| *w = CMatrix::zeros(3, 2));
        let bm = BussgangModel::new(&inst.w, 1.0, &[Complex64::new(0.1, 0.0); 2]);
        let sol = Solution::new(inst.w.clone(), layout(2, 3));
        assert_eq!(sindr(0, &inst.channels, &bm, &sol, &budget()), 0.0);
        assert_eq!(mu_star(1, &inst.channels, &bm, &sol, &budget()), 0.0);
        assert_eq!(
            zeta_star(1, &inst.channels, &bm, &sol, &budget()),
            Complex64::new(0.0, 0.0)
        );
        assert_eq!(delta(&inst.channels, &bm, &sol), 0.0);
    }

    #[test]
    fn single_user_single_ap_snr() {
        let mut r = rng(2, 0);
        let inst = instance(&mut r, 1, 4, 1);
        let beta1 = 0.8;
        let bm = BussgangModel::new(&inst.w, beta1, &[Complex64::new(0.0, 0.0)]);
        let sol = Solution::new(inst.w.clone(), layout(1, 4));
        let h = &inst.channels.comm[0][0];
        let expected = inner(h, &inst.w[0].column(0)).norm_sqr() * beta1 * beta1 / NOISE;
        let got = sindr(0, &inst.channels, &bm, &sol, &budget());
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn sum_rate_of_unit_sindrs_is_two_bits() {
        let one = Complex::new(1.0, 0.0);
        let zero = Complex::new(0.0, 0.0);
        let terms = LinkTerms {
            gain: vec![vec![one, zero], vec![zero, one]],
            distortion: vec![0.0, 0.0],
        };
        assert!((terms.sum_rate(1.0, RateUnit::Bits) - 2.0).abs() < 1e-15);
        let silent = LinkTerms {
            gain: vec![vec![zero, zero], vec![zero, zero]],
            distortion: vec![0.0, 0.0],
        };
        assert_eq!(silent.sum_rate(1.0, RateUnit::Bits), 0.0);
    }

    #[test]
    fn single_user_rate_grows_with_power() {
        let mut r = rng(3, 0);
        for _ in 0..20 {
            let inst = instance(&mut r, 2, 3, 1);
            let rate = |s: f64| {
                let w: Vec<CMatrix> = inst
                    .w
                    .iter()
                    .map(|w| w.scale(Complex64::new(s, 0.0)))
                    .collect();
                let bm = BussgangModel::new(&w, 1.0, &[Complex64::new(0.0, 0.0); 2]);
                LinkTerms::new(&inst.channels.comm, &w, &bm).sum_rate(NOISE, RateUnit::Bits)
            };
            let mut prev = rate(1.0);
            for s in [1.5, 2.0, 4.0] {
                let cur = rate(s);
                assert!(cur >= prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn mu_star_equals_sindr_and_fp_chain_holds() {
        let mut r = rng(4, 0);
        for _ in 0..100 {
            let inst = instance(&mut r, 2, 4, 3);
            let b3 = beta3_in_disk(&mut r, 2, 0.2);
            let bm = BussgangModel::new(&inst.w, 1.0, &b3);
            let terms = LinkTerms::new(&inst.channels.comm, &inst.w, &bm);
            let mut sol = Solution::new(inst.w.clone(), layout(2, 4));
            for k in 0..3 {
                sol.mu[k] = mu_star(k, &inst.channels, &bm, &sol, &budget());
                let s = sindr(k, &inst.channels, &bm, &sol, &budget());
                assert!((sol.mu[k] - s).abs() <= 1e-12 * s);
            }
            for k in 0..3 {
                sol.zeta[k] = zeta_star(k, &inst.channels, &bm, &sol, &budget());
            }
            let rate = terms.sum_rate(NOISE, RateUnit::Bits);
            let chain = terms.fp_objective(&sol.mu, &sol.zeta, NOISE, RateUnit::Bits);
            assert!((chain - rate).abs() <= 1e-9 * rate, "{chain} vs {rate}");
            let dual = terms.log_dual_objective(&sol.mu, NOISE, RateUnit::Bits);
            assert!((dual - rate).abs() <= 1e-9 * rate);
            let nats = terms.fp_objective(&sol.mu, &sol.zeta, NOISE, RateUnit::Nats);
            assert!((nats - rate * LN_2).abs() <= 1e-9 * rate);
        }
    }

    #[test]
    fn zeta_star_recovers_fractional_term() {
        let mut r = rng(5, 0);
        for _ in 0..50 {
            let inst = instance(&mut r, 2, 3, 2);
            let b3 = beta3_in_disk(&mut r, 2, 0.15);
            let bm = BussgangModel::new(&inst.w, 1.0, &b3);
            let t = LinkTerms::new(&inst.channels.comm, &inst.w, &bm);
            for k in 0..2 {
                let mu = r.gen_range(0.0..5.0);
                let z = t.zeta_star(k, mu, NOISE);
                let psi = t.psi(k, NOISE);
                let transformed =
                    2.0 * (1.0 + mu).sqrt() * (z.conj() * t.gain[k][k]).re - z.norm_sqr() * psi;
                let frac = (1.0 + mu) * t.gain[k][k].norm_sqr() / psi;
                assert!((transformed - frac).abs() <= 1e-9 * frac);
            }
        }
    }

    #[test]
    fn conjugation_conjugates_zeta() {
        let mut r = rng(6, 0);
        let inst = instance(&mut r, 2, 3, 2);
        let b3 = [Complex64::new(0.1, 0.0), Complex64::new(-0.05, 0.0)];
        let conj_comm: Vec<Vec<Vec<Complex64>>> = inst
            .channels
            .comm
            .iter()
            .map(|row| {
                row.iter()
                    .map(|h| h.iter().map(|z| z.conj()).collect())
                    .collect()
            })
            .collect();
        let conj_w: Vec<CMatrix> = inst.w.iter().map(|w| w.map(|z| z.conj())).collect();
        let t = LinkTerms::new(
            &inst.channels.comm,
            &inst.w,
            &BussgangModel::new(&inst.w, 1.0, &b3),
        );
        let tc = LinkTerms::new(&conj_comm, &conj_w, &BussgangModel::new(&conj_w, 1.0, &b3));
        for k in 0..2 {
            let (z, zc) = (t.zeta_star(k, 0.7, NOISE), tc.zeta_star(k, 0.7, NOISE));
            assert!((z.conj() - zc).norm() <= 1e-12 * z.norm());
        }
    }

    #[test]
    fn delta_is_concave_in_each_column_for_linear_pa() {
        let mut r = rng(7, 0);
        for _ in 0..100 {
            let inst = instance(&mut r, 2, 3, 2);
            let mu = [r.gen_range(0.0..3.0), r.gen_range(0.0..3.0)];
            let zeta: Vec<Complex64> = (0..2).map(|_| complex_normal(&mut r, 1e9)).collect();
            let (a, k) = (r.gen_range(0..2), r.gen_range(0..2));
            let other = CMatrix::from_fn(3, 2, |_, _| complex_normal(&mut r, 0.3));
            let d = |w: &[CMatrix]| {
                let bm = BussgangModel::new(w, 1.0, &[Complex64::new(0.0, 0.0); 2]);
                LinkTerms::new(&inst.channels.comm, w, &bm).delta(&mu, &zeta)
            };
            let mut w1 = inst.w.clone();
            let mut w2 = inst.w.clone();
            let mut mid = inst.w.clone();
            for m in 0..3 {
                w2[a][(m, k)] = other[(m, k)];
                mid[a][(m, k)] = (w1[a][(m, k)] + other[(m, k)]) * 0.5;
            }
            w1[a] = w1[a].clone();
            let lhs = d(&mid);
            let rhs = 0.5 * (d(&w1) + d(&w2));
            assert!(lhs >= rhs - 1e-9 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn sindr_ignores_column_phase() {
        let mut r = rng(8, 0);
        let inst = instance(&mut r, 2, 3, 2);
        let b3 = beta3_in_disk(&mut r, 2, 0.2);
        let s0 = LinkTerms::new(
            &inst.channels.comm,
            &inst.w,
            &BussgangModel::new(&inst.w, 1.0, &b3),
        );
        let mut w = inst.w.clone();
        let ph = Complex64::from_polar(1.0, 1.234);
        for wa in w.iter_mut() {
            for m in 0..3 {
                wa[(m, 0)] *= ph;
            }
        }
        let s1 = LinkTerms::new(&inst.channels.comm, &w, &BussgangModel::new(&w, 1.0, &b3));
        for k in 0..2 {
            assert!((s0.sindr(k, NOISE) - s1.sindr(k, NOISE)).abs() <= 1e-9 * s0.sindr(k, NOISE));
        }
    }

    #[test]
    fn robust_terms_reproduce_bussgang_link_terms() {
        let mut r = rng(9, 0);
        for _ in 0..20 {
            let inst = instance(&mut r, 2, 4, 2);
            let b3 = beta3_in_disk(&mut r, 2, 0.3);
            let direct = LinkTerms::new(
                &inst.channels.comm,
                &inst.w,
                &BussgangModel::new(&inst.w, 0.9, &b3),
            );
            let via = RobustTerms::new(&inst.channels.comm, &inst.w, 0.9).link_terms(&b3);
            for k in 0..2 {
                for j in 0..2 {
                    assert!(
                        (direct.gain[k][j] - via.gain[k][j]).norm()
                            <= 1e-12 * direct.gain[k][j].norm()
                    );
                }
                assert!(
                    (direct.distortion[k] - via.distortion[k]).abs()
                        <= 1e-12 * direct.distortion[k]
                );
            }
        }
    }

    fn aux(r: &mut SimRng, users: usize) -> (Vec<f64>, Vec<Complex64>) {
        let mu = (0..users).map(|_| r.gen_range(0.0..10.0)).collect();
        let zeta = (0..users).map(|_| complex_normal(r, 1e8)).collect();
        (mu, zeta)
    }

    #[test]
    fn lower_bound_at_zero_radius_is_linear_delta() {
        let mut r = rng(10, 0);
        for _ in 0..20 {
            let inst = instance(&mut r, 2, 3, 2);
            let (mu, zeta) = aux(&mut r, 2);
            let rt = RobustTerms::new(&inst.channels.comm, &inst.w, 1.0);
            let bm = BussgangModel::new(&inst.w, 1.0, &[Complex64::new(0.0, 0.0); 2]);
            let d = LinkTerms::new(&inst.channels.comm, &inst.w, &bm).delta(&mu, &zeta);
            for form in [InterferenceBound::Printed, InterferenceBound::Triangle] {
                let l = rt.lower_bound(0.0, &mu, &zeta, form);
                assert!((l - d).abs() <= 1e-12 * d.abs());
            }
        }
    }

    #[test]
    fn triangle_lower_bound_sandwiches_delta() {
        let mut r = rng(11, 0);
        for _ in 0..10 {
            let inst = instance(&mut r, 2, 4, 2);
            let (mu, zeta) = aux(&mut r, 2);
            let eps = r.gen_range(0.05..0.3);
            let rt = RobustTerms::new(&inst.channels.comm, &inst.w, 1.0);
            let l = rt.lower_bound(eps, &mu, &zeta, InterferenceBound::Triangle);
            for _ in 0..1000 {
                let b3 = beta3_in_disk(&mut r, 2, eps);
                let d = rt.link_terms(&b3).delta(&mu, &zeta);
                assert!(l <= d + 1e-9 * d.abs().max(l.abs()));
            }
        }
    }

    #[test]
    fn printed_bound_is_never_tighter_than_needed_by_triangle() {
        let mut r = rng(12, 0);
        for _ in 0..50 {
            let inst = instance(&mut r, 2, 3, 2);
            let (mu, zeta) = aux(&mut r, 2);
            let rt = RobustTerms::new(&inst.channels.comm, &inst.w, 1.0);
            let eps = r.gen_range(0.0..0.4);
            let p = rt.lower_bound(eps, &mu, &zeta, InterferenceBound::Printed);
            let t = rt.lower_bound(eps, &mu, &zeta, InterferenceBound::Triangle);
            assert!(t <= p + 1e-12 * p.abs());
        }
    }

    #[test]
    fn lower_bound_is_non_increasing_in_radius() {
        let mut r = rng(13, 0);
        for _ in 0..100 {
            let inst = instance(&mut r, 2, 3, 2);
            let (mu, zeta) = aux(&mut r, 2);
            let rt = RobustTerms::new(&inst.channels.comm, &inst.w, 1.0);
            for form in [InterferenceBound::Printed, InterferenceBound::Triangle] {
                let mut prev = f64::INFINITY;
                for i in 0..=50 {
                    let l = rt.lower_bound(0.01 * i as f64, &mu, &zeta, form);
                    assert!(l <= prev + 1e-12 * l.abs());
                    prev = l;
                }
            }
        }
    }

    #[test]
    fn robust_aux_maximises_worst_case_objective() {
        let mut r = rng(14, 0);
        for _ in 0..30 {
            let inst = instance(&mut r, 2, 3, 2);
            let rt = RobustTerms::new(&inst.channels.comm, &inst.w, 1.0);
            let eps = r.gen_range(0.0..0.3);
            let form = InterferenceBound::Triangle;
            let (mu, zeta) = rt.robust_aux(eps, NOISE, form);
            let best = rt.robust_objective(eps, &mu, &zeta, NOISE, form, RateUnit::Nats);
            let rate = rt.worst_case_rate(eps, NOISE, form, RateUnit::Nats);
            assert!((best - rate).abs() <= 1e-9 * rate.abs().max(1e-12));
            for _ in 0..20 {
                let (m2, z2) = aux(&mut r, 2);
                let z2: Vec<Complex64> = z2.iter().map(|z| z * 1e-3).collect();
                let v = rt.robust_objective(eps, &m2, &z2, NOISE, form, RateUnit::Nats);
                assert!(v <= best + 1e-9 * best.abs());
            }
            // the worst-case rate never exceeds the adversarial rate
            let (adv, _) = rt.adversarial_rate(eps, NOISE, 64);
            let (disk, b3) = rt.disk_worst_rate(eps, NOISE, 64);
            let wc = rt.worst_case_rate(eps, NOISE, form, RateUnit::Bits);
            assert!(wc <= disk + 1e-9 && disk <= adv + 1e-9);
            assert!(b3.iter().all(|b| b.norm() <= eps * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn power_projection_is_radial() {
        let w = CMatrix::from_vec(2, 1, vec![Complex64::new(2.0f64.sqrt(), 0.0); 2]).unwrap();
        let p = project_power(&w, 1.0);
        assert!((p.frob_norm_sqr() - 1.0).abs() < 1e-15);
        assert!(p.approx_eq(&w.scale(Complex64::new(0.5, 0.0)), 1e-15));
        let small = w.scale(Complex64::new(0.1, 0.0));
        assert_eq!(project_power(&small, 1.0), small);
    }
}
