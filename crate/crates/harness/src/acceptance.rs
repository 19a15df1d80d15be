//! The ten acceptance checks, shared by `maisac validate` and the test suite.
//!
//! Each check returns a [`Check`] instead of panicking so that a failing
//! criterion is reported alongside the others.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use maisac_core::comm::{InterferenceBound, LinkTerms, RateUnit, RobustTerms};
use maisac_core::config::SystemConfig;
use maisac_core::fp::{flatten_beamformers, unflatten_beamformers, Mode};
use maisac_core::geometry::{sensing_channel, steering_derivatives, ChannelSet, Point, Scenario};
use maisac_core::numerics::tape::Tape;
use maisac_core::numerics::{complex_normal, fd_gradient, rel_error, rng, CMatrix, Mat, Real, SimRng};
use maisac_core::oracle;
use maisac_core::pa::{bussgang_gain, distortion_covariance, BussgangModel};
use maisac_core::robust::{
    constraint_margin, crlb_slack, fim_bounds, g, g_sca, g_sca_inner, product_bounds, solve_epsilon,
    theta_sets, worst_case_crlb, SolveOptions, Surrogate, ThetaSet,
};
use maisac_core::sensing::{crlb_trace, fim_terms, FimMatrix, FimTerms, ENTRIES};
use maisac_gnn::params::{ModelSpec, Params};
use maisac_gnn::train::{evaluate as gnn_loss, gradient as gnn_gradient, Sample};

use crate::experiment::{run_experiment, write_csv, ExperimentResult, Method, Plan, Row, Sweep};
use crate::Result;

const DRAWS: usize = 100_000;
const GRID: usize = 100_000;
/// Radii at which the robustness trend is checked.
pub const TREND_EPSILONS: [f64; 2] = [0.15, 0.2];
pub const TREND_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const REQUIRED_WINS: usize = 4;

#[derive(Debug, Clone)]
pub struct Check {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {:<22} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Run `body`, which returns `(passed, detail)`, and enforce an optional time limit.
fn timed(id: u8, title: &'static str, limit: Option<f64>, body: impl FnOnce() -> (bool, String)) -> Check {
    let start = Instant::now();
    let (mut passed, mut detail) = body();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed.as_secs_f64() >= limit {
            passed = false;
            detail.push_str(&format!("; over the {limit} s limit"));
        }
    }
    Check {
        id,
        title,
        passed,
        detail,
        elapsed,
    }
}

fn unit_power_w(r: &mut SimRng, n: usize, k: usize, power: f64) -> CMatrix {
    let m = CMatrix::from_fn(n, k, |_, _| complex_normal(r, 1.0));
    m.scale(Complex64::new((power / m.frob_norm_sqr()).sqrt(), 0.0))
}

fn in_disk(r: &mut SimRng, eps: f64) -> Complex64 {
    Complex64::from_polar(eps * r.gen::<f64>().sqrt(), r.gen_range(0.0..2.0 * PI))
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    a.sub(b).frob_norm() / b.frob_norm()
}

fn random_beams(cfg: &SystemConfig, r: &mut SimRng) -> Vec<CMatrix> {
    (0..cfg.network.taps)
        .map(|_| unit_power_w(r, cfg.network.tx_antennas, cfg.network.users, cfg.power.max_power_w))
        .collect()
}

/// Closed-form Bussgang gain and distortion covariance against sampled amplifier outputs.
pub fn bussgang_fidelity() -> Check {
    timed(1, "bussgang fidelity", Some(30.0), || {
        let mut r = rng(101, 0);
        let mut worst_gain: f64 = 0.0;
        let mut worst_cov: f64 = 0.0;
        for _ in 0..2 {
            let w = unit_power_w(&mut r, 4, 4, 1.0);
            let b3 = in_disk(&mut r, 0.2);
            match oracle::bussgang_full(&mut r, &w, 1.0, b3, DRAWS) {
                Ok(est) => worst_gain = worst_gain.max(rel(&est, &bussgang_gain(&w, 1.0, b3))),
                Err(e) => return (false, format!("estimator failed: {e}")),
            }
            let cov = oracle::distortion_covariance(&mut r, &w, 1.0, b3, DRAWS);
            worst_cov = worst_cov.max(rel(&cov, &distortion_covariance(&w, b3)));
        }
        (
            worst_gain < 0.02 && worst_cov < 0.05,
            format!("gain error {worst_gain:.2e} (< 2e-2), distortion error {worst_cov:.2e} (< 5e-2)"),
        )
    })
}

/// Transformed objective at optimal auxiliaries against the plain sum rate.
pub fn fp_equivalence(cfg: &SystemConfig) -> Check {
    timed(2, "fp equivalence", Some(5.0), || {
        let noise = cfg.noise_w();
        let mut r = rng(102, 0);
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let ch = match channels(cfg, seed) {
                Ok(ch) => ch,
                Err(e) => return (false, format!("seed {seed}: {e}")),
            };
            let w = random_beams(cfg, &mut r);
            let b3: Vec<Complex64> = (0..cfg.network.taps).map(|_| in_disk(&mut r, 0.2)).collect();
            let terms = LinkTerms::new(&ch.comm, &w, &BussgangModel::new(&w, cfg.amplifier.beta1, &b3));
            let mu: Vec<f64> = (0..terms.users()).map(|k| terms.sindr(k, noise)).collect();
            let zeta: Vec<Complex64> = mu.iter().enumerate().map(|(k, &m)| terms.zeta_star(k, m, noise)).collect();
            let rate = terms.sum_rate(noise, RateUnit::Bits);
            let chain = terms.fp_objective(&mu, &zeta, noise, RateUnit::Bits);
            worst = worst.max((chain - rate).abs() / rate);
        }
        (worst <= 1e-9, format!("max relative gap {worst:.2e} over 100 instances (<= 1e-9)"))
    })
}

fn channels(cfg: &SystemConfig, seed: u64) -> maisac_core::Result<ChannelSet> {
    cfg.scenario(seed)?.channels(&cfg.spread_layout()?)
}

/// Expected Fisher information against the sample average over amplifier draws.
pub fn fim_oracle(cfg: &SystemConfig) -> Check {
    timed(3, "fim oracle", Some(60.0), || {
        let noise = cfg.noise_w();
        let mut worst: f64 = 0.0;
        for seed in 0..2 {
            let ch = match channels(cfg, seed) {
                Ok(ch) => ch,
                Err(e) => return (false, format!("seed {seed}: {e}")),
            };
            let mut r = rng(seed, 103);
            let w = random_beams(cfg, &mut r);
            let b3: Vec<Complex64> = (0..cfg.network.taps).map(|_| in_disk(&mut r, 0.2)).collect();
            for b in 0..cfg.network.saps {
                let derivs: Vec<&[CMatrix; 2]> = ch.derivs.iter().map(|row| &row[b]).collect();
                let exact = FimTerms::new(&derivs, &w, noise).matrix(cfg.amplifier.beta1, &b3);
                let est = oracle::fim(&mut r, &derivs, &w, cfg.amplifier.beta1, &b3, noise, DRAWS);
                let diff: f64 = ENTRIES.iter().map(|&(i, j)| (est[i][j] - exact[i][j]).powi(2)).sum();
                let norm: f64 = exact.iter().flatten().map(|x| x * x).sum();
                worst = worst.max((diff / norm).sqrt());
            }
        }
        (worst < 0.03, format!("max relative error {worst:.2e} (< 3e-2)"))
    })
}

/// Steering derivatives, taped rate and CRLB-slack gradients, and the GNN
/// loss gradient, all against central differences.
pub fn derivative_oracle(cfg: &SystemConfig) -> Check {
    timed(4, "derivative oracle", Some(60.0), || match derivative_errors(cfg) {
        Ok((steer, taped, gnn)) => (
            steer <= 1e-4 && taped <= 1e-4 && gnn <= 1e-3,
            format!("steering {steer:.2e}, taped {taped:.2e} (<= 1e-4); gnn {gnn:.2e} (<= 1e-3)"),
        ),
        Err(e) => (false, e.to_string()),
    })
}

fn derivative_errors(cfg: &SystemConfig) -> Result<(f64, f64, f64)> {
    let mut steer: f64 = 0.0;
    let mut taped: f64 = 0.0;
    let layout = cfg.spread_layout()?;
    for seed in 0..10 {
        let sc = cfg.scenario(seed)?;
        let geo = &sc.geometry;
        for (a, links) in sc.sensing.iter().enumerate() {
            for (b, link) in links.iter().enumerate() {
                let (tap, sap) = (geo.taps[a], geo.saps[b]);
                let (tx, rx) = (&layout.tx[a], &layout.rx[b]);
                let (dx, dy) = steering_derivatives(link, geo.target, tap, sap, tx, rx)?;
                let at = |t: &[f64]| -> CMatrix {
                    let moved = link
                        .with_target(Point::new(t[0], t[1]), tap, sap)
                        .expect("target stays off the access points");
                    sensing_channel(&moved, tx, rx)
                };
                let x0 = [geo.target.x, geo.target.y];
                let scale = dx.frob_norm().max(dy.frob_norm());
                for i in 0..rx.len() {
                    for j in 0..tx.len() {
                        let re = fd_gradient(|t| at(t)[(i, j)].re, &x0, 1e-5)?;
                        let im = fd_gradient(|t| at(t)[(i, j)].im, &x0, 1e-5)?;
                        let fx = Complex64::new(re[0], im[0]);
                        let fy = Complex64::new(re[1], im[1]);
                        steer = steer.max((fx - dx[(i, j)]).norm() / scale);
                        steer = steer.max((fy - dy[(i, j)]).norm() / scale);
                    }
                }
            }
        }
        let mut r = rng(seed, 104);
        let w = random_beams(cfg, &mut r);
        let mut x = flatten_beamformers(&w);
        x.extend(layout.flatten());
        for sap in 0..cfg.network.saps {
            taped = taped.max(tape_vs_fd(&x, &CrlbSlack { cfg, scenario: &sc, sap })?);
        }
        taped = taped.max(tape_vs_fd(&x, &WorstCaseRate { cfg, scenario: &sc })?);
    }
    Ok((steer, taped, gnn_error()?))
}

/// Split the flat variable vector into beamformers and per-AP positions.
fn unpack<S: Real>(cfg: &SystemConfig, v: &[S]) -> (Vec<Mat<S>>, Vec<Vec<S>>, Vec<Vec<S>>) {
    let n = &cfg.network;
    let beams = 2 * n.taps * n.tx_antennas * n.users;
    let w = unflatten_beamformers(&v[..beams], n.tx_antennas, n.users);
    let (tx, rx) = v[beams..].split_at(n.taps * n.tx_antennas);
    (
        w,
        tx.chunks(n.tx_antennas).map(<[S]>::to_vec).collect(),
        rx.chunks(n.rx_antennas).map(<[S]>::to_vec).collect(),
    )
}

/// A scalar objective of the flat variables, evaluable with or without a tape.
trait Objective {
    fn eval<S: Real>(&self, v: &[S]) -> S;
}

struct WorstCaseRate<'a> {
    cfg: &'a SystemConfig,
    scenario: &'a Scenario,
}

impl Objective for WorstCaseRate<'_> {
    fn eval<S: Real>(&self, v: &[S]) -> S {
        let (w, tx, rx) = unpack(self.cfg, v);
        let ch = self.scenario.channels_for(&tx, &rx).expect("channels at valid positions");
        RobustTerms::new(&ch.comm, &w, self.cfg.amplifier.beta1).worst_case_rate(
            self.cfg.amplifier.epsilon,
            self.cfg.noise_w(),
            InterferenceBound::Triangle,
            RateUnit::Bits,
        )
    }
}

struct CrlbSlack<'a> {
    cfg: &'a SystemConfig,
    scenario: &'a Scenario,
    sap: usize,
}

impl Objective for CrlbSlack<'_> {
    fn eval<S: Real>(&self, v: &[S]) -> S {
        let (w, tx, rx) = unpack(self.cfg, v);
        let ch = self.scenario.channels_for(&tx, &rx).expect("channels at valid positions");
        let t = theta_sets(&ch, &w, self.cfg.noise_w(), self.cfg.amplifier.beta1);
        crlb_slack(self.cfg.amplifier.epsilon, &t[self.sap], self.cfg.sensing.crlb_threshold)
    }
}

fn tape_vs_fd(x: &[f64], f: &impl Objective) -> Result<f64> {
    let tape = Tape::new();
    let vars = tape.vars(x);
    let out = f.eval(&vars);
    let grad = tape.gradient(out).wrt_all(&vars);
    let fd = fd_gradient(|p| f.eval(p), x, 1e-6)?;
    Ok(rel_error(&grad, &fd))
}

fn toy_gnn_config() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.network.taps = 1;
    cfg.network.saps = 1;
    cfg.network.users = 2;
    cfg.network.tx_antennas = 2;
    cfg.network.rx_antennas = 2;
    cfg.gnn.hidden = 8;
    cfg.gnn.heads = 2;
    cfg.gnn.layers = 2;
    cfg.gnn.ffn = 16;
    cfg
}

/// Worst relative error of the end-to-end GNN loss gradient on a toy graph.
fn gnn_error() -> Result<f64> {
    let cfg = toy_gnn_config();
    let mut worst: f64 = 0.0;
    for (seed, mode) in [(1, Mode::Robust), (2, Mode::NonRobust)] {
        let sample = Sample::new(&cfg, cfg.scenario(seed)?, mode)?;
        let params = Params::init(ModelSpec::from_config(&cfg), seed);
        let (_, grad) = gnn_gradient(&cfg, &params, &sample, mode)?;
        for block in &params.arch.blocks {
            let len = block.rows * block.cols;
            for i in [0, len / 2, len - 1] {
                let at = block.offset + i;
                let h = 1e-6 * params.values[at].abs().max(1.0);
                let mut probe = params.clone();
                probe.values[at] += h;
                let plus = gnn_loss(&cfg, &probe, &sample, mode)?.total;
                probe.values[at] -= 2.0 * h;
                let minus = gnn_loss(&cfg, &probe, &sample, mode)?.total;
                let fd = (plus - minus) / (2.0 * h);
                worst = worst.max((grad[at] - fd).abs() / grad[at].abs().max(fd.abs()).max(1e-6));
            }
        }
    }
    Ok(worst)
}

/// Closed-form bounds must contain every FIM entry, product and CRLB trace
/// reached inside the disk.
pub fn bound_sandwich(cfg: &SystemConfig) -> Check {
    timed(5, "bound sandwich", None, || {
        let noise = cfg.noise_w();
        let beta1 = cfg.amplifier.beta1;
        let mut draws = 0;
        let mut violations = 0;
        for seed in 0..5 {
            let ch = match channels(cfg, seed) {
                Ok(ch) => ch,
                Err(e) => return (false, format!("seed {seed}: {e}")),
            };
            let mut r = rng(seed, 105);
            let w = random_beams(cfg, &mut r);
            let eps = r.gen_range(0.05..0.3);
            for terms in fim_terms(&ch, &w, noise) {
                let t = ThetaSet::new(&terms, beta1);
                let (diag, off) = product_bounds(eps, &t);
                let bounds: Vec<(f64, f64)> = ENTRIES.iter().map(|&e| fim_bounds(e, eps, &t)).collect();
                let crlb_cap = worst_case_crlb(eps, &t);
                for _ in 0..1000 {
                    draws += 1;
                    let b3: Vec<Complex64> = (0..cfg.network.taps).map(|_| in_disk(&mut r, eps)).collect();
                    let f: Vec<f64> = (0..4).map(|e| terms.entry(e, beta1, &b3)).collect();
                    let tol = 1e-9 * t.c(0).abs();
                    let mut ok = bounds.iter().zip(&f).all(|(&(lo, hi), &x)| lo <= x + tol && x <= hi + tol);
                    let tol = 1e-9 * t.c(0) * t.c(3);
                    ok &= diag <= f[0] * f[3] + tol && off + tol >= (f[1] * f[2]).abs();
                    let m = FimMatrix {
                        entries: terms.matrix(beta1, &b3),
                        sap: 0,
                    };
                    if let Ok(tr) = crlb_trace(&m) {
                        ok &= tr <= crlb_cap * (1.0 + 1e-9);
                    }
                    if !ok {
                        violations += 1;
                    }
                }
            }
        }
        (violations == 0, format!("{violations} violations in {draws} draws"))
    })
}

fn brute_force(t: &[ThetaSet], gamma: f64, f: &dyn Fn(f64) -> f64) -> Option<f64> {
    (0..=GRID)
        .map(|i| 0.5 * i as f64 / GRID as f64)
        .filter(|&e| constraint_margin(e, t, gamma).is_some_and(|m| m >= 0.0))
        .map(|e| (e, f(e)))
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|b| b.0)
}

/// Radius solve against an exhaustive grid, and tangency of both surrogates.
pub fn sca_solver(cfg: &SystemConfig) -> Check {
    timed(6, "sca solver", None, || {
        let noise = cfg.noise_w();
        let mut r = rng(106, 0);
        let mut worst_solve: f64 = 0.0;
        let mut worst_tangent: f64 = 0.0;
        for seed in 0..50 {
            let ch = match channels(cfg, seed) {
                Ok(ch) => ch,
                Err(e) => return (false, format!("seed {seed}: {e}")),
            };
            let w = random_beams(cfg, &mut r);
            let t = theta_sets(&ch, &w, noise, cfg.amplifier.beta1);
            let target = r.gen_range(0.05..0.45);
            let gamma = t.iter().map(|x| worst_case_crlb(target, x)).fold(0.0, f64::max);
            let peak = r.gen_range(0.0..0.5);
            let objectives: [Box<dyn Fn(f64) -> f64>; 2] =
                [Box::new(|e| e), Box::new(move |e| -(e - peak).powi(2))];
            for f in &objectives {
                let Some(brute) = brute_force(&t, gamma, f) else {
                    return (false, format!("seed {seed}: grid found no feasible radius"));
                };
                for surrogate in [Surrogate::Inner, Surrogate::Printed] {
                    let opts = SolveOptions {
                        surrogate,
                        ..SolveOptions::default()
                    };
                    let sca = solve_epsilon(&t, gamma, f, &opts);
                    let err = if sca.feasible { (sca.epsilon_star - brute).abs() } else { f64::INFINITY };
                    worst_solve = worst_solve.max(err);
                }
            }

            let e0 = r.gen_range(0.0..0.5);
            let gamma = cfg.sensing.crlb_threshold;
            let h = 1e-5;
            for th in &t {
                let gv = g(e0, th, gamma);
                let fd = fd_gradient(|x| g(x[0], th, gamma), &[e0], h).map_or(f64::NAN, |d| d[0]);
                let floor = gv.abs().max(th.c(0) * th.c(3) * gamma);
                for s in [g_sca::<f64>, g_sca_inner::<f64>] {
                    let slope = (s(e0 + h, e0, th, gamma) - s(e0 - h, e0, th, gamma)) / (2.0 * h);
                    worst_tangent = worst_tangent
                        .max((s(e0, e0, th, gamma) - gv).abs() / floor)
                        .max((slope - fd).abs() / fd.abs().max(1.0));
                }
            }
        }
        (
            worst_solve <= 1e-4 && worst_tangent <= 1e-6,
            format!("solve gap {worst_solve:.2e} (<= 1e-4), tangency {worst_tangent:.2e} (<= 1e-6)"),
        )
    })
}

/// The sweep behind the trend and feasibility checks.
pub fn trend_plan() -> Plan {
    Plan {
        methods: Method::STANDARD.to_vec(),
        sweep: Sweep::epsilon(&TREND_EPSILONS),
        seeds: TREND_SEEDS.to_vec(),
        train_seed: 0,
    }
}

fn metric(rows: &[Row], method: Method, value: f64, seed: u64, pick: fn(&Row) -> Option<f64>) -> Option<f64> {
    rows.iter()
        .find(|r| r.method == method.tag() && r.sweep_value == value && r.seed == seed && r.is_ok())
        .and_then(pick)
}

/// Count seeds where `a` beats `b` on `pick` at sweep value `value`.
fn wins(rows: &[Row], value: f64, a: Method, b: Method, strict: bool, pick: fn(&Row) -> Option<f64>) -> usize {
    TREND_SEEDS
        .iter()
        .filter(|&&s| match (metric(rows, a, value, s, pick), metric(rows, b, value, s, pick)) {
            (Some(x), Some(y)) => if strict { x > y } else { x >= y },
            _ => false,
        })
        .count()
}

/// Robust GNN against non-robust GNN on the adversarial sum rate.
pub fn robustness_trend(result: &ExperimentResult) -> Check {
    timed(7, "robustness trend", None, || {
        let counts: Vec<usize> = TREND_EPSILONS
            .iter()
            .map(|&e| wins(&result.rows, e, Method::SacgnnRobust, Method::SacgnnNonRobust, true, |r| r.adversarial_rate))
            .collect();
        let detail = TREND_EPSILONS
            .iter()
            .zip(&counts)
            .map(|(e, c)| format!("eps {e}: {c}/5"))
            .collect::<Vec<_>>()
            .join(", ");
        (counts.iter().all(|&c| c >= REQUIRED_WINS), format!("robust > non-robust adversarial rate, {detail}"))
    })
}

/// Position optimization against the fixed-position baseline at equal array size.
pub fn ma_benefit(result: &ExperimentResult) -> Check {
    timed(8, "ma benefit", None, || {
        let e = TREND_EPSILONS[0];
        let n = wins(&result.rows, e, Method::Fp, Method::Fpa, false, |r| r.worst_case_rate);
        (n >= REQUIRED_WINS, format!("fp >= fpa worst-case rate at eps {e}: {n}/5"))
    })
}

/// Every emitted solution meets power and layout limits; sensing flags agree with the threshold.
pub fn feasibility(cfg: &SystemConfig, result: &ExperimentResult) -> Check {
    timed(9, "feasibility", None, || {
        let gamma = cfg.sensing.crlb_threshold;
        let mut problems = Vec::new();
        let mut emitted = 0;
        let mut flagged = 0;
        for (row, outcome) in result.rows.iter().zip(&result.outcomes) {
            let cell = format!("{} seed {} eps {}", row.method, row.seed, row.sweep_value);
            let Some(out) = outcome else {
                problems.push(format!("{cell}: {}", row.error));
                continue;
            };
            emitted += 1;
            let sol = &out.solution;
            if !sol.power_feasible(cfg.power.max_power_w) || row.power_feasible != Some(true) {
                problems.push(format!("{cell}: power"));
            }
            if sol.layout.validate().is_err() || row.layout_feasible != Some(true) {
                problems.push(format!("{cell}: layout"));
            }
            let ev = &out.evaluation;
            let gate = ev.crlb_worst_case <= gamma;
            if ev.sensing_feasible != gate || row.sensing_feasible != Some(gate) {
                problems.push(format!("{cell}: sensing flag disagrees with the threshold"));
            }
            let all = ev.power_feasible && ev.layout_feasible && ev.sensing_feasible;
            if row.feasible != Some(all) {
                problems.push(format!("{cell}: feasible flag"));
            }
            if !all {
                flagged += 1;
            }
        }
        let ok = problems.is_empty() && emitted > 0 && gamma == 0.05;
        let detail = if ok {
            format!("{emitted} solutions checked, {flagged} flagged infeasible at gamma {gamma}")
        } else {
            format!("gamma {gamma}; {}", problems.join("; "))
        };
        (ok, detail)
    })
}

/// A reduced configuration that keeps the determinism check short.
pub fn small_config() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.optimizer.iterations = 3;
    cfg.gnn.steps = 4;
    cfg.gnn.samples = 4;
    cfg.gnn.batch = 2;
    cfg
}

/// Two runs of the same plan must produce byte-identical CSV.
pub fn determinism() -> Check {
    timed(10, "determinism", None, || {
        let cfg = small_config();
        let plan = Plan {
            methods: Method::ALL.to_vec(),
            sweep: Sweep::epsilon(&[0.1, 0.2]),
            seeds: vec![0, 1],
            train_seed: 0,
        };
        let render = || -> Result<Vec<u8>> {
            let mut buf = Vec::new();
            write_csv(&run_experiment(&cfg, &plan).rows, &mut buf)?;
            Ok(buf)
        };
        match (render(), render()) {
            (Ok(a), Ok(b)) => (a == b && !a.is_empty(), format!("{} and {} bytes, identical: {}", a.len(), b.len(), a == b)),
            (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
        }
    })
}

/// All ten checks in order; `cfg` is the desk-scale scenario for the trend runs.
pub fn run_all(cfg: &SystemConfig) -> Vec<Check> {
    let mut checks = vec![
        bussgang_fidelity(),
        fp_equivalence(cfg),
        fim_oracle(cfg),
        derivative_oracle(cfg),
        bound_sandwich(cfg),
        sca_solver(cfg),
    ];
    let result = run_experiment(cfg, &trend_plan());
    checks.push(robustness_trend(&result));
    checks.push(ma_benefit(&result));
    checks.push(feasibility(cfg, &result));
    checks.push(determinism());
    checks
}
