//! Alternating optimizer: closed-form auxiliaries, the robust radius solve,
//! projected ascent on the beamformers and on the antenna positions.

use std::f64::consts::LN_2;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::comm::{lift_comm, project_power, InterferenceBound, RateUnit, RobustTerms, Solution};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{ChannelSet, MaLayout, Scenario};
use crate::metrics::ADVERSARIAL_PHASES;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::{CMatrix, Mat, Real};
use crate::robust::{crlb_slack, solve_epsilon, theta_sets, SolveOptions, ThetaSet};

const MAX_HALVINGS: usize = 20;
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Optimise the worst case over the configured coefficient disk.
    Robust,
    /// Assume a linear amplifier.
    NonRobust,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub sol: Solution,
    pub channels: ChannelSet,
    /// Radius used by the surrogate and the sensing certificate.
    pub epsilon_star: f64,
    /// Whether the certificate holds at `epsilon_star` for the current beams.
    pub epsilon_certified: bool,
    /// Worst-case sum rate in bits after each full round.
    pub objective_history: Vec<f64>,
    /// Normalised sensing margin per sAP.
    pub slacks: Vec<f64>,
    pub step: f64,
    pub position_step: f64,
    pub iterations: usize,
}

impl OptimizerState {
    pub fn sensing_feasible(&self) -> bool {
        self.slacks.iter().all(|&s| s >= 0.0)
    }
}

/// Maximum-ratio columns scaled to `p_max / K` per user.
pub fn mrt_beamformers(channels: &ChannelSet, p_max: f64) -> Vec<CMatrix> {
    channels
        .comm
        .iter()
        .map(|links| {
            let users = links.len();
            let n = links.first().map_or(0, |h| h.len());
            let amp = (p_max / users as f64).sqrt();
            let mut w = CMatrix::zeros(n, users);
            for (k, h) in links.iter().enumerate() {
                let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (m, z) in h.iter().enumerate() {
                        w[(m, k)] = z * (amp / norm);
                    }
                }
            }
            w
        })
        .collect()
}

pub fn flatten_beamformers(w: &[CMatrix]) -> Vec<f64> {
    w.iter()
        .flat_map(|m| m.as_slice().iter().flat_map(|z| [z.re, z.im]))
        .collect()
}

/// Rebuild matrices of the given shapes from interleaved real/imaginary parts.
pub fn unflatten_beamformers<S: Real>(flat: &[S], rows: usize, cols: usize) -> Vec<Mat<S>> {
    flat.chunks(2 * rows * cols)
        .map(|c| {
            let data = c.chunks(2).map(|z| Complex::new(z[0], z[1])).collect();
            Mat::from_vec(rows, cols, data).expect("chunk has matching length")
        })
        .collect()
}

pub fn lift_channels<'t>(ch: &ChannelSet) -> ChannelSet<Var<'t>> {
    ChannelSet {
        comm: lift_comm(&ch.comm),
        sensing: ch
            .sensing
            .iter()
            .map(|row| row.iter().map(Mat::lift).collect())
            .collect(),
        derivs: ch
            .derivs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| [Mat::lift(&d[0]), Mat::lift(&d[1])])
                    .collect()
            })
            .collect(),
    }
}

/// Slacks below this count as nearly active.
const NEAR_ACTIVE: f64 = 0.05;
/// Relative pushes away from a nearly active boundary, strongest first;
/// `None` drops the sensing rows altogether.
const PUSHES: [Option<f64>; 3] = [Some(0.3), Some(0.0), None];
/// Push on violated slacks during ascent, so the shortfall cannot grow to
/// first order.
const NEUTRAL_PUSH: f64 = 0.05;
/// Relative shortfall reduction per restoration round below which it stops.
const RESTORE_GAIN: f64 = 1e-3;
const RESTORE_ROUNDS: usize = 50;
const QP_SWEEPS: usize = 500;

struct Constraint {
    slack: f64,
    grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Goal {
    /// Raise the surrogate without enlarging the sensing shortfall.
    Ascend,
    /// Shrink the sensing shortfall.
    Restore,
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    objective: f64,
    violation: f64,
}

impl Trial {
    fn accepts(&self, base: &Trial, goal: Goal) -> bool {
        if !self.objective.is_finite() || !self.violation.is_finite() {
            return false;
        }
        match goal {
            Goal::Ascend => self.violation <= base.violation && self.objective >= base.objective,
            Goal::Restore => self.violation < base.violation,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Candidate (target, requirements) pairs, tried in order until a step is
/// accepted. Restoration first follows the unit objective gradient so that
/// it keeps as much rate as the slack requirements allow.
fn directions(g: &[f64], cons: &[Constraint], goal: Goal) -> Vec<(Vec<f64>, Vec<Row>)> {
    match goal {
        Goal::Ascend => PUSHES
            .iter()
            .map(|p| (g.to_vec(), p.map_or_else(Vec::new, |push| slack_rows(g, cons, goal, push))))
            .collect(),
        Goal::Restore => {
            let rows = || slack_rows(g, cons, goal, PUSHES[0].unwrap_or(0.0));
            let n = norm(g);
            let mut out = Vec::with_capacity(2);
            if n > 0.0 && n.is_finite() {
                out.push((g.iter().map(|x| x / n).collect(), rows()));
            }
            out.push((vec![0.0; g.len()], rows()));
            out
        }
    }
}

fn usable(d: &[f64]) -> bool {
    d.iter().all(|x| x.is_finite()) && d.iter().any(|&x| x != 0.0)
}

/// Linear requirement `a . d >= c` on a search direction.
struct Row {
    a: Vec<f64>,
    c: f64,
}

/// Requirements that push nearly active or violated slacks inward at a rate
/// proportional to how close they are to the boundary. Restoration asks
/// every violated slack to rise at unit normalised rate.
fn slack_rows(g: &[f64], cons: &[Constraint], goal: Goal, push: f64) -> Vec<Row> {
    let scale = match goal {
        Goal::Ascend => norm(g).max(f64::MIN_POSITIVE),
        Goal::Restore => 1.0,
    };
    cons.iter()
        .filter(|c| c.slack < NEAR_ACTIVE && norm(&c.grad) > 0.0)
        .map(|c| {
            let weight = match (c.slack >= 0.0, goal) {
                (true, _) => push * (1.0 - c.slack / NEAR_ACTIVE),
                (false, Goal::Ascend) => NEUTRAL_PUSH,
                (false, Goal::Restore) => 1.0,
            };
            Row {
                c: weight * scale * norm(&c.grad),
                a: c.grad.clone(),
            }
        })
        .collect()
}

/// `min |d - g|^2  s.t.  a_i . d >= c_i` by Hildreth's dual coordinate
/// ascent. Accuracy only affects step quality; acceptance is checked exactly.
fn feasible_direction(g: &[f64], rows: &[Row]) -> Vec<f64> {
    let rows: Vec<&Row> = rows.iter().filter(|r| norm(&r.a) > 0.0).collect();
    if rows.is_empty() {
        return g.to_vec();
    }
    let gram: Vec<Vec<f64>> = rows
        .iter()
        .map(|ri| rows.iter().map(|rj| dot(&ri.a, &rj.a)).collect())
        .collect();
    let offset: Vec<f64> = rows.iter().map(|r| dot(&r.a, g) - r.c).collect();
    let tol = 1e-12
        * norm(g).max(
            rows.iter()
                .map(|r| r.c.abs())
                .fold(f64::MIN_POSITIVE, f64::max),
        );
    let mut lambda = vec![0.0; rows.len()];
    for _ in 0..QP_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..rows.len() {
            let residual = dot(&gram[i], &lambda) + offset[i];
            let next = (lambda[i] - residual / gram[i][i]).max(0.0);
            change = change.max((next - lambda[i]).abs() * gram[i][i].sqrt());
            lambda[i] = next;
        }
        if change <= tol {
            break;
        }
    }
    let mut d = g.to_vec();
    for (r, l) in rows.iter().zip(&lambda) {
        d.iter_mut().zip(&r.a).for_each(|(x, a)| *x += l * a);
    }
    d
}

/// Keeps every tAP already on its power budget from growing to first
/// order, so the radial projection does not undo the step.
fn power_rows(w: &[CMatrix], p_max: f64) -> Vec<Row> {
    let flat = flatten_beamformers(w);
    let block = flat.len() / w.len().max(1);
    w.iter()
        .enumerate()
        .filter(|(_, m)| m.frob_norm_sqr() >= p_max * (1.0 - 1e-9))
        .map(|(i, _)| {
            let mut a = vec![0.0; flat.len()];
            let range = i * block..(i + 1) * block;
            a[range.clone()]
                .iter_mut()
                .zip(&flat[range])
                .for_each(|(x, w)| *x = -w);
            Row { a, c: 0.0 }
        })
        .collect()
}

/// Active bound and spacing requirements of a layout, in flattened order.
fn layout_rows(layout: &MaLayout) -> Vec<Row> {
    const TOL: f64 = 1e-9;
    let total = layout.flatten().len();
    let arrays = layout
        .tx
        .iter()
        .map(|p| (p, layout.tx_bounds))
        .chain(layout.rx.iter().map(|p| (p, layout.rx_bounds)));
    let mut rows = Vec::new();
    let mut offset = 0;
    for (p, bounds) in arrays {
        let row = |coeffs: &[(usize, f64)]| {
            let mut a = vec![0.0; total];
            coeffs.iter().for_each(|&(i, v)| a[offset + i] = v);
            Row { a, c: 0.0 }
        };
        for (i, &x) in p.iter().enumerate() {
            if x - bounds.lo <= TOL {
                rows.push(row(&[(i, 1.0)]));
            }
            if bounds.hi - x <= TOL {
                rows.push(row(&[(i, -1.0)]));
            }
        }
        for i in 1..p.len() {
            if p[i] - p[i - 1] - layout.min_spacing <= TOL {
                rows.push(row(&[(i, 1.0), (i - 1, -1.0)]));
            }
        }
        offset += p.len();
    }
    rows
}

#[derive(Debug, Clone, Copy)]
pub struct Optimizer<'a> {
    cfg: &'a SystemConfig,
    scenario: &'a Scenario,
    mode: Mode,
    freeze_positions: bool,
    form: InterferenceBound,
}

impl<'a> Optimizer<'a> {
    pub fn new(cfg: &'a SystemConfig, scenario: &'a Scenario, mode: Mode) -> Self {
        Self {
            cfg,
            scenario,
            mode,
            freeze_positions: false,
            form: InterferenceBound::default(),
        }
    }

    /// Keep the antenna positions of the initial layout.
    pub fn frozen_positions(mut self) -> Self {
        self.freeze_positions = true;
        self
    }

    pub fn with_interference_bound(mut self, form: InterferenceBound) -> Self {
        self.form = form;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Radius the optimizer guards against.
    pub fn design_radius(&self) -> f64 {
        match self.mode {
            Mode::Robust => self.cfg.amplifier.epsilon,
            Mode::NonRobust => 0.0,
        }
    }

    fn beta1(&self) -> f64 {
        self.cfg.amplifier.beta1
    }

    fn noise(&self) -> f64 {
        self.cfg.noise_w()
    }

    fn gamma(&self) -> f64 {
        self.cfg.sensing.crlb_threshold
    }

    fn p_max(&self) -> f64 {
        self.cfg.power.max_power_w
    }

    pub fn initial_state(&self, layout: MaLayout) -> Result<OptimizerState> {
        let channels = self.scenario.channels(&layout)?;
        let w = mrt_beamformers(&channels, self.p_max());
        self.state_at(Solution::new(w, layout))
    }

    /// State seeded with an arbitrary feasible `sol`.
    pub fn state_at(&self, sol: Solution) -> Result<OptimizerState> {
        sol.layout.validate()?;
        if !sol.power_feasible(self.p_max()) {
            return Err(Error::InvalidArgument(
                "seed beamformers exceed the power budget".into(),
            ));
        }
        let channels = self.scenario.channels(&sol.layout)?;
        let mut state = OptimizerState {
            sol,
            channels,
            epsilon_star: self.design_radius(),
            epsilon_certified: false,
            objective_history: Vec::new(),
            slacks: Vec::new(),
            step: self.cfg.optimizer.step,
            position_step: self.cfg.optimizer.position_step,
            iterations: 0,
        };
        self.refresh(&mut state);
        Ok(state)
    }

    fn thetas(&self, channels: &ChannelSet, w: &[CMatrix]) -> Vec<ThetaSet> {
        theta_sets(channels, w, self.cfg.budget().noise_sap, self.beta1())
    }

    fn slacks(&self, eps: f64, thetas: &[ThetaSet]) -> Vec<f64> {
        thetas
            .iter()
            .map(|t| crlb_slack(eps, t, self.gamma()))
            .collect()
    }

    fn violation(slacks: &[f64]) -> f64 {
        slacks.iter().map(|&s| (-s).max(0.0)).sum()
    }

    fn refresh(&self, state: &mut OptimizerState) {
        let thetas = self.thetas(&state.channels, &state.sol.w);
        state.slacks = self.slacks(state.epsilon_star, &thetas);
        state.epsilon_certified = state.sensing_feasible();
    }

    fn terms(&self, channels: &ChannelSet, w: &[CMatrix]) -> RobustTerms {
        RobustTerms::new(&channels.comm, w, self.beta1())
    }

    /// Transformed worst-case objective (nats) at the stored auxiliaries.
    pub fn surrogate(&self, state: &OptimizerState) -> f64 {
        self.surrogate_at(state, &state.channels, &state.sol.w)
    }

    fn surrogate_at(&self, state: &OptimizerState, channels: &ChannelSet, w: &[CMatrix]) -> f64 {
        self.terms(channels, w).robust_objective(
            state.epsilon_star,
            &state.sol.mu,
            &state.sol.zeta,
            self.noise(),
            self.form,
            RateUnit::Nats,
        )
    }

    /// Lowest sum rate (bits) found over the design disk; the exact inner
    /// value of the max-min problem up to search resolution.
    pub fn max_min_rate(&self, state: &OptimizerState) -> f64 {
        self.terms(&state.channels, &state.sol.w)
            .disk_worst_rate(self.design_radius(), self.noise(), ADVERSARIAL_PHASES)
            .0
    }

    /// Worst-case sum rate (bits) certified by the surrogate.
    pub fn worst_case_rate(&self, state: &OptimizerState) -> f64 {
        self.terms(&state.channels, &state.sol.w).worst_case_rate(
            state.epsilon_star,
            self.noise(),
            self.form,
            RateUnit::Bits,
        )
    }

    pub fn update_auxiliaries(&self, state: &mut OptimizerState) {
        let (mu, zeta) = self.terms(&state.channels, &state.sol.w).robust_aux(
            state.epsilon_star,
            self.noise(),
            self.form,
        );
        state.sol.mu = mu;
        state.sol.zeta = zeta;
        let users = state.sol.users().max(1) as f64;
        state.sol.kappa = self.surrogate(state) / LN_2 / users;
    }

    /// Radius solve at fixed beams; only meaningful in robust mode.
    pub fn update_epsilon(&self, state: &mut OptimizerState) {
        if self.mode == Mode::NonRobust {
            return;
        }
        let thetas = self.thetas(&state.channels, &state.sol.w);
        let terms = self.terms(&state.channels, &state.sol.w);
        let (mu, zeta) = (state.sol.mu.clone(), state.sol.zeta.clone());
        let form = self.form;
        let opts = SolveOptions {
            lower: self.design_radius(),
            eps_init: self.design_radius(),
            ..SolveOptions::default()
        };
        let solve = solve_epsilon(
            &thetas,
            self.gamma(),
            |e| terms.lower_bound(e, &mu, &zeta, form),
            &opts,
        );
        state.epsilon_star = solve.epsilon_star;
        state.slacks = self.slacks(state.epsilon_star, &thetas);
        state.epsilon_certified = solve.feasible;
    }

    fn surrogate_gradient(&self, state: &OptimizerState) -> Vec<f64> {
        let tape = Tape::new();
        let (rows, cols) = state.sol.w[0].shape();
        let vars = tape.vars(&flatten_beamformers(&state.sol.w));
        let w = unflatten_beamformers(&vars, rows, cols);
        let comm = lift_comm::<Var>(&state.channels.comm);
        let mu: Vec<Var> = state.sol.mu.iter().map(|&m| Var::constant(m)).collect();
        let zeta: Vec<Complex<Var>> = state
            .sol
            .zeta
            .iter()
            .map(|z| Complex::new(Var::constant(z.re), Var::constant(z.im)))
            .collect();
        let out = RobustTerms::new(&comm, &w, self.beta1()).robust_objective(
            state.epsilon_star,
            &mu,
            &zeta,
            self.noise(),
            self.form,
            RateUnit::Nats,
        );
        tape.gradient(out).wrt_all(&vars)
    }

    /// Sensing slacks with their gradients with respect to the beams.
    fn slack_gradients(&self, state: &OptimizerState) -> Vec<Constraint> {
        let tape = Tape::new();
        let (rows, cols) = state.sol.w[0].shape();
        let vars = tape.vars(&flatten_beamformers(&state.sol.w));
        let w = unflatten_beamformers(&vars, rows, cols);
        let ch = lift_channels(&state.channels);
        theta_sets(&ch, &w, self.cfg.budget().noise_sap, self.beta1())
            .iter()
            .map(|t| {
                let s = crlb_slack(state.epsilon_star, t, self.gamma());
                Constraint {
                    slack: s.value(),
                    grad: tape.gradient(s).wrt_all(&vars),
                }
            })
            .collect()
    }

    fn stepped(&self, w: &[CMatrix], dir: &[f64], step: f64) -> Vec<CMatrix> {
        let scale = step * self.p_max().sqrt() / norm(dir);
        let flat: Vec<f64> = flatten_beamformers(w)
            .iter()
            .zip(dir)
            .map(|(x, d)| x + scale * d)
            .collect();
        let (rows, cols) = w[0].shape();
        unflatten_beamformers(&flat, rows, cols)
            .iter()
            .map(|m| project_power(m, self.p_max()))
            .collect()
    }

    fn trial(
        &self,
        state: &OptimizerState,
        channels: &ChannelSet,
        w: &[CMatrix],
    ) -> (Trial, Vec<f64>) {
        let slacks = self.slacks(state.epsilon_star, &self.thetas(channels, w));
        let trial = Trial {
            objective: self.surrogate_at(state, channels, w),
            violation: Self::violation(&slacks),
        };
        (trial, slacks)
    }

    /// One backtracking step on the beams; `true` if a step was accepted.
    fn beam_step(&self, state: &mut OptimizerState, goal: Goal) -> bool {
        let cons = self.slack_gradients(state);
        let grad = self.surrogate_gradient(state);
        let (base, _) = self.trial(state, &state.channels, &state.sol.w);
        for (target, mut rows) in directions(&grad, &cons, goal) {
            rows.extend(power_rows(&state.sol.w, self.p_max()));
            let dir = feasible_direction(&target, &rows);
            if !usable(&dir) {
                continue;
            }
            let mut step = state.step;
            for _ in 0..=MAX_HALVINGS {
                let w = self.stepped(&state.sol.w, &dir, step);
                let (trial, slacks) = self.trial(state, &state.channels, &w);
                if trial.accepts(&base, goal) {
                    state.sol.w = w;
                    state.slacks = slacks;
                    state.step = (step * 1.5).min(1.0);
                    return true;
                }
                step *= 0.5;
            }
        }
        state.step = (state.step * 0.5).max(1e-6);
        false
    }

    /// One backtracking step on all antenna positions with central-difference
    /// gradients, followed by the spacing repair.
    fn position_step(&self, state: &mut OptimizerState, goal: Goal) -> Result<bool> {
        let layout = state.sol.layout.clone();
        let flat = layout.flatten();
        let saps = state.slacks.len();
        let mut grad = vec![0.0; flat.len()];
        let mut slack_grads = vec![vec![0.0; flat.len()]; saps];
        let mut probe = flat.clone();
        for i in 0..flat.len() {
            let mut eval = |x: f64| -> Result<(Trial, Vec<f64>)> {
                probe[i] = x;
                let ch = self.scenario.channels(&layout.with_flat(&probe))?;
                Ok(self.trial(state, &ch, &state.sol.w))
            };
            let (up, s_up) = eval(flat[i] + FD_STEP)?;
            let (down, s_down) = eval(flat[i] - FD_STEP)?;
            probe[i] = flat[i];
            grad[i] = (up.objective - down.objective) / (2.0 * FD_STEP);
            for b in 0..saps {
                slack_grads[b][i] = (s_up[b] - s_down[b]) / (2.0 * FD_STEP);
            }
        }
        let all = grad.iter().chain(slack_grads.iter().flatten());
        if let Some(index) = all.clone().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let cons: Vec<Constraint> = state
            .slacks
            .iter()
            .zip(slack_grads)
            .map(|(&slack, grad)| Constraint { slack, grad })
            .collect();
        let (base, _) = self.trial(state, &state.channels, &state.sol.w);
        for (target, mut rows) in directions(&grad, &cons, goal) {
            rows.extend(layout_rows(&layout));
            let dir = feasible_direction(&target, &rows);
            if !usable(&dir) {
                continue;
            }
            let scale = 1.0 / norm(&dir);
            let mut step = state.position_step;
            for _ in 0..=MAX_HALVINGS {
                let p: Vec<f64> = flat
                    .iter()
                    .zip(&dir)
                    .map(|(x, d)| x + step * scale * d)
                    .collect();
                let candidate = layout.with_flat(&p).project()?;
                let ch = self.scenario.channels(&candidate)?;
                let (trial, slacks) = self.trial(state, &ch, &state.sol.w);
                if trial.accepts(&base, goal) {
                    state.sol.layout = candidate;
                    state.channels = ch;
                    state.slacks = slacks;
                    state.position_step = (step * 1.5).min(0.5);
                    return Ok(true);
                }
                step *= 0.5;
            }
        }
        state.position_step = (state.position_step * 0.5).max(1e-6);
        Ok(false)
    }

    /// Feasible-direction ascent on the surrogate. A step is accepted only if
    /// the surrogate does not drop and the sensing shortfall does not grow,
    /// so feasible iterates stay feasible.
    pub fn update_beamformers(&self, state: &mut OptimizerState) -> Result<usize> {
        let accepted = (0..self.cfg.optimizer.inner_steps.max(1))
            .take_while(|_| self.beam_step(state, Goal::Ascend))
            .count();
        state.epsilon_certified = state.sensing_feasible();
        if accepted == 0 {
            return Err(Error::NoFeasibleStep(MAX_HALVINGS));
        }
        Ok(accepted)
    }

    /// One ascent step on the antenna positions under the same acceptance
    /// rule as the beams.
    pub fn update_positions(&self, state: &mut OptimizerState) -> Result<()> {
        if !self.freeze_positions {
            self.position_step(state, Goal::Ascend)?;
            state.epsilon_certified = state.sensing_feasible();
        }
        Ok(())
    }

    /// Drive the sensing shortfall down from the initial point until the
    /// certificate holds or progress stalls. Returns whether it holds.
    pub fn restore(&self, state: &mut OptimizerState) -> Result<bool> {
        for _ in 0..RESTORE_ROUNDS {
            if state.sensing_feasible() {
                break;
            }
            let before = Self::violation(&state.slacks);
            for _ in 0..self.cfg.optimizer.inner_steps.max(1) {
                if !self.beam_step(state, Goal::Restore) {
                    break;
                }
            }
            if !self.freeze_positions {
                self.position_step(state, Goal::Restore)?;
            }
            if Self::violation(&state.slacks) > before * (1.0 - RESTORE_GAIN) {
                break;
            }
        }
        state.step = self.cfg.optimizer.step;
        state.position_step = self.cfg.optimizer.position_step;
        state.epsilon_certified = state.sensing_feasible();
        Ok(state.epsilon_certified)
    }

    /// Optimise from MRT beams; the robust mode also starts from the
    /// non-robust optimum and keeps the better of the two runs.
    pub fn run(&self, budget: usize) -> Result<OptimizerState> {
        let cold = self.run_from(cold_layout(self)?, budget)?;
        if self.mode == Mode::NonRobust || budget == 0 {
            return Ok(cold);
        }
        let nominal = Optimizer {
            mode: Mode::NonRobust,
            ..*self
        };
        let seed = nominal.run_from(cold_layout(self)?, budget)?;
        let warm = self.run_from_state(self.state_at(seed.sol)?, budget)?;
        let better = (warm.sensing_feasible(), self.max_min_rate(&warm))
            > (cold.sensing_feasible(), self.max_min_rate(&cold));
        Ok(if better { warm } else { cold })
    }

    pub fn run_from(&self, layout: MaLayout, budget: usize) -> Result<OptimizerState> {
        self.run_from_state(self.initial_state(layout)?, budget)
    }

    pub fn run_from_state(
        &self,
        mut state: OptimizerState,
        budget: usize,
    ) -> Result<OptimizerState> {
        if budget == 0 {
            return Ok(state);
        }
        self.restore(&mut state)?;
        self.update_auxiliaries(&mut state);
        state.objective_history.push(self.worst_case_rate(&state));
        for _ in 0..budget {
            self.update_epsilon(&mut state);
            self.update_auxiliaries(&mut state);
            match self.update_beamformers(&mut state) {
                Ok(_) | Err(Error::NoFeasibleStep(_)) => {}
                Err(e) => return Err(e),
            }
            self.update_auxiliaries(&mut state);
            self.update_positions(&mut state)?;
            self.update_auxiliaries(&mut state);
            state.iterations += 1;
            let rate = self.worst_case_rate(&state);
            let prev = *state.objective_history.last().expect("seeded above");
            state.objective_history.push(rate);
            if (rate - prev).abs() < self.cfg.optimizer.tolerance {
                break;
            }
        }
        Ok(state)
    }
}

fn cold_layout(opt: &Optimizer) -> Result<MaLayout> {
    if opt.freeze_positions {
        opt.cfg.half_wavelength_layout()
    } else {
        opt.cfg.spread_layout()
    }
}

/// Beamforming-only optimisation on a fixed half-wavelength array.
pub fn fpa_baseline(
    cfg: &SystemConfig,
    scenario: &Scenario,
    mode: Mode,
    budget: usize,
) -> Result<OptimizerState> {
    Optimizer::new(cfg, scenario, mode)
        .frozen_positions()
        .run(budget)
}
