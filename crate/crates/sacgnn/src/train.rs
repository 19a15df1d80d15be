//! Mini-batch Adam training over randomly drawn scenarios, and inference.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use maisac_core::comm::Solution;
use maisac_core::config::SystemConfig;
use maisac_core::fp::Mode;
use maisac_core::geometry::{MaLayout, Scenario};
use maisac_core::numerics::{rng, Real};
use maisac_core::numerics::tape::Tape;

use crate::graph::{build_graph, HetGraph};
use crate::loss::{design_radius, loss, LossParts};
use crate::model::{policy, project, Projected};
use crate::params::Params;
use crate::{GnnError, Result};

/// Training scenarios use seeds from here on, disjoint from evaluation seeds.
pub const TRAIN_SEED_BASE: u64 = 1 << 40;
const SHUFFLE_STREAM: u64 = 43;
const DECAY: f64 = 0.995;
const DECAY_EVERY: usize = 100;
/// Training aborts once the batch loss exceeds this multiple of the initial
/// loss magnitude.
const DIVERGENCE_FACTOR: f64 = 10.0;

/// One scenario with its input graph built at the base layout.
#[derive(Debug, Clone)]
pub struct Sample {
    pub scenario: Scenario,
    pub graph: HetGraph,
    pub base: MaLayout,
}

impl Sample {
    pub fn new(cfg: &SystemConfig, scenario: Scenario, mode: Mode) -> Result<Self> {
        let base = cfg.spread_layout()?;
        let channels = scenario.channels(&base)?;
        let graph = build_graph(cfg, &scenario, &channels, &base, design_radius(cfg, mode))?;
        Ok(Self { scenario, graph, base })
    }
}

pub fn training_set(cfg: &SystemConfig, mode: Mode, seed: u64) -> Result<Vec<Sample>> {
    (0..cfg.gnn.samples as u64)
        .map(|i| Sample::new(cfg, cfg.scenario(TRAIN_SEED_BASE + seed * 1_000_000 + i)?, mode))
        .collect()
}

fn decide<S: Real>(
    cfg: &SystemConfig,
    params: &Params,
    values: &[S],
    sample: &Sample,
) -> Result<Projected<S>> {
    let out = policy(&sample.graph, &params.arch, values, cfg, &sample.scenario, &sample.base)?;
    project(&out, &sample.base, cfg.power.max_power_w)
}

/// Loss parts of the current policy on `sample`, without gradients.
pub fn evaluate(cfg: &SystemConfig, params: &Params, sample: &Sample, mode: Mode) -> Result<LossParts<f64>> {
    let d = decide(cfg, params, &params.values, sample)?;
    loss(cfg, &sample.scenario, &d, mode, cfg.gnn.penalty)
}

/// Loss and its gradient with respect to every parameter.
pub fn gradient(cfg: &SystemConfig, params: &Params, sample: &Sample, mode: Mode) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let vars = tape.vars(&params.values);
    let d = decide(cfg, params, &vars, sample)?;
    let parts = loss(cfg, &sample.scenario, &d, mode, cfg.gnn.penalty)?;
    Ok((parts.total.value(), tape.gradient(parts.total).wrt_all(&vars)))
}

pub fn infer(cfg: &SystemConfig, params: &Params, scenario: &Scenario, mode: Mode) -> Result<Solution> {
    let sample = Sample::new(cfg, scenario.clone(), mode)?;
    Ok(decide(cfg, params, &params.values, &sample)?.to_solution(&sample.base))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
            x[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: Params,
    /// Mean batch loss at every step, before the update.
    pub losses: Vec<f64>,
    pub epochs: usize,
    pub stopped_early: bool,
}

/// Learning rate after `step` updates.
pub fn learning_rate(base: f64, step: usize) -> f64 {
    base * DECAY.powi((step / DECAY_EVERY) as i32)
}

/// Train for at most `steps` updates on the scenarios of [`training_set`].
///
/// Stops early after `cfg.gnn.patience` epochs without a new best epoch loss.
pub fn train(cfg: &SystemConfig, mut params: Params, mode: Mode, steps: usize, seed: u64) -> Result<TrainReport> {
    let mut report = TrainReport {
        params: params.clone(),
        losses: Vec::new(),
        epochs: 0,
        stopped_early: false,
    };
    if steps == 0 {
        return Ok(report);
    }
    let data = training_set(cfg, mode, seed)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut r = rng(seed, SHUFFLE_STREAM);
    let mut adam = Adam::new(params.values.len());
    let (mut best, mut stale) = (f64::INFINITY, 0);
    let mut initial = None;
    let mut step = 0;
    'outer: while step < steps {
        order.shuffle(&mut r);
        let mut epoch_total = 0.0;
        let mut epoch_batches = 0;
        for batch in order.chunks(cfg.gnn.batch) {
            if step >= steps {
                break 'outer;
            }
            let results = batch
                .par_iter()
                .map(|&i| gradient(cfg, &params, &data[i], mode))
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / results.len() as f64;
            let mut grad = vec![0.0; params.values.len()];
            let mut batch_loss = 0.0;
            for (l, g) in &results {
                batch_loss += l * scale;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi * scale;
                }
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(GnnError::NonFinite(step));
            }
            let first = *initial.get_or_insert(batch_loss);
            if batch_loss > DIVERGENCE_FACTOR * f64::abs(first) {
                return Err(GnnError::Diverged {
                    step,
                    loss: batch_loss,
                    initial: first,
                });
            }
            report.losses.push(batch_loss);
            adam.step(&mut params.values, &grad, learning_rate(cfg.gnn.learning_rate, step));
            epoch_total += batch_loss;
            epoch_batches += 1;
            step += 1;
        }
        report.epochs += 1;
        let epoch_loss = epoch_total / epoch_batches.max(1) as f64;
        if epoch_loss < best {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.gnn.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    report.params = params;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelSpec;

    #[test]
    fn schedule_decays_every_hundred_steps() {
        assert_eq!(learning_rate(0.01, 0), 0.01);
        assert_eq!(learning_rate(0.01, 99), 0.01);
        assert!((learning_rate(0.01, 100) - 0.00995).abs() < 1e-15);
        assert!((learning_rate(0.01, 250) - 0.01 * 0.995f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_leave_parameters_unchanged() {
        let cfg = SystemConfig::default();
        let p = Params::init(ModelSpec::from_config(&cfg), 0);
        let r = train(&cfg, p.clone(), Mode::Robust, 0, 0).unwrap();
        assert_eq!(r.params, p);
        assert!(r.losses.is_empty());
    }

    #[test]
    fn inference_is_feasible() {
        let cfg = SystemConfig::default();
        let p = Params::init(ModelSpec::from_config(&cfg), 0);
        let sol = infer(&cfg, &p, &cfg.scenario(3).unwrap(), Mode::Robust).unwrap();
        assert!(sol.power_feasible(cfg.power.max_power_w));
        sol.layout.validate().unwrap();
    }
}
