//! Method x sweep point x seed grids, their evaluation and CSV persistence.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use maisac_core::comm::Solution;
use maisac_core::config::SystemConfig;
use maisac_core::fp::{fpa_baseline, Mode, Optimizer};
use maisac_core::metrics::{evaluate, Evaluation};
use maisac_gnn::params::{ModelSpec, Params};
use maisac_gnn::train::{infer, train};

use crate::config::{config_hash, dump_config};
use crate::{HarnessError, Result};

/// Version tag written on every row.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    SacgnnRobust,
    SacgnnNonRobust,
    Fp,
    FpNonRobust,
    Fpa,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SacgnnRobust,
        Method::SacgnnNonRobust,
        Method::Fp,
        Method::FpNonRobust,
        Method::Fpa,
    ];
    /// Robust and non-robust GNN, MA optimizer, fixed-position baseline.
    pub const STANDARD: [Method; 4] = [Method::SacgnnRobust, Method::SacgnnNonRobust, Method::Fp, Method::Fpa];

    pub fn tag(self) -> &'static str {
        match self {
            Method::SacgnnRobust => "sacgnn-robust",
            Method::SacgnnNonRobust => "sacgnn-nonrobust",
            Method::Fp => "fp",
            Method::FpNonRobust => "fp-nonrobust",
            Method::Fpa => "fpa",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Method::SacgnnNonRobust | Method::FpNonRobust => Mode::NonRobust,
            _ => Mode::Robust,
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Method::SacgnnRobust | Method::SacgnnNonRobust)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| HarnessError::Usage(format!("unknown method `{s}`")))
    }
}

/// Configuration parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    MaxPower,
    CrlbThreshold,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::MaxPower => "max_power_w",
            SweepParam::CrlbThreshold => "crlb_threshold",
        }
    }

    pub fn get(self, cfg: &SystemConfig) -> f64 {
        match self {
            SweepParam::Epsilon => cfg.amplifier.epsilon,
            SweepParam::MaxPower => cfg.power.max_power_w,
            SweepParam::CrlbThreshold => cfg.sensing.crlb_threshold,
        }
    }

    fn set(self, cfg: &mut SystemConfig, v: f64) {
        match self {
            SweepParam::Epsilon => cfg.amplifier.epsilon = v,
            SweepParam::MaxPower => cfg.power.max_power_w = v,
            SweepParam::CrlbThreshold => cfg.sensing.crlb_threshold = v,
        }
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        [SweepParam::Epsilon, SweepParam::MaxPower, SweepParam::CrlbThreshold]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| HarnessError::Usage(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    /// The configured value only.
    pub fn at_config(cfg: &SystemConfig) -> Self {
        Self {
            param: SweepParam::Epsilon,
            values: vec![cfg.amplifier.epsilon],
        }
    }

    pub fn epsilon(values: &[f64]) -> Self {
        Self {
            param: SweepParam::Epsilon,
            values: values.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    /// Seed of GNN initialisation and training data.
    pub train_seed: u64,
}

/// One evaluation cell. Metric columns are empty when `status` is `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub config_hash: String,
    pub version: String,
    pub method: String,
    pub seed: u64,
    pub sweep: String,
    pub sweep_value: f64,
    pub status: String,
    pub error: String,
    pub nominal_rate: Option<f64>,
    pub worst_case_rate: Option<f64>,
    pub adversarial_rate: Option<f64>,
    pub adversarial_phase: Option<f64>,
    pub crlb_nominal: Option<f64>,
    pub crlb_worst_case: Option<f64>,
    pub epsilon_star: Option<f64>,
    /// Optimizer rounds, or training steps for learned methods.
    pub iterations: Option<usize>,
    pub power_feasible: Option<bool>,
    pub layout_feasible: Option<bool>,
    pub sensing_feasible: Option<bool>,
    pub feasible: Option<bool>,
}

pub const COLUMNS: [&str; 20] = [
    "config_hash",
    "version",
    "method",
    "seed",
    "sweep",
    "sweep_value",
    "status",
    "error",
    "nominal_rate",
    "worst_case_rate",
    "adversarial_rate",
    "adversarial_phase",
    "crlb_nominal",
    "crlb_worst_case",
    "epsilon_star",
    "iterations",
    "power_feasible",
    "layout_feasible",
    "sensing_feasible",
    "feasible",
];

impl Row {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Solution and evaluation of one successful cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub solution: Solution,
    pub evaluation: Evaluation,
    pub epsilon_star: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
    /// Parallel to `rows`; `None` for failed cells.
    pub outcomes: Vec<Option<CellOutcome>>,
}

#[derive(Debug, Clone)]
struct Policy {
    params: Params,
    steps: usize,
}

/// Training is keyed by the configuration the policy sees, so non-robust
/// policies are shared across radius sweeps.
fn training_key(cfg: &SystemConfig, mode: Mode) -> String {
    let mut c = cfg.clone();
    if mode == Mode::NonRobust {
        c.amplifier.epsilon = 0.0;
    }
    format!("{mode:?}\n{}", dump_config(&c))
}

fn train_policy(cfg: &SystemConfig, mode: Mode, seed: u64) -> Result<Policy> {
    let init = Params::init(ModelSpec::from_config(cfg), seed);
    let report = train(cfg, init, mode, cfg.gnn.steps, seed)?;
    Ok(Policy {
        steps: report.losses.len(),
        params: report.params,
    })
}

fn run_cell(cfg: &SystemConfig, method: Method, seed: u64, policy: Option<&Policy>) -> Result<CellOutcome> {
    let scenario = cfg.scenario(seed)?;
    let eps = cfg.amplifier.epsilon;
    let budget = cfg.optimizer.iterations;
    let (solution, channels, epsilon_star, iterations) = match method {
        Method::SacgnnRobust | Method::SacgnnNonRobust => {
            let policy = policy.expect("policies are trained before cells run");
            let sol = infer(cfg, &policy.params, &scenario, method.mode())?;
            let ch = scenario.channels(&sol.layout)?;
            (sol, ch, None, policy.steps)
        }
        Method::Fp | Method::FpNonRobust => {
            let state = Optimizer::new(cfg, &scenario, method.mode()).run(budget)?;
            (state.sol, state.channels, Some(state.epsilon_star), state.iterations)
        }
        Method::Fpa => {
            let state = fpa_baseline(cfg, &scenario, method.mode(), budget)?;
            (state.sol, state.channels, Some(state.epsilon_star), state.iterations)
        }
    };
    let evaluation = evaluate(cfg, &channels, &solution, eps);
    Ok(CellOutcome {
        solution,
        evaluation,
        epsilon_star,
        iterations,
    })
}

fn row(hash: &str, method: Method, seed: u64, sweep: &Sweep, value: f64, outcome: &Result<CellOutcome>) -> Row {
    let mut r = Row {
        config_hash: hash.to_string(),
        version: VERSION.to_string(),
        method: method.tag().to_string(),
        seed,
        sweep: sweep.param.name().to_string(),
        sweep_value: value,
        status: "ok".into(),
        error: String::new(),
        nominal_rate: None,
        worst_case_rate: None,
        adversarial_rate: None,
        adversarial_phase: None,
        crlb_nominal: None,
        crlb_worst_case: None,
        epsilon_star: None,
        iterations: None,
        power_feasible: None,
        layout_feasible: None,
        sensing_feasible: None,
        feasible: None,
    };
    match outcome {
        Ok(o) => {
            let e = &o.evaluation;
            r.nominal_rate = Some(e.nominal_rate);
            r.worst_case_rate = Some(e.worst_case_rate);
            r.adversarial_rate = Some(e.adversarial_rate);
            r.adversarial_phase = Some(e.adversarial_phase);
            r.crlb_nominal = Some(e.crlb_nominal);
            r.crlb_worst_case = Some(e.crlb_worst_case);
            r.epsilon_star = o.epsilon_star;
            r.iterations = Some(o.iterations);
            r.power_feasible = Some(e.power_feasible);
            r.layout_feasible = Some(e.layout_feasible);
            r.sensing_feasible = Some(e.sensing_feasible);
            r.feasible = Some(e.feasible());
        }
        Err(err) => {
            r.status = "error".into();
            r.error = err.to_string();
        }
    }
    r
}

/// Evaluate every method at every sweep point and seed.
///
/// GNN policies are trained once per distinct training configuration before
/// the cells run. Cells run in parallel; rows come back ordered by sweep
/// point, then seed, then method as listed in the plan. A failing cell is
/// recorded as an `error` row and the run continues.
pub fn run_experiment(cfg: &SystemConfig, plan: &Plan) -> ExperimentResult {
    let hash = config_hash(cfg);
    let points: Vec<(f64, Result<SystemConfig>)> = plan
        .sweep
        .values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            plan.sweep.param.set(&mut c, v);
            (v, c.validate().map(|_| c).map_err(HarnessError::from))
        })
        .collect();

    let mut policies: BTreeMap<String, std::result::Result<Policy, String>> = BTreeMap::new();
    for (_, c) in &points {
        let Ok(c) = c else { continue };
        for m in plan.methods.iter().filter(|m| m.is_learned()) {
            let key = training_key(c, m.mode());
            if !policies.contains_key(&key) {
                let p = train_policy(c, m.mode(), plan.train_seed).map_err(|e| e.to_string());
                policies.insert(key, p);
            }
        }
    }

    let cells: Vec<(usize, u64, Method)> = (0..points.len())
        .flat_map(|p| plan.seeds.iter().flat_map(move |&s| plan.methods.iter().map(move |&m| (p, s, m))))
        .collect();
    let results: Vec<(Row, Option<CellOutcome>)> = cells
        .par_iter()
        .map(|&(p, seed, method)| {
            let (value, c) = &points[p];
            let outcome = match c {
                Err(e) => Err(HarnessError::Cell(e.to_string())),
                Ok(c) => {
                    let policy = method
                        .is_learned()
                        .then(|| &policies[&training_key(c, method.mode())]);
                    match policy {
                        Some(Err(msg)) => Err(HarnessError::Cell(format!("training failed: {msg}"))),
                        Some(Ok(pol)) => run_cell(c, method, seed, Some(pol)),
                        None => run_cell(c, method, seed, None),
                    }
                }
            };
            let r = row(&hash, method, seed, &plan.sweep, *value, &outcome);
            (r, outcome.ok())
        })
        .collect();
    let (rows, outcomes) = results.into_iter().unzip();
    ExperimentResult { rows, outcomes }
}

/// Write rows with a header line; an empty slice gives a header-only file.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(HarnessError::Usage("input is not a results CSV".into()));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Per (sweep value, method) averages of the successful rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub sweep: String,
    pub sweep_value: f64,
    pub method: String,
    pub cells: usize,
    pub failed: usize,
    pub feasible: usize,
    pub mean_nominal_rate: Option<f64>,
    pub mean_worst_case_rate: Option<f64>,
    pub mean_adversarial_rate: Option<f64>,
}

pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut groups: Vec<((String, f64, String), Vec<&Row>)> = Vec::new();
    for r in rows {
        let key = (r.sweep.clone(), r.sweep_value, r.method.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((sweep, sweep_value, method), g)| {
            let ok: Vec<&Row> = g.iter().copied().filter(|r| r.is_ok()).collect();
            let mean = |f: fn(&Row) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            Summary {
                sweep,
                sweep_value,
                method,
                cells: g.len(),
                failed: g.len() - ok.len(),
                feasible: ok.iter().filter(|r| r.feasible == Some(true)).count(),
                mean_nominal_rate: mean(|r| r.nominal_rate),
                mean_worst_case_rate: mean(|r| r.worst_case_rate),
                mean_adversarial_rate: mean(|r| r.adversarial_rate),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}
