use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use maisac::acceptance::run_all;
use maisac::experiment::{read_csv, summarize, write_summary};
use maisac::{load_config, run_experiment, write_csv, Method, Plan, Sweep, SweepParam};
use maisac_core::config::SystemConfig;
use maisac_core::fp::Mode;
use maisac_gnn::params::{ModelSpec, Params};
use maisac_gnn::train::train;

/// Radii used by `plotdata` when no input CSV is given.
const DEFAULT_EPSILONS: [f64; 7] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

#[derive(Parser)]
#[command(name = "maisac", version, about = "Movable-antenna ISAC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; the built-in desk-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single scenario seed (also seeds GNN training).
    #[arg(long, global = true, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Scenario seeds as `a..b` or a comma list.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Methods to run; repeat or separate with commas.
    #[arg(long = "method", global = true, value_delimiter = ',')]
    methods: Vec<String>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate methods at the configured parameters.
    Run(Common),
    /// Evaluate methods over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// epsilon, max_power_w or crlb_threshold.
        #[arg(long, default_value = "epsilon")]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Train a GNN policy and write its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = TrainMode::Robust)]
        mode: TrainMode,
        /// Per-step loss CSV.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Run the acceptance checks.
    Validate(Common),
    /// Per-method means over sweep values, ready for plotting.
    Plotdata {
        #[command(flatten)]
        common: Common,
        /// Results CSV from `run` or `sweep`; runs an epsilon sweep when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMode {
    Robust,
    Nonrobust,
}

impl Common {
    fn config(&self) -> anyhow::Result<SystemConfig> {
        match &self.config {
            Some(p) => Ok(load_config(p)?),
            None => Ok(SystemConfig::default()),
        }
    }

    fn seeds(&self) -> anyhow::Result<Vec<u64>> {
        if let Some(s) = self.seed {
            return Ok(vec![s]);
        }
        match &self.seeds {
            None => Ok((0..5).collect()),
            Some(text) => parse_seeds(text),
        }
    }

    fn methods(&self) -> anyhow::Result<Vec<Method>> {
        if self.methods.is_empty() {
            return Ok(Method::STANDARD.to_vec());
        }
        self.methods
            .iter()
            .map(|m| m.trim().parse::<Method>().map_err(Into::into))
            .collect()
    }

    fn plan(&self, sweep: Sweep) -> anyhow::Result<Plan> {
        Ok(Plan {
            methods: self.methods()?,
            sweep,
            seeds: self.seeds()?,
            train_seed: self.seed.unwrap_or(0),
        })
    }

    fn output(&self) -> anyhow::Result<Box<dyn Write>> {
        open_output(self.out.as_deref())
    }
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range `{text}`");
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

fn run_and_write(cfg: &SystemConfig, plan: &Plan, common: &Common) -> anyhow::Result<()> {
    let result = run_experiment(cfg, plan);
    for r in result.rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("warning: {} seed {} at {}={}: {}", r.method, r.seed, r.sweep, r.sweep_value, r.error);
    }
    write_csv(&result.rows, common.output()?)?;
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            run_and_write(&cfg, &common.plan(Sweep::at_config(&cfg))?, &common)?;
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.config()?;
            let sweep = Sweep {
                param: param.parse::<SweepParam>()?,
                values,
            };
            run_and_write(&cfg, &common.plan(sweep)?, &common)?;
        }
        Command::Train { common, mode, losses } => {
            let cfg = common.config()?;
            let mode = match mode {
                TrainMode::Robust => Mode::Robust,
                TrainMode::Nonrobust => Mode::NonRobust,
            };
            let seed = common.seed.unwrap_or(0);
            let init = Params::init(ModelSpec::from_config(&cfg), seed);
            let report = train(&cfg, init, mode, cfg.gnn.steps, seed)?;
            common.output()?.write_all(report.params.to_text().as_bytes())?;
            eprintln!(
                "trained {} steps over {} epochs{}",
                report.losses.len(),
                report.epochs,
                if report.stopped_early { ", stopped early" } else { "" }
            );
            if let Some(path) = losses {
                let mut w = csv::Writer::from_writer(open_output(Some(&path))?);
                w.write_record(["step", "loss"])?;
                for (i, l) in report.losses.iter().enumerate() {
                    w.write_record([i.to_string(), l.to_string()])?;
                }
                w.flush()?;
            }
        }
        Command::Validate(common) => {
            let cfg = common.config()?;
            let checks = run_all(&cfg);
            let mut out = common.output()?;
            for c in &checks {
                writeln!(out, "{c}")?;
            }
            let passed = checks.iter().filter(|c| c.passed).count();
            writeln!(out, "{passed}/{} passed", checks.len())?;
            return Ok(passed == checks.len());
        }
        Command::Plotdata { common, input } => {
            let rows = match input {
                Some(path) => read_csv(File::open(&path).with_context(|| format!("cannot open {}", path.display()))?)?,
                None => {
                    let cfg = common.config()?;
                    run_experiment(&cfg, &common.plan(Sweep::epsilon(&DEFAULT_EPSILONS))?).rows
                }
            };
            write_summary(&summarize(&rows), common.output()?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
