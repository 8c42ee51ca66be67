//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigValues;
use crate::controller::ControllerState;
use crate::cost::{macro_mac, MacroCostConfig};
use crate::engine::{
    build_evaluator, run_random, run_search, run_search_from, OpHistogram, RunConfig, SearchOutcome,
};
use crate::error::{MonasError, Result};
use crate::evaluator::Evaluator;
use crate::report::{self, Summary};
use crate::space::Architecture;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "monas",
    version,
    about = "Multi-objective neural architecture search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the controller and record every sampled architecture.
    Search {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a saved controller checkpoint.
        #[arg(long, value_name = "FILE")]
        resume: Option<PathBuf>,
    },
    /// Uniform random search with the same outputs as `search`.
    Random {
        #[command(flatten)]
        run: RunArgs,
    },
    /// MAC count of a macro architecture file.
    Mac {
        #[arg(long, value_name = "FILE")]
        arch: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        channels: Option<u64>,
        #[arg(long)]
        resolution: Option<u64>,
        #[arg(long)]
        input_channels: Option<u64>,
    },
    /// Pareto front of a results file.
    Pareto {
        #[arg(long, value_name = "FILE")]
        results: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Draw architectures from a trained controller without updating it.
    Sample {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat key-value configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    space: Option<String>,
    /// mixed, power_constraint, accuracy_constraint or mac_constraint.
    #[arg(long)]
    reward: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// surrogate or lookup.
    #[arg(long)]
    evaluator: Option<String>,
    #[arg(long, value_name = "FILE")]
    fixture: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Any configuration key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn values(&self) -> Result<ConfigValues> {
        let mut v = match &self.config {
            Some(p) => ConfigValues::load(p)?,
            None => ConfigValues::new(),
        };
        let flags = [
            ("space", &self.space),
            ("reward.kind", &self.reward),
            ("reward.alpha", &self.alpha),
            ("reward.threshold", &self.threshold),
            ("run.iterations", &self.iterations),
            ("run.seed", &self.seed),
            ("evaluator.kind", &self.evaluator),
            ("evaluator.fixture", &self.fixture),
            ("adam.lr", &self.lr),
            ("controller.hidden", &self.hidden),
            ("out.dir", &self.out),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                v.set(key, value.as_str())?;
            }
        }
        for pair in &self.set {
            v.set_pair(pair)?;
        }
        Ok(v)
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Search { run, resume } => {
            let cfg = run.values()?.resolve()?;
            let resumed = resume.as_deref().map(load_checkpoint).transpose()?;
            execute(
                &cfg,
                |ev| match resumed {
                    Some(state) => run_search_from(&cfg, ev, state),
                    None => run_search(&cfg, ev),
                },
                "search",
            )
        }
        Command::Random { run } => {
            let cfg = run.values()?.resolve()?;
            execute(&cfg, |ev| run_random(&cfg, ev), "random")
        }
        Command::Mac {
            arch,
            json,
            channels,
            resolution,
            input_channels,
        } => {
            let mut cost = MacroCostConfig::default();
            cost.channels = channels.unwrap_or(cost.channels);
            cost.input_resolution = resolution.unwrap_or(cost.input_resolution);
            cost.input_channels = input_channels.unwrap_or(cost.input_channels);
            cmd_mac(&arch, json, &cost)
        }
        Command::Pareto { results, out } => cmd_pareto(&results, out.as_deref()),
        Command::Sample { checkpoint, n, run } => cmd_sample(&checkpoint, n, &run),
    }
}

fn load_checkpoint(path: &Path) -> Result<ControllerState> {
    if !path.exists() {
        return Err(MonasError::Config(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    ControllerState::load(path)
}

fn execute(
    cfg: &RunConfig,
    search: impl FnOnce(&dyn Evaluator) -> Result<SearchOutcome>,
    mode: &str,
) -> Result<()> {
    let evaluator = build_evaluator(cfg).map_err(|e| match e {
        MonasError::Io(io) => MonasError::Config(format!("evaluator fixture: {io}")),
        other => other,
    })?;
    let outcome = search(evaluator.as_ref())?;
    let summary = Summary::new(mode, cfg, evaluator.descriptor(), &outcome);
    report::write_run(&cfg.out_dir, &summary, &outcome)?;

    let best = &outcome.best;
    println!("best iteration: {}", best.iteration);
    println!("best reward: {}", best.reward);
    println!("best accuracy: {}", best.eval.accuracy);
    println!("best energy: {}", best.eval.energy_joules);
    println!("best architecture: {}", best.arch.to_compact());
    if let Some(rate) = outcome.stats.overall_rate {
        println!("satisfaction rate: {rate}");
    }
    println!("pareto front: {} points", outcome.front.len());
    println!("outputs: {}", cfg.out_dir.display());
    Ok(())
}

fn cmd_mac(path: &Path, json: bool, cost: &MacroCostConfig) -> Result<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| MonasError::Config(format!("cannot read {}: {e}", path.display())))?;
    let arch = match Architecture::parse_text(&text)? {
        Architecture::Macro(m) => m,
        other => {
            return Err(MonasError::InvalidArchitecture(format!(
                "MAC counting needs a macro architecture, got {}",
                other.space()
            )))
        }
    };
    let report = macro_mac(&arch, cost)?;
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        for (layer, mac) in &report.per_layer {
            writeln!(out, "layer{layer}: {mac}")?;
        }
        writeln!(out, "total: {}", report.total_mac)?;
        writeln!(out, "normalized: {}", report.normalized)?;
    }
    Ok(())
}

fn cmd_pareto(results: &Path, out: Option<&Path>) -> Result<()> {
    let file = fs::File::open(results)
        .map_err(|e| MonasError::Config(format!("cannot read {}: {e}", results.display())))?;
    let rows = report::read_results(file)?;
    let front = report::results_front(&rows);
    let bytes = report::write_front(Vec::new(), &front)?;
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn cmd_sample(checkpoint: &Path, n: usize, run: &RunArgs) -> Result<()> {
    let mut state = load_checkpoint(checkpoint)?;
    let mut values = run.values()?;
    if values.get("space").is_none() {
        values.set("space", state.space().kind().to_string())?;
    }
    let cfg = values.resolve()?;
    if cfg.space != state.space().kind() {
        return Err(MonasError::Config(format!(
            "checkpoint is for the {} space, not {}",
            state.space().kind(),
            cfg.space
        )));
    }
    let evaluator = build_evaluator(&cfg)?;
    let space = state.space().clone();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let (seq, _) = state.sample_sequence()?;
        let arch = space.decode(&seq)?;
        let eval = evaluator.evaluate(&arch)?;
        samples.push((seq, arch, eval));
    }

    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join(report::SAMPLES_FILE),
        report::write_samples(Vec::new(), &samples)?,
    )?;
    if let Some(hist) = OpHistogram::from_archs(samples.iter().map(|(_, a, _)| a)) {
        fs::write(
            cfg.out_dir.join(report::OPS_FILE),
            report::write_ops(Vec::new(), &hist)?,
        )?;
        fs::write(
            cfg.out_dir.join(report::LAYERS_FILE),
            report::write_layers(Vec::new(), &hist)?,
        )?;
    }
    let satisfied = samples
        .iter()
        .map(|(_, _, e)| cfg.reward.satisfies(e))
        .collect::<Result<Vec<_>>>()?;
    if n > 0 && satisfied.iter().all(Option::is_some) {
        let k = satisfied.iter().filter(|s| **s == Some(true)).count();
        println!("satisfying: {k}/{n}");
    }
    println!(
        "samples: {}",
        cfg.out_dir.join(report::SAMPLES_FILE).display()
    );
    Ok(())
}
