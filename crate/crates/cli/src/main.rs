//! `evq`: energy-feasible dynamic equilibria from the command line.
//!
//! Exit codes: 0 on success or convergence, 1 on any error, 2 when a solve
//! stops at its iteration or time limit (results are still written).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use evq_cli::config::{InitKind, RunConfigFile, RunSettings};
use evq_cli::run::{self, SolveRequest};
use evq_core::equilibrium::Termination;
use evq_core::{EnumerationLimits, NormKind, TerminationMode};

#[derive(Parser)]
#[command(name = "evq", version, about = "Energy-feasible dynamic traffic equilibria for electric vehicles")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "EVQ_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the energy-feasible walks of every commodity.
    Enumerate {
        #[arg(long)]
        instance: PathBuf,
        /// Write per-commodity catalogs into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Compute an approximate equilibrium and export the results.
    Solve(SolveArgs),
    /// Convert a TNTP network file into an instance file.
    ImportTntp {
        /// TNTP `_net.tntp` file.
        #[arg(long)]
        net: PathBuf,
        /// JSON with commodities, edge attributes and stations.
        #[arg(long)]
        attrs: Option<PathBuf>,
        /// Factor applied to TNTP capacities.
        #[arg(long, default_value_t = 1.0)]
        capacity_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LimitArgs {
    /// Override the computed visit bound.
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    max_walks: Option<usize>,
    #[arg(long)]
    max_length: Option<usize>,
}

impl LimitArgs {
    fn limits(&self) -> EnumerationLimits {
        let d = EnumerationLimits::default();
        EnumerationLimits {
            kappa: self.kappa.or(d.kappa),
            max_walks: self.max_walks.unwrap_or(d.max_walks),
            max_length: self.max_length.unwrap_or(d.max_length),
            ..d
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; a numeric suffix is added if it exists.
    #[arg(long, default_value = "evq-out")]
    out: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    /// Number of time intervals N.
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    /// `walk_flows.csv` used with `--init file`.
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_norm)]
    norm: Option<NormKind>,
    #[arg(long, value_parser = parse_termination)]
    termination: Option<TerminationMode>,
    /// Write 0 instead of measured wall times so reruns are byte-identical.
    #[arg(long)]
    no_timings: bool,
    /// Also write per-edge breakpoints to queues.csv.
    #[arg(long)]
    dump_queues: bool,
    #[command(flatten)]
    limits: LimitArgs,
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    match s {
        "l1" => Ok(NormKind::L1),
        "l2" => Ok(NormKind::L2),
        _ => Err(format!("unknown norm {s:?} (expected l1 or l2)")),
    }
}

fn parse_termination(s: &str) -> Result<TerminationMode, String> {
    match s {
        "abs" => Ok(TerminationMode::Abs),
        "rel" => Ok(TerminationMode::Rel),
        _ => Err(format!("unknown termination {s:?} (expected abs or rel)")),
    }
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let mut settings = RunSettings::default();
    if let Some(path) = &args.config {
        settings = settings.merge(&RunConfigFile::read(path)?);
    }
    let flags = RunConfigFile {
        epsilon: args.epsilon,
        alpha0: args.alpha0,
        intervals: args.intervals,
        max_iters: args.max_iters,
        time_limit_s: args.time_limit_s,
        initialization: args.init,
        initial_flow: args.init_file.clone(),
        termination_mode: args.termination,
        norm: args.norm,
    };
    let settings = settings.merge(&flags);
    let outcome = run::solve(&SolveRequest {
        instance: &args.instance,
        config: args.config.as_deref(),
        out: &args.out,
        settings,
        limits: args.limits.limits(),
        timings: !args.no_timings,
        dump_queues: args.dump_queues,
    })?;
    let status = match outcome.termination {
        Termination::Converged => "converged",
        Termination::IterationLimit => "iteration limit",
        Termination::TimeLimit => "time limit",
    };
    println!(
        "{status} after {} iterations, QoPI {:.6e}; results in {}",
        outcome.iterations,
        outcome.qopi,
        outcome.dir.display()
    );
    Ok(if outcome.termination == Termination::Converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn execute(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot size the thread pool")?;
    }
    match cli.command {
        Command::Enumerate { instance, out, limits } => {
            let (net, catalog, dir) = run::enumerate(&instance, &limits.limits(), out.as_deref())?;
            for (c, entry) in net.commodities.iter().zip(&catalog.entries) {
                let note = if entry.stats.truncated { " (truncated)" } else { "" };
                println!("{}: {} walks{note}", c.name, entry.walks.len());
            }
            if catalog.num_commodities() > 1 {
                println!("total: {} walks", catalog.total_walks());
            }
            if let Some(dir) = dir {
                println!("catalog written to {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(args) => solve(&args),
        Command::ImportTntp { net, attrs, capacity_scale, out } => {
            let inst = run::import(&net, attrs.as_deref(), capacity_scale, &out)?;
            println!("{} nodes, {} edges written to {}", inst.nodes.len(), inst.edges.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
