//! The `enumerate`, `solve` and `import-tntp` commands.

use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use evq_core::equilibrium::{Initialization, Termination};
use evq_core::instance::{import_tntp, load_instance, InstanceFile, TntpAttrs};
use evq_core::{run_fixed_point, Discretization, EnumerationLimits, Network, WalkCatalog};
use log::info;
use serde::Serialize;

use crate::config::{InitKind, RunSettings};
use crate::export::{read_rows, walk_flow_from_rows, write_catalog, write_results, WalkFlowRow};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub instance: PathBuf,
    pub config: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// The solver uses no randomness; equal inputs give equal CSVs.
    pub seedless_deterministic: bool,
    /// Whether `wall_time` in `convergence.csv` holds real timings.
    pub timings: bool,
    pub tool_version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub threads: usize,
    pub settings: RunSettings,
}

/// Creates `base`, or `base-1`, `base-2`, ... if it is taken.
pub fn unique_dir(base: &Path) -> Result<PathBuf> {
    if let Some(parent) = base.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let name = base.file_name().context("output path has no file name")?.to_string_lossy().into_owned();
    for k in 0.. {
        let dir = if k == 0 { base.to_path_buf() } else { base.with_file_name(format!("{name}-{k}")) };
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("cannot create {}", dir.display())),
        }
    }
    unreachable!()
}

pub fn load(instance: &Path) -> Result<Network> {
    load_instance(instance).with_context(|| format!("invalid instance {}", instance.display()))
}

/// Enumerates every commodity's walks; writes the catalog if `out` is given.
pub fn enumerate(
    instance: &Path,
    limits: &EnumerationLimits,
    out: Option<&Path>,
) -> Result<(Network, WalkCatalog, Option<PathBuf>)> {
    let net = load(instance)?;
    let catalog = WalkCatalog::build(&net, limits)?;
    let dir = match out {
        Some(base) => {
            let dir = unique_dir(base)?;
            write_catalog(&dir, &net, &catalog)?;
            Some(dir)
        }
        None => None,
    };
    Ok((net, catalog, dir))
}

pub struct SolveRequest<'a> {
    pub instance: &'a Path,
    pub config: Option<&'a Path>,
    pub out: &'a Path,
    pub settings: RunSettings,
    pub limits: EnumerationLimits,
    pub timings: bool,
    pub dump_queues: bool,
}

pub struct SolveOutcome {
    pub dir: PathBuf,
    pub termination: Termination,
    pub iterations: usize,
    pub qopi: f64,
}

pub fn solve(req: &SolveRequest<'_>) -> Result<SolveOutcome> {
    let net = load(req.instance)?;
    let s = &req.settings;
    if s.initialization == InitKind::File && s.initial_flow.is_none() {
        bail!("initialization \"file\" needs an initial flow file");
    }

    let dir = unique_dir(req.out)?;
    let manifest = RunManifest {
        instance: req.instance.to_path_buf(),
        config: req.config.map(Path::to_path_buf),
        output_dir: dir.clone(),
        seedless_deterministic: true,
        timings: req.timings,
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        threads: rayon::current_num_threads(),
        settings: s.clone(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let catalog = WalkCatalog::build(&net, &req.limits)?;
    write_catalog(&dir, &net, &catalog)?;

    let init = match (s.initialization, &s.initial_flow) {
        (InitKind::Shortest, _) => Initialization::ShortestFreeFlow,
        (InitKind::Uniform, _) => Initialization::Uniform,
        (InitKind::File, path) => {
            let path = path.as_ref().expect("checked above");
            let rows: Vec<WalkFlowRow> = read_rows(path)?;
            let sizes: Vec<usize> = catalog.entries.iter().map(|e| e.walks.len()).collect();
            let grid = Discretization::new(net.horizon, s.intervals);
            Initialization::Given(walk_flow_from_rows(&rows, &net, grid, &sizes)?)
        }
    };

    let result = run_fixed_point(&net, &catalog, &s.fixed_point_config(), &init)?;
    write_results(&dir, &net, &catalog, &result, req.timings, req.dump_queues)?;
    info!("results written to {}", dir.display());
    Ok(SolveOutcome {
        dir,
        termination: result.termination,
        iterations: result.history.len(),
        qopi: result.qopi,
    })
}

/// Converts a TNTP network plus an optional attrs document into an instance
/// file at `out`.
pub fn import(net_file: &Path, attrs_file: Option<&Path>, capacity_scale: f64, out: &Path) -> Result<InstanceFile> {
    let net_text = std::fs::read_to_string(net_file).with_context(|| format!("cannot read {}", net_file.display()))?;
    let attrs = match attrs_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            TntpAttrs::from_json(&text).with_context(|| format!("malformed attrs {}", p.display()))?
        }
        None => TntpAttrs::default(),
    };
    let instance = import_tntp(&net_text, attrs, capacity_scale)?;
    // Catch dangling node or commodity references before writing.
    if !instance.commodities.is_empty() || !instance.edge_attrs.is_empty() {
        instance.to_network()?;
    }
    std::fs::write(out, instance.to_json() + "\n").with_context(|| format!("cannot write {}", out.display()))?;
    Ok(instance)
}
