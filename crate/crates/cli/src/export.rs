//! CSV result files and their loaders.
//!
//! Every file is written through `csv` + `serde`, which prints floats in their
//! shortest round-trip form, so `read(write(x)) == x` holds bit for bit.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use evq_core::equilibrium::{EquilibriumResult, IterationStats};
use evq_core::metrics::{energy_profile, energy_stats, travel_time_stats_from, IntervalMatrix, TimeSeries};
use evq_core::{Discretization, LoadingResult, Network, WalkCatalog, WalkFlow};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>();
    rows.with_context(|| format!("malformed {}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogRow {
    pub walk_index: usize,
    /// Edge ids separated by single spaces.
    pub edge_sequence: String,
    pub free_flow_time: f64,
    pub total_price: f64,
    pub min_battery: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummaryRow {
    pub commodity: String,
    pub walks: usize,
    pub kappa: usize,
    pub truncated: bool,
}

pub fn catalog_rows(net: &Network, catalog: &WalkCatalog, commodity: usize) -> Vec<CatalogRow> {
    catalog
        .walks(commodity)
        .iter()
        .enumerate()
        .map(|(k, w)| CatalogRow {
            walk_index: k,
            edge_sequence: w.edges.iter().map(|&e| net.edges[e].name.as_str()).collect::<Vec<_>>().join(" "),
            free_flow_time: w.free_flow_time,
            total_price: w.total_price,
            min_battery: w.min_battery(),
        })
        .collect()
}

/// Writes `catalog_<commodity>.csv` per commodity and `catalog_summary.csv`.
pub fn write_catalog(dir: &Path, net: &Network, catalog: &WalkCatalog) -> Result<()> {
    let mut summary = Vec::new();
    for (i, entry) in catalog.entries.iter().enumerate() {
        let name = &net.commodities[i].name;
        write_rows(&dir.join(format!("catalog_{}.csv", file_safe(name))), &catalog_rows(net, catalog, i))?;
        summary.push(CatalogSummaryRow {
            commodity: name.clone(),
            walks: entry.walks.len(),
            kappa: entry.kappa,
            truncated: entry.stats.truncated,
        });
    }
    write_rows(&dir.join("catalog_summary.csv"), &summary)
}

/// Commodity ids made safe for file names.
pub fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub delta_h_abs: f64,
    pub delta_h_rel: f64,
    pub qopi: f64,
    pub qopi_abs: f64,
    pub alpha: f64,
    pub wall_time: f64,
}

impl ConvergenceRow {
    pub fn from_stats(s: &IterationStats, timings: bool) -> Self {
        Self {
            k: s.k,
            delta_h_abs: s.delta_h_abs,
            delta_h_rel: s.delta_h_rel,
            qopi: s.qopi,
            qopi_abs: s.qopi_abs,
            alpha: s.alpha,
            wall_time: if timings { s.wall_time } else { 0.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkFlowRow {
    pub commodity: String,
    pub walk_index: usize,
    pub interval: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub commodity: String,
    pub walk_index: usize,
    pub interval: usize,
    pub cost: f64,
}

pub fn walk_flow_rows(net: &Network, flow: &WalkFlow) -> Vec<WalkFlowRow> {
    matrix_rows(net, &flow.rates)
        .map(|(commodity, walk_index, interval, rate)| WalkFlowRow { commodity, walk_index, interval, rate })
        .collect()
}

pub fn cost_rows(net: &Network, costs: &IntervalMatrix) -> Vec<CostRow> {
    matrix_rows(net, costs)
        .map(|(commodity, walk_index, interval, cost)| CostRow { commodity, walk_index, interval, cost })
        .collect()
}

/// Rows ordered by commodity, walk, interval.
fn matrix_rows<'a>(net: &'a Network, m: &'a IntervalMatrix) -> impl Iterator<Item = (String, usize, usize, f64)> + 'a {
    m.iter().enumerate().flat_map(move |(i, rows)| {
        let walks = rows.first().map_or(0, Vec::len);
        (0..walks).flat_map(move |w| {
            rows.iter().enumerate().map(move |(j, row)| (net.commodities[i].name.clone(), w, j, row[w]))
        })
    })
}

/// Rebuilds a walk-flow from `walk_flows.csv` rows. Every
/// `(commodity, walk, interval)` cell must appear exactly once.
pub fn walk_flow_from_rows(
    rows: &[WalkFlowRow],
    net: &Network,
    grid: Discretization,
    walks_per_commodity: &[usize],
) -> Result<WalkFlow> {
    let mut flow = WalkFlow::zeros(grid, walks_per_commodity);
    let mut seen: Vec<Vec<Vec<bool>>> =
        walks_per_commodity.iter().map(|&n| vec![vec![false; n]; grid.intervals]).collect();
    for r in rows {
        let Some(i) = net.commodities.iter().position(|c| c.name == r.commodity) else {
            bail!("walk flow names unknown commodity {:?}", r.commodity);
        };
        if r.interval >= grid.intervals || r.walk_index >= walks_per_commodity[i] {
            bail!("walk flow cell ({}, {}, {}) is out of range", r.commodity, r.walk_index, r.interval);
        }
        if std::mem::replace(&mut seen[i][r.interval][r.walk_index], true) {
            bail!("walk flow cell ({}, {}, {}) appears twice", r.commodity, r.walk_index, r.interval);
        }
        flow.rates[i][r.interval][r.walk_index] = r.rate;
    }
    if seen.iter().flatten().flatten().any(|s| !s) {
        bail!("walk flow does not cover every (commodity, walk, interval) cell");
    }
    Ok(flow)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfileRow {
    pub time: f64,
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStatsRow {
    pub time: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeRow {
    pub time: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub mean_of_min: Option<f64>,
    pub mean_of_max: Option<f64>,
}

/// Per-edge cumulative flows and queue length at every breakpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueRow {
    pub edge_id: String,
    pub theta: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub q: f64,
}

fn column(series: &TimeSeries) -> impl Iterator<Item = (f64, Option<f64>)> + '_ {
    series.times.iter().copied().zip(series.values.iter().copied())
}

pub fn queue_rows(net: &Network, loading: &LoadingResult) -> Vec<QueueRow> {
    let mut rows = Vec::new();
    for (e, trace) in loading.edges.iter().enumerate() {
        let mut times: Vec<f64> = trace
            .inflow
            .breakpoints()
            .iter()
            .chain(trace.outflow.breakpoints())
            .copied()
            .chain(trace.queue.points().iter().map(|p| p.0))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        rows.extend(times.into_iter().map(|theta| QueueRow {
            edge_id: net.edges[e].name.clone(),
            theta,
            f_plus: loading.cumulative_inflow(e, theta),
            f_minus: loading.cumulative_outflow(e, theta),
            q: loading.queue_at(e, theta),
        }));
    }
    rows
}

/// Writes every result file of a finished (or interrupted) run.
pub fn write_results(
    dir: &Path,
    net: &Network,
    catalog: &WalkCatalog,
    result: &EquilibriumResult,
    timings: bool,
    dump_queues: bool,
) -> Result<()> {
    let convergence: Vec<_> = result.history.iter().map(|s| ConvergenceRow::from_stats(s, timings)).collect();
    write_rows(&dir.join("convergence.csv"), &convergence)?;
    write_rows(&dir.join("walk_flows.csv"), &walk_flow_rows(net, &result.flow))?;
    write_rows(&dir.join("costs.csv"), &cost_rows(net, &result.costs))?;

    let profile = energy_profile(&result.flow, catalog, &result.demand);
    let rows: Vec<_> = column(&profile).map(|(time, eta)| EnergyProfileRow { time, eta }).collect();
    write_rows(&dir.join("energy_profile.csv"), &rows)?;

    for (i, stats) in energy_stats(&result.flow, catalog, &result.demand).iter().enumerate() {
        let rows: Vec<_> = column(&stats.min)
            .zip(&stats.max.values)
            .zip(&stats.mean.values)
            .map(|(((time, min), max), mean)| EnergyStatsRow { time, min, max: *max, mean: *mean })
            .collect();
        let name = file_safe(&net.commodities[i].name);
        write_rows(&dir.join(format!("energy_stats_{name}.csv")), &rows)?;
    }

    let tt = travel_time_stats_from(&result.travel_times, &result.flow);
    let rows: Vec<_> = (0..tt.min.times.len())
        .map(|j| TravelTimeRow {
            time: tt.min.times[j],
            min: tt.min.values[j],
            max: tt.max.values[j],
            mean: tt.mean.values[j],
            mean_of_min: tt.mean_of_min.values[j],
            mean_of_max: tt.mean_of_max.values[j],
        })
        .collect();
    write_rows(&dir.join("travel_times.csv"), &rows)?;

    if dump_queues {
        write_rows(&dir.join("queues.csv"), &queue_rows(net, &result.loading))?;
    }
    Ok(())
}
