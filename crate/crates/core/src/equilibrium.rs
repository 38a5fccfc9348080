//! Fixed-point iteration for discretized energy-feasible dynamic equilibria.
//!
//! Each iteration loads the current walk-flow, evaluates every walk's cost at
//! the interval midpoints and replaces each `(commodity, interval)` row `h`
//! by `[h − α·c + v]_+`, with the scalar `v` chosen so that the row keeps
//! summing to the interval demand.

use std::time::{Duration, Instant};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{Demand, Discretization, FlowError, WalkFlow};
use crate::loading::{network_loading, LoadingError, LoadingOptions, LoadingResult};
use crate::metrics::{delta_h, midpoint_travel_times, qopi, weighted_norm, IntervalMatrix, MetricsError, NormKind, QopiMode};
use crate::netmodel::Network;
use crate::walks::WalkCatalog;

/// Combines travel time and price into a scalar cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationSpec {
    /// `λ·μ + P`, with `λ > 0`.
    Lambda(f64),
    /// `μ + λ̃·P`, with `λ̃ ≥ 0`.
    LambdaTilde(f64),
}

impl AggregationSpec {
    pub fn cost(&self, travel_time: f64, price: f64) -> f64 {
        match *self {
            AggregationSpec::Lambda(l) => l * travel_time + price,
            AggregationSpec::LambdaTilde(l) => travel_time + l * price,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            AggregationSpec::Lambda(l) => l > 0.0 && l.is_finite(),
            AggregationSpec::LambdaTilde(l) => l >= 0.0 && l.is_finite(),
        }
    }
}

impl Default for AggregationSpec {
    fn default() -> Self {
        AggregationSpec::LambdaTilde(0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationMode {
    /// Stop once `‖h^{k+1} − h^k‖ < ε`.
    #[default]
    Abs,
    /// Stop once `‖h^{k+1} − h^k‖ / ‖h^k‖ ≤ ε`.
    Rel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointConfig {
    pub epsilon: f64,
    pub alpha0: f64,
    pub intervals: usize,
    pub max_iters: usize,
    pub time_limit: Option<Duration>,
    pub termination: TerminationMode,
    pub norm: NormKind,
    pub loading: LoadingOptions,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            alpha0: 0.5,
            intervals: 100,
            max_iters: 10_000,
            time_limit: None,
            termination: TerminationMode::Abs,
            norm: NormKind::L1,
            loading: LoadingOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initialization {
    /// All demand on the walk with the lowest free-flow cost.
    ShortestFreeFlow,
    /// Demand split evenly over all walks.
    Uniform,
    Given(WalkFlow),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationStats {
    pub k: usize,
    pub delta_h_abs: f64,
    pub delta_h_rel: f64,
    /// QoPI of `h^k` (relative and absolute).
    pub qopi: f64,
    pub qopi_abs: f64,
    /// Step size used in this iteration.
    pub alpha: f64,
    /// Seconds since the start of the run.
    pub wall_time: f64,
    pub loading_time: f64,
    pub update_time: f64,
    /// Largest relative deviation of a row sum of `h^{k+1}` from its demand.
    pub max_row_error: f64,
    /// Smallest entry of `h^{k+1}`.
    pub min_entry: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("commodity {0} has no walks")]
    EmptyCatalog(usize),
    #[error("negative demand {0}")]
    NegativeDemand(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Loading(#[from] LoadingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Solves `Σ_W [h_W − α·c_W + v]_+ = u` for `v` and returns `v` with the
/// updated row.
///
/// The left-hand side is piecewise linear and non-decreasing in `v`; with the
/// shifted values `x_W = h_W − α·c_W` sorted in decreasing order, exactly the
/// `k` largest are positive at the solution and `v = (u − Σ_{m≤k} x_m) / k`.
/// For `u = 0` the row is zero and `v = min_W(α·c_W − h_W)`.
pub fn solve_fp_update(h: &[f64], costs: &[f64], demand: f64, alpha: f64) -> Result<(f64, Vec<f64>), EquilibriumError> {
    if demand < 0.0 {
        return Err(EquilibriumError::NegativeDemand(demand));
    }
    let shifted: Vec<f64> = h.iter().zip(costs).map(|(h, c)| h - alpha * c).collect();
    if demand == 0.0 || shifted.is_empty() {
        let v = shifted.iter().map(|x| -x).fold(f64::INFINITY, f64::min);
        return Ok((v, vec![0.0; h.len()]));
    }
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut v = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        prefix += x;
        v = (demand - prefix) / (k + 1) as f64;
        let next_inactive = sorted.get(k + 1).is_none_or(|&y| y + v <= 0.0);
        if next_inactive {
            break;
        }
    }
    let mut row: Vec<f64> = shifted.iter().map(|x| (x + v).max(0.0)).collect();
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        let scale = demand / sum;
        row.iter_mut().for_each(|x| *x *= scale);
    }
    Ok((v, row))
}

/// `γ = 1 − ‖h_new − h_old‖ / ‖h_new + h_old‖` and
/// `α' = γ·(γ·α) + (1 − γ)·α`. All-zero flows leave `α` unchanged.
pub fn step_size_update(alpha: f64, old: &WalkFlow, new: &WalkFlow, norm: NormKind) -> f64 {
    let width = old.grid.width();
    let sum = weighted_norm(old.entries().zip(new.entries()).map(|(a, b)| a + b), width, norm);
    if sum == 0.0 {
        return alpha;
    }
    let diff = weighted_norm(old.entries().zip(new.entries()).map(|(a, b)| b - a), width, norm);
    let gamma = 1.0 - diff / sum;
    gamma * (gamma * alpha) + (1.0 - gamma) * alpha
}

/// Aggregated costs `c_i(μ, P)` from midpoint travel times.
pub fn costs_from_travel_times(net: &Network, catalog: &WalkCatalog, travel_times: &IntervalMatrix) -> IntervalMatrix {
    travel_times
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            let agg = net.commodities[i].aggregation;
            let walks = catalog.walks(i);
            rows.iter()
                .map(|row| row.iter().zip(walks).map(|(mu, w)| agg.cost(*mu, w.total_price)).collect())
                .collect()
        })
        .collect()
}

/// Cost of every walk at every interval midpoint.
pub fn midpoint_costs(net: &Network, loading: &LoadingResult, catalog: &WalkCatalog, grid: &Discretization) -> IntervalMatrix {
    costs_from_travel_times(net, catalog, &midpoint_travel_times(loading, catalog, grid))
}

/// Applies the fixed-point update to every row.
pub fn fp_update(flow: &WalkFlow, costs: &IntervalMatrix, demand: &Demand, alpha: f64) -> Result<WalkFlow, EquilibriumError> {
    let rates = flow
        .rates
        .par_iter()
        .enumerate()
        .map(|(i, rows)| {
            rows.iter()
                .enumerate()
                .map(|(j, row)| solve_fp_update(row, &costs[i][j], demand.rows[i][j], alpha).map(|r| r.1))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WalkFlow { grid: flow.grid, rates })
}

/// `‖FP-Update(h) − h‖`; zero exactly when every walk with positive flow in
/// an interval has the minimum midpoint cost of that interval.
pub fn fixed_point_residual(
    net: &Network,
    catalog: &WalkCatalog,
    flow: &WalkFlow,
    alpha: f64,
    norm: NormKind,
    options: &LoadingOptions,
) -> Result<f64, EquilibriumError> {
    let demand = Demand::new(net, &flow.grid);
    let loading = network_loading(net, catalog, flow, options)?;
    let costs = midpoint_costs(net, &loading, catalog, &flow.grid);
    let updated = fp_update(flow, &costs, &demand, alpha)?;
    Ok(delta_h(flow, &updated, norm).0)
}

/// Builds the initial walk-flow.
pub fn initial_flow(
    net: &Network,
    catalog: &WalkCatalog,
    grid: Discretization,
    init: &Initialization,
) -> Result<WalkFlow, EquilibriumError> {
    let demand = Demand::new(net, &grid);
    let sizes: Vec<usize> = catalog.entries.iter().map(|e| e.walks.len()).collect();
    if let Some(i) = sizes.iter().position(|&n| n == 0) {
        return Err(EquilibriumError::EmptyCatalog(i));
    }
    let mut flow = WalkFlow::zeros(grid, &sizes);
    match init {
        Initialization::Given(given) => {
            given.check_shape(catalog)?;
            if given.grid != grid {
                return Err(EquilibriumError::Config("initial flow uses a different time grid".into()));
            }
            flow = given.clone();
        }
        Initialization::Uniform => {
            for (i, rows) in flow.rates.iter_mut().enumerate() {
                for (j, row) in rows.iter_mut().enumerate() {
                    let share = demand.rows[i][j] / row.len() as f64;
                    row.iter_mut().for_each(|x| *x = share);
                }
            }
        }
        Initialization::ShortestFreeFlow => {
            for (i, rows) in flow.rates.iter_mut().enumerate() {
                let agg = net.commodities[i].aggregation;
                let best = catalog
                    .walks(i)
                    .iter()
                    .map(|w| agg.cost(w.free_flow_time, w.total_price))
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (w, c)| if c < acc.1 { (w, c) } else { acc })
                    .0;
                for (j, row) in rows.iter_mut().enumerate() {
                    row[best] = demand.rows[i][j];
                }
            }
        }
    }
    flow.check_demand(&demand)?;
    Ok(flow)
}

/// What an observer sees after each iteration.
pub struct IterationView<'a> {
    pub stats: &'a IterationStats,
    /// `h^k`, the flow that was loaded.
    pub flow: &'a WalkFlow,
    pub loading: &'a LoadingResult,
    /// `h^{k+1}`.
    pub next: &'a WalkFlow,
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    pub flow: WalkFlow,
    pub history: Vec<IterationStats>,
    pub termination: Termination,
    pub demand: Demand,
    /// Loading of the final flow.
    pub loading: LoadingResult,
    pub travel_times: IntervalMatrix,
    pub costs: IntervalMatrix,
    pub qopi: f64,
    pub qopi_abs: f64,
}

pub fn run_fixed_point(
    net: &Network,
    catalog: &WalkCatalog,
    config: &FixedPointConfig,
    init: &Initialization,
) -> Result<EquilibriumResult, EquilibriumError> {
    run_fixed_point_observed(net, catalog, config, init, |_| {})
}

/// [`run_fixed_point`] calling `observer` after every iteration.
pub fn run_fixed_point_observed<F>(
    net: &Network,
    catalog: &WalkCatalog,
    config: &FixedPointConfig,
    init: &Initialization,
    mut observer: F,
) -> Result<EquilibriumResult, EquilibriumError>
where
    F: FnMut(&IterationView<'_>),
{
    if !(config.epsilon > 0.0) || !(config.alpha0 > 0.0) || config.intervals == 0 {
        return Err(EquilibriumError::Config("need epsilon > 0, alpha0 > 0 and at least one interval".into()));
    }
    let grid = Discretization::new(net.horizon, config.intervals);
    let demand = Demand::new(net, &grid);
    let mut flow = initial_flow(net, catalog, grid, init)?;
    let mut alpha = config.alpha0;
    let mut history = Vec::new();
    let start = Instant::now();

    let termination = loop {
        let k = history.len();
        if k >= config.max_iters {
            break Termination::IterationLimit;
        }
        if config.time_limit.is_some_and(|limit| start.elapsed() >= limit) {
            break Termination::TimeLimit;
        }
        let t0 = Instant::now();
        let loading = network_loading(net, catalog, &flow, &config.loading)?;
        let costs = midpoint_costs(net, &loading, catalog, &grid);
        let loading_time = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let next = fp_update(&flow, &costs, &demand, alpha)?;
        let update_time = t1.elapsed().as_secs_f64();

        let (delta_abs, delta_rel) = delta_h(&flow, &next, config.norm);
        let (max_row_error, min_entry) = row_check(&next, &demand);
        let stats = IterationStats {
            k,
            delta_h_abs: delta_abs,
            delta_h_rel: delta_rel,
            qopi: qopi(&flow, &costs, &demand, QopiMode::Relative)?,
            qopi_abs: qopi(&flow, &costs, &demand, QopiMode::Absolute)?,
            alpha,
            wall_time: start.elapsed().as_secs_f64(),
            loading_time,
            update_time,
            max_row_error,
            min_entry,
        };
        debug!(
            "k={k} dh={:.3e} rel={:.3e} qopi={:.3e} alpha={:.3e}",
            stats.delta_h_abs, stats.delta_h_rel, stats.qopi, stats.alpha
        );
        observer(&IterationView { stats: &stats, flow: &flow, loading: &loading, next: &next });
        alpha = step_size_update(alpha, &flow, &next, config.norm);
        history.push(stats);
        flow = next;
        let criterion = match config.termination {
            TerminationMode::Abs => delta_abs < config.epsilon,
            TerminationMode::Rel => delta_rel <= config.epsilon,
        };
        if criterion {
            break Termination::Converged;
        }
    };

    let loading = network_loading(net, catalog, &flow, &config.loading)?;
    let travel_times = midpoint_travel_times(&loading, catalog, &grid);
    let costs = costs_from_travel_times(net, catalog, &travel_times);
    let qopi_rel = qopi(&flow, &costs, &demand, QopiMode::Relative)?;
    let qopi_abs = qopi(&flow, &costs, &demand, QopiMode::Absolute)?;
    info!(
        "fixed point finished after {} iterations ({termination:?}), QoPI {qopi_rel:.3e}",
        history.len()
    );
    Ok(EquilibriumResult {
        flow,
        history,
        termination,
        demand,
        loading,
        travel_times,
        costs,
        qopi: qopi_rel,
        qopi_abs,
    })
}

fn row_check(flow: &WalkFlow, demand: &Demand) -> (f64, f64) {
    let mut max_err: f64 = 0.0;
    let mut min_entry = f64::INFINITY;
    for (i, rows) in flow.rates.iter().enumerate() {
        for (j, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let target = demand.rows[i][j];
            max_err = max_err.max((sum - target).abs() / target.abs().max(1.0));
            min_entry = row.iter().copied().fold(min_entry, f64::min);
        }
    }
    (max_err, min_entry)
}
