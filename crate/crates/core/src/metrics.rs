//! Solution-quality and profile measures of a walk-flow.

use thiserror::Error;

use crate::flow::{Demand, Discretization, WalkFlow};
use crate::loading::LoadingResult;
use crate::walks::WalkCatalog;

/// Per `[commodity][interval][walk]` values aligned with a [`WalkFlow`].
pub type IntervalMatrix = Vec<Vec<Vec<f64>>>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Interval-width weighted L¹ norm.
    #[default]
    L1,
    /// Interval-width weighted L² norm.
    L2,
}

/// Norm of a collection of piecewise-constant rates with pieces of width
/// `width`.
pub fn weighted_norm<I: IntoIterator<Item = f64>>(values: I, width: f64, kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => (values.into_iter().map(|x| x * x).sum::<f64>() * width).sqrt(),
        NormKind::L1 => values.into_iter().map(f64::abs).sum::<f64>() * width,
    }
}

/// `‖h_new − h_old‖` and its ratio to `‖h_old‖` (`+∞` when `h_old = 0` and
/// the flows differ).
pub fn delta_h(old: &WalkFlow, new: &WalkFlow, kind: NormKind) -> (f64, f64) {
    let width = old.grid.width();
    let abs = weighted_norm(old.entries().zip(new.entries()).map(|(a, b)| b - a), width, kind);
    let base = weighted_norm(old.entries(), width, kind);
    let rel = if abs == 0.0 {
        0.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        abs / base
    };
    (abs, rel)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QopiMode {
    Relative,
    Absolute,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("commodity {commodity}, interval {interval}: minimum cost {value} is not positive")]
    NonPositiveCost { commodity: usize, interval: usize, value: f64 },
}

/// Integral over `[0, T]` of the function interpolating `values` linearly
/// between interval midpoints and constantly beyond the outer midpoints.
pub fn midpoint_trapezoid(grid: &Discretization, values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let first = grid.midpoint(0);
    let last = grid.midpoint(n - 1);
    let mut area = values[0] * first + values[n - 1] * (grid.horizon - last);
    for j in 0..n - 1 {
        area += 0.5 * (values[j] + values[j + 1]) * (grid.midpoint(j + 1) - grid.midpoint(j));
    }
    area
}

/// Flow-weighted relative excess of walk costs over the per-interval minimum,
/// integrated over time and summed over commodities. In relative mode each
/// commodity's integral is divided by its total inflow volume.
pub fn qopi(
    flow: &WalkFlow,
    costs: &IntervalMatrix,
    demand: &Demand,
    mode: QopiMode,
) -> Result<f64, MetricsError> {
    let grid = &flow.grid;
    let mut total = 0.0;
    for (i, rows) in flow.rates.iter().enumerate() {
        let mut samples = Vec::with_capacity(rows.len());
        for (j, row) in rows.iter().enumerate() {
            let c = &costs[i][j];
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(MetricsError::NonPositiveCost { commodity: i, interval: j, value: min });
            }
            samples.push(row.iter().zip(c).map(|(h, c)| h * (c - min) / min).sum::<f64>());
        }
        let area = midpoint_trapezoid(grid, &samples);
        total += match mode {
            QopiMode::Absolute => area,
            QopiMode::Relative if demand.volumes[i] > 0.0 => area / demand.volumes[i],
            QopiMode::Relative => 0.0,
        };
    }
    Ok(total)
}

/// Values sampled at interval midpoints; `None` where the value is undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl TimeSeries {
    fn new(grid: &Discretization, values: Vec<Option<f64>>) -> Self {
        Self { times: grid.midpoints(), values }
    }
}

/// Average energy consumed by the particles entering at each sample time:
/// `η = Σ_i Σ_W h_W b_W / u_i`. Commodities without inflow in an interval are
/// left out; samples without any inflow are `None`.
pub fn energy_profile(flow: &WalkFlow, catalog: &WalkCatalog, demand: &Demand) -> TimeSeries {
    let values = (0..flow.grid.intervals)
        .map(|j| {
            let mut any = false;
            let mut eta = 0.0;
            for (i, entry) in catalog.entries.iter().enumerate() {
                let u = demand.rows[i][j];
                if u > 0.0 {
                    any = true;
                    eta += flow.rates[i][j]
                        .iter()
                        .zip(&entry.walks)
                        .map(|(h, w)| h * w.energy)
                        .sum::<f64>()
                        / u;
                }
            }
            any.then_some(eta)
        })
        .collect();
    TimeSeries::new(&flow.grid, values)
}

/// Minimum, maximum and mean walk energy of one commodity over used walks.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyStats {
    pub min: TimeSeries,
    pub max: TimeSeries,
    pub mean: TimeSeries,
}

pub fn energy_stats(flow: &WalkFlow, catalog: &WalkCatalog, demand: &Demand) -> Vec<EnergyStats> {
    catalog
        .entries
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let mut min = Vec::with_capacity(flow.grid.intervals);
            let mut max = Vec::with_capacity(flow.grid.intervals);
            let mut mean = Vec::with_capacity(flow.grid.intervals);
            for j in 0..flow.grid.intervals {
                let used: Vec<(f64, f64)> = flow.rates[i][j]
                    .iter()
                    .zip(&entry.walks)
                    .filter(|(h, _)| **h > 0.0)
                    .map(|(h, w)| (*h, w.energy))
                    .collect();
                let u = demand.rows[i][j];
                if used.is_empty() || u <= 0.0 {
                    min.push(None);
                    max.push(None);
                    mean.push(None);
                    continue;
                }
                min.push(used.iter().map(|p| p.1).reduce(f64::min));
                max.push(used.iter().map(|p| p.1).reduce(f64::max));
                mean.push(Some(used.iter().map(|(h, b)| h * b).sum::<f64>() / u));
            }
            EnergyStats {
                min: TimeSeries::new(&flow.grid, min),
                max: TimeSeries::new(&flow.grid, max),
                mean: TimeSeries::new(&flow.grid, mean),
            }
        })
        .collect()
}

/// Travel times of used walks consolidated over commodities.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeStats {
    /// Minimum over commodities and used walks.
    pub min: TimeSeries,
    /// Maximum over commodities and used walks.
    pub max: TimeSeries,
    /// Mean over all used `(commodity, walk)` pairs.
    pub mean: TimeSeries,
    /// Mean over commodities of the per-commodity minimum.
    pub mean_of_min: TimeSeries,
    /// Mean over commodities of the per-commodity maximum.
    pub mean_of_max: TimeSeries,
}

/// Travel times `μ` of every walk at the interval midpoints.
pub fn midpoint_travel_times(loading: &LoadingResult, catalog: &WalkCatalog, grid: &Discretization) -> IntervalMatrix {
    use rayon::prelude::*;
    let midpoints = grid.midpoints();
    catalog
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            midpoints
                .par_iter()
                .map(|&theta| {
                    (0..entry.walks.len())
                        .map(|w| loading.walk_travel_time(i, w, theta))
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn travel_time_stats(loading: &LoadingResult, flow: &WalkFlow, catalog: &WalkCatalog) -> TravelTimeStats {
    let mu = midpoint_travel_times(loading, catalog, &flow.grid);
    travel_time_stats_from(&mu, flow)
}

/// As [`travel_time_stats`] with precomputed midpoint travel times.
pub fn travel_time_stats_from(mu: &IntervalMatrix, flow: &WalkFlow) -> TravelTimeStats {
    let n = flow.grid.intervals;
    let mut series: [Vec<Option<f64>>; 5] = Default::default();
    for j in 0..n {
        let mut all = Vec::new();
        let mut mins = Vec::new();
        let mut maxs = Vec::new();
        for (i, rows) in flow.rates.iter().enumerate() {
            let used: Vec<f64> = rows[j]
                .iter()
                .zip(&mu[i][j])
                .filter(|(h, _)| **h > 0.0)
                .map(|(_, m)| *m)
                .collect();
            if used.is_empty() {
                continue;
            }
            mins.push(used.iter().copied().fold(f64::INFINITY, f64::min));
            maxs.push(used.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            all.extend(used);
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        series[0].push(mins.iter().copied().reduce(f64::min));
        series[1].push(maxs.iter().copied().reduce(f64::max));
        series[2].push(mean(&all));
        series[3].push(mean(&mins));
        series[4].push(mean(&maxs));
    }
    let [min, max, mean, mean_of_min, mean_of_max] = series.map(|v| TimeSeries::new(&flow.grid, v));
    TravelTimeStats { min, max, mean, mean_of_min, mean_of_max }
}
