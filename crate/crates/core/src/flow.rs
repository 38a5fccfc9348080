//! Time discretization and discretized walk-flows.

use thiserror::Error;

use crate::functions::StepFunction;
use crate::netmodel::{CommodityId, Network};
use crate::walks::WalkCatalog;

/// `N` equal intervals `[a_{j-1}, a_j]` covering `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub horizon: f64,
    pub intervals: usize,
}

impl Discretization {
    pub fn new(horizon: f64, intervals: usize) -> Self {
        assert!(horizon > 0.0 && intervals >= 1, "need T > 0 and N >= 1");
        Self { horizon, intervals }
    }

    pub fn len(&self) -> usize {
        self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals == 0
    }

    pub fn width(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    /// Breakpoint `a_j`.
    pub fn point(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.horizon
        } else {
            self.horizon * j as f64 / self.intervals as f64
        }
    }

    /// Interval `j` (zero-based) as `(a_j, a_{j+1})`.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.point(j), self.point(j + 1))
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        let (a, b) = self.bounds(j);
        0.5 * (a + b)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.intervals).map(|j| self.midpoint(j)).collect()
    }

    /// Average of a rate function over each interval.
    pub fn averages(&self, f: &StepFunction) -> Vec<f64> {
        (0..self.intervals)
            .map(|j| {
                let (a, b) = self.bounds(j);
                f.integral(a, b) / (b - a)
            })
            .collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("commodity {commodity}, interval {interval}: walk rates sum to {sum}, demand is {demand}")]
    DemandMismatch { commodity: CommodityId, interval: usize, sum: f64, demand: f64 },
    #[error("commodity {commodity}, interval {interval}: negative or non-finite rate {value}")]
    InvalidRate { commodity: CommodityId, interval: usize, value: f64 },
    #[error("flow shape does not match the walk catalog")]
    Shape,
}

/// Relative tolerance for row sums to match the demand.
pub const DEMAND_TOLERANCE: f64 = 1e-9;

/// Piecewise-constant walk inflow rates.
///
/// `rates[i][j][w]` is the rate into walk `w` of commodity `i` on interval
/// `j`; each `rates[i][j]` is a row of the fixed-point update.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkFlow {
    pub grid: Discretization,
    pub rates: Vec<Vec<Vec<f64>>>,
}

impl WalkFlow {
    pub fn zeros(grid: Discretization, walks_per_commodity: &[usize]) -> Self {
        Self {
            grid,
            rates: walks_per_commodity
                .iter()
                .map(|&n| vec![vec![0.0; n]; grid.intervals])
                .collect(),
        }
    }

    pub fn num_commodities(&self) -> usize {
        self.rates.len()
    }

    pub fn row(&self, commodity: CommodityId, interval: usize) -> &[f64] {
        &self.rates[commodity][interval]
    }

    /// Rate of a walk as a step function over `[0, T]`.
    pub fn walk_rate_function(&self, commodity: CommodityId, walk: usize) -> StepFunction {
        StepFunction::from_pieces((0..self.grid.intervals).map(|j| {
            let (a, b) = self.grid.bounds(j);
            (a, b, self.rates[commodity][j][walk])
        }))
    }

    /// Rate at time `t` of a walk.
    pub fn rate_at(&self, commodity: CommodityId, walk: usize, t: f64) -> f64 {
        if t < 0.0 || t >= self.grid.horizon {
            return 0.0;
        }
        let j = ((t / self.grid.width()) as usize).min(self.grid.intervals - 1);
        self.rates[commodity][j][walk]
    }

    /// Time-integrated volume sent into a walk.
    pub fn walk_volume(&self, commodity: CommodityId, walk: usize) -> f64 {
        let w = self.grid.width();
        self.rates[commodity].iter().map(|row| row[walk] * w).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.rates.iter().flatten().flatten().copied()
    }

    /// Checks non-negativity and that every row sums to its interval demand.
    pub fn check_demand(&self, demand: &Demand) -> Result<(), FlowError> {
        if self.rates.len() != demand.rows.len() {
            return Err(FlowError::Shape);
        }
        for (i, per_interval) in self.rates.iter().enumerate() {
            if per_interval.len() != demand.rows[i].len() {
                return Err(FlowError::Shape);
            }
            for (j, row) in per_interval.iter().enumerate() {
                if let Some(&value) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(FlowError::InvalidRate { commodity: i, interval: j, value });
                }
                let sum: f64 = row.iter().sum();
                let target = demand.rows[i][j];
                if (sum - target).abs() > DEMAND_TOLERANCE * target.abs().max(1.0) {
                    return Err(FlowError::DemandMismatch { commodity: i, interval: j, sum, demand: target });
                }
            }
        }
        Ok(())
    }

    pub fn check_shape(&self, catalog: &WalkCatalog) -> Result<(), FlowError> {
        if self.rates.len() != catalog.num_commodities() {
            return Err(FlowError::Shape);
        }
        for (i, per_interval) in self.rates.iter().enumerate() {
            if per_interval.len() != self.grid.intervals
                || per_interval.iter().any(|row| row.len() != catalog.walks(i).len())
            {
                return Err(FlowError::Shape);
            }
        }
        Ok(())
    }
}

/// Interval-average network inflow rates `ū_i^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Demand {
    pub rows: Vec<Vec<f64>>,
    /// `∫_0^T u_i` per commodity.
    pub volumes: Vec<f64>,
}

impl Demand {
    pub fn new(net: &Network, grid: &Discretization) -> Self {
        Self {
            rows: net.commodities.iter().map(|c| grid.averages(&c.inflow)).collect(),
            volumes: net.commodities.iter().map(|c| c.inflow.integral(0.0, grid.horizon)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g = Discretization::new(10.0, 100);
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(100), 10.0);
        assert!((g.midpoint(0) - 0.05).abs() < 1e-15);
        assert!((g.width() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn averages_of_partial_pieces() {
        let g = Discretization::new(2.0, 2);
        let f = StepFunction::constant(0.5, 1.5, 2.0);
        assert_eq!(g.averages(&f), vec![1.0, 1.0]);
    }

    #[test]
    fn demand_check() {
        let g = Discretization::new(1.0, 1);
        let demand = Demand { rows: vec![vec![3.0]], volumes: vec![3.0] };
        let mut h = WalkFlow { grid: g, rates: vec![vec![vec![2.0, 1.0]]] };
        assert!(h.check_demand(&demand).is_ok());
        h.rates[0][0][1] = 0.5;
        assert!(matches!(h.check_demand(&demand), Err(FlowError::DemandMismatch { .. })));
        h.rates[0][0] = vec![3.5, -0.5];
        assert!(matches!(h.check_demand(&demand), Err(FlowError::InvalidRate { .. })));
    }
}
