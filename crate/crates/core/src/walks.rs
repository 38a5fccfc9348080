//! Walks, battery profiles and enumeration of energy-feasible walks.
//!
//! The battery level after traversing edge `e` from level `b` is
//! `min(b - b_e, b_max)`: recharge edges carry negative costs and the cap
//! turns a cost of `-b_max` into "recharge to full".

use std::collections::BTreeSet;

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::netmodel::{CommodityId, EdgeId, EdgeKind, Network, NodeId};

/// Visit bound used when no cycle has a positive battery cost.
pub const DEFAULT_VISIT_CAP: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("edge {next} does not start where edge {prev} ends")]
    NotIncident { prev: EdgeId, next: EdgeId },
    #[error("walk does not start at the source of commodity {0}")]
    WrongSource(CommodityId),
    #[error("empty walk")]
    Empty,
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("no energy-feasible walk for commodity {0}")]
    NoFeasibleWalk(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    pub commodity: CommodityId,
    pub edges: Vec<EdgeId>,
    /// Battery level after each edge.
    pub battery_profile: Vec<f64>,
    pub total_price: f64,
    pub free_flow_time: f64,
    /// Energy consumed on physical edges; recharge edges do not count.
    pub energy: f64,
}

impl Walk {
    /// Builds a walk and caches its profile, price, free-flow time and energy.
    pub fn new(net: &Network, commodity: CommodityId, edges: Vec<EdgeId>) -> Result<Self, WalkError> {
        let battery_profile = battery_profile(&edges, commodity, net)?;
        let attrs = &net.attrs[commodity];
        Ok(Self {
            commodity,
            total_price: edges.iter().map(|&e| attrs[e].price).sum(),
            free_flow_time: edges.iter().map(|&e| net.edges[e].transit_time).sum(),
            energy: edges
                .iter()
                .filter(|&&e| net.edges[e].kind == EdgeKind::Physical)
                .map(|&e| attrs[e].battery_cost)
                .sum(),
            battery_profile,
            edges,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn min_battery(&self) -> f64 {
        self.battery_profile.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Nodes in visiting order, starting with the source.
    pub fn nodes(&self, net: &Network) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(self.edges.len() + 1);
        if let Some(&first) = self.edges.first() {
            nodes.push(net.edges[first].tail);
        }
        nodes.extend(self.edges.iter().map(|&e| net.edges[e].head));
        nodes
    }

    /// Edge names joined by `-`, e.g. `e1-e3-e4`.
    pub fn label(&self, net: &Network) -> String {
        self.edges
            .iter()
            .map(|&e| net.edges[e].name.as_str())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// One battery step: level after traversing an edge of cost `cost`.
#[inline]
pub fn next_level(level: f64, cost: f64, capacity: f64) -> f64 {
    (level - cost).min(capacity)
}

/// Battery level after each edge of an incident edge sequence starting at
/// the commodity's source.
pub fn battery_profile(edges: &[EdgeId], commodity: CommodityId, net: &Network) -> Result<Vec<f64>, WalkError> {
    let c = &net.commodities[commodity];
    let Some(&first) = edges.first() else {
        return Err(WalkError::Empty);
    };
    if first >= net.num_edges() {
        return Err(WalkError::UnknownEdge(first));
    }
    if net.edges[first].tail != c.source {
        return Err(WalkError::WrongSource(commodity));
    }
    let mut levels = Vec::with_capacity(edges.len());
    let mut level = c.initial_battery;
    for (k, &e) in edges.iter().enumerate() {
        if e >= net.num_edges() {
            return Err(WalkError::UnknownEdge(e));
        }
        if k > 0 && net.edges[edges[k - 1]].head != net.edges[e].tail {
            return Err(WalkError::NotIncident { prev: edges[k - 1], next: e });
        }
        level = next_level(level, net.attrs[commodity][e].battery_cost, c.battery_capacity);
        levels.push(level);
    }
    Ok(levels)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible,
    /// Battery drops below zero after the edge at this position.
    BatteryBelowZero { position: usize, level: f64 },
    /// Battery exceeds the capacity after the edge at this position.
    BatteryAboveCapacity { position: usize, level: f64 },
    OverBudget { price: f64, budget: f64 },
    /// The last edge does not end at the sink.
    WrongSink,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

pub fn is_energy_feasible(walk: &Walk, net: &Network) -> Feasibility {
    let c = &net.commodities[walk.commodity];
    for (position, &level) in walk.battery_profile.iter().enumerate() {
        if !(level >= 0.0) {
            return Feasibility::BatteryBelowZero { position, level };
        }
        if level > c.battery_capacity {
            return Feasibility::BatteryAboveCapacity { position, level };
        }
    }
    if !c.within_budget(walk.total_price) {
        return Feasibility::OverBudget {
            price: walk.total_price,
            budget: c.price_budget.unwrap_or(f64::INFINITY),
        };
    }
    match walk.edges.last() {
        Some(&e) if net.edges[e].head == c.sink => Feasibility::Feasible,
        _ => Feasibility::WrongSink,
    }
}

pub fn walk_price(walk: &Walk, net: &Network) -> f64 {
    walk.edges.iter().map(|&e| net.attrs[walk.commodity][e].price).sum()
}

/// Per-node visit bound for a commodity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisitBound {
    pub kappa: usize,
    /// Minimum positive simple-cycle battery cost, if one was found.
    pub alpha: Option<f64>,
}

/// Budget on simple-cycle search steps before falling back.
const CYCLE_SEARCH_BUDGET: usize = 2_000_000;

/// `κ = ⌈b_max / α⌉` with `α` the minimum positive battery cost over simple
/// cycles of the network. Falls back to `hard_cap` when no positive cycle
/// exists.
pub fn visit_bound_kappa(net: &Network, commodity: CommodityId, hard_cap: usize) -> VisitBound {
    let capacity = net.commodities[commodity].battery_capacity;
    let costs: Vec<f64> = net.attrs[commodity].iter().map(|a| a.battery_cost).collect();
    let alpha = match min_positive_cycle_cost(net, &costs, CYCLE_SEARCH_BUDGET) {
        CycleSearch::Found(a) => Some(a),
        CycleSearch::NonePositive => None,
        CycleSearch::BudgetExceeded => {
            // Without negative costs every positive cycle contains an edge of
            // positive cost, which bounds the cycle cost from below.
            if costs.iter().all(|&c| c >= 0.0) {
                costs.iter().copied().filter(|&c| c > 0.0 && c.is_finite()).reduce(f64::min)
            } else {
                None
            }
        }
    };
    match alpha {
        Some(a) => {
            let kappa = (capacity / a).ceil().max(1.0);
            VisitBound { kappa: if kappa.is_finite() { kappa as usize } else { hard_cap }, alpha }
        }
        None => {
            info!(
                "commodity {}: no positive-cost cycle, visit bound falls back to {hard_cap}",
                net.commodities[commodity].name
            );
            VisitBound { kappa: hard_cap, alpha: None }
        }
    }
}

enum CycleSearch {
    Found(f64),
    NonePositive,
    BudgetExceeded,
}

/// Enumerates simple cycles, each rooted at its smallest node, and returns
/// the minimum positive total cost. Edges with infinite cost are skipped.
fn min_positive_cycle_cost(net: &Network, costs: &[f64], budget: usize) -> CycleSearch {
    let out = net.out_edges();
    let n = net.num_nodes();
    let mut best: Option<f64> = None;
    let mut steps = 0usize;
    let mut on_path = vec![false; n];
    for root in 0..n {
        // Iterative DFS over simple paths from root through nodes > root.
        let mut stack: Vec<(NodeId, usize, f64)> = vec![(root, 0, 0.0)];
        on_path[root] = true;
        while let Some(&mut (v, ref mut next, cost)) = stack.last_mut() {
            if *next >= out[v].len() {
                on_path[v] = false;
                stack.pop();
                continue;
            }
            let e = out[v][*next];
            *next += 1;
            steps += 1;
            if steps > budget {
                return CycleSearch::BudgetExceeded;
            }
            let c = costs[e];
            if !c.is_finite() {
                continue;
            }
            let w = net.edges[e].head;
            if w == root {
                let total = cost + c;
                if total > 0.0 {
                    best = Some(best.map_or(total, |b: f64| b.min(total)));
                }
            } else if w > root && !on_path[w] {
                on_path[w] = true;
                stack.push((w, 0, cost + c));
            }
        }
    }
    best.map_or(CycleSearch::NonePositive, CycleSearch::Found)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerationLimits {
    /// Overrides the computed visit bound.
    pub kappa: Option<usize>,
    /// Visit bound when no positive-cost cycle exists.
    pub hard_cap: usize,
    pub max_length: usize,
    pub max_walks: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { kappa: None, hard_cap: DEFAULT_VISIT_CAP, max_length: 64, max_walks: 100_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnumerationStats {
    pub explored: usize,
    pub pruned: usize,
    pub truncated: bool,
}

/// Feasible walks of one commodity, in lexicographic order of edge ids.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub commodity: CommodityId,
    pub walks: Vec<Walk>,
    pub kappa: usize,
    pub stats: EnumerationStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl WalkCatalog {
    /// Enumerates every commodity's walks in parallel.
    pub fn build(net: &Network, limits: &EnumerationLimits) -> Result<Self, WalkError> {
        let entries = (0..net.commodities.len())
            .into_par_iter()
            .map(|i| enumerate_feasible_walks(net, i, limits))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { entries })
    }

    /// Wraps explicitly given walks, one list per commodity.
    pub fn from_walks(walks: Vec<Vec<Walk>>) -> Self {
        Self {
            entries: walks
                .into_iter()
                .enumerate()
                .map(|(i, walks)| CatalogEntry {
                    commodity: i,
                    walks,
                    kappa: 0,
                    stats: EnumerationStats::default(),
                })
                .collect(),
        }
    }

    pub fn num_commodities(&self) -> usize {
        self.entries.len()
    }

    pub fn walks(&self, commodity: CommodityId) -> &[Walk] {
        &self.entries[commodity].walks
    }

    pub fn total_walks(&self) -> usize {
        self.entries.iter().map(|e| e.walks.len()).sum()
    }
}

struct Search<'a> {
    net: &'a Network,
    commodity: CommodityId,
    out: Vec<Vec<EdgeId>>,
    kappa: usize,
    limits: EnumerationLimits,
    /// Battery levels at previous visits of each node on the current walk.
    visits: Vec<Vec<f64>>,
    edges: Vec<EdgeId>,
    walks: Vec<Walk>,
    stats: EnumerationStats,
}

impl Search<'_> {
    fn extend(&mut self, node: NodeId, level: f64, price: f64) {
        let c = &self.net.commodities[self.commodity];
        for k in 0..self.out[node].len() {
            if self.stats.truncated {
                return;
            }
            let e = self.out[node][k];
            self.stats.explored += 1;
            let attrs = self.net.attrs[self.commodity][e];
            let next = next_level(level, attrs.battery_cost, c.battery_capacity);
            let next_price = price + attrs.price;
            let head = self.net.edges[e].head;
            let seen = &self.visits[head];
            let dominated = seen.last().is_some_and(|&prev| next <= prev);
            if !(next >= 0.0)
                || !c.within_budget(next_price)
                || self.edges.len() >= self.limits.max_length
                || seen.len() >= self.kappa
                || dominated
            {
                self.stats.pruned += 1;
                continue;
            }
            self.edges.push(e);
            self.visits[head].push(next);
            if head == c.sink {
                let walk = Walk::new(self.net, self.commodity, self.edges.clone())
                    .expect("search only builds incident walks");
                self.walks.push(walk);
                if self.walks.len() >= self.limits.max_walks {
                    self.stats.truncated = true;
                }
            }
            self.extend(head, next, next_price);
            self.visits[head].pop();
            self.edges.pop();
        }
    }
}

/// Depth-first enumeration of the energy-feasible walks of a commodity.
///
/// A walk is extended only while its battery stays in `[0, b_max]`, its price
/// stays within budget, every node is visited at most `κ` times, and every
/// revisit of a node happens with a strictly higher battery level than the
/// previous visit. Walks are emitted in lexicographic order of edge ids.
pub fn enumerate_feasible_walks(
    net: &Network,
    commodity: CommodityId,
    limits: &EnumerationLimits,
) -> Result<CatalogEntry, WalkError> {
    let c = &net.commodities[commodity];
    let kappa = limits
        .kappa
        .unwrap_or_else(|| visit_bound_kappa(net, commodity, limits.hard_cap).kappa);
    let mut search = Search {
        net,
        commodity,
        out: net.out_edges(),
        kappa,
        limits: *limits,
        visits: vec![Vec::new(); net.num_nodes()],
        edges: Vec::new(),
        walks: Vec::new(),
        stats: EnumerationStats::default(),
    };
    search.visits[c.source].push(c.initial_battery);
    search.extend(c.source, c.initial_battery, 0.0);
    if search.walks.is_empty() {
        return Err(WalkError::NoFeasibleWalk(c.name.clone()));
    }
    if search.stats.truncated {
        warn!("commodity {}: walk enumeration truncated at {} walks", c.name, limits.max_walks);
    }
    debug_assert!({
        let set: BTreeSet<_> = search.walks.iter().map(|w| w.edges.clone()).collect();
        set.len() == search.walks.len()
    });
    Ok(CatalogEntry { commodity, walks: search.walks, kappa, stats: search.stats })
}
