//! Exact network loading in the Vickrey point-queue model.
//!
//! Each `(commodity, walk, position)` triple is a flow class travelling on
//! one edge. The inflow of the first class of a walk is the walk's inflow
//! rate; the inflow of every later class is the outflow of the class before
//! it. Edges are advanced independently: an edge can be loaded up to the time
//! until which the outflows of all its feeding edges are known, which is at
//! least one transit time ahead of what those edges have consumed. Within a
//! window every class inflow is piecewise constant, so the queue evolves
//! linearly and the FIFO outflow of every class is piecewise constant as well.

use std::collections::VecDeque;

use thiserror::Error;

use crate::flow::{FlowError, WalkFlow};
use crate::functions::{PiecewiseLinearFn, StepFunction, TIME_EPS};
use crate::netmodel::{CommodityId, EdgeId, Network};
use crate::walks::WalkCatalog;

/// Queues below this volume are treated as empty.
const QUEUE_EPS: f64 = 1e-12;

pub const DEFAULT_MAX_EVENTS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadingOptions {
    pub max_events: usize,
}

impl Default for LoadingOptions {
    fn default() -> Self {
        Self { max_events: DEFAULT_MAX_EVENTS }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LoadingError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("commodity {commodity}, walk {walk} references unknown edge {edge}")]
    UnknownEdge { commodity: CommodityId, walk: usize, edge: EdgeId },
    #[error("event limit of {0} exceeded")]
    EventLimit(usize),
    #[error("loading made no progress at time {0}")]
    Stalled(f64),
}

/// Flows, queue and exit times of one edge.
#[derive(Clone, Debug)]
pub struct EdgeTrace {
    pub transit_time: f64,
    pub capacity: f64,
    /// Aggregate inflow rate `f^+_e`.
    pub inflow: StepFunction,
    /// Aggregate outflow rate `f^-_e`.
    pub outflow: StepFunction,
    /// Queue volume `q_e`.
    pub queue: PiecewiseLinearFn,
}

impl EdgeTrace {
    /// Queue volume at `θ`; after the last breakpoint the queue drains at
    /// capacity with zero inflow.
    pub fn queue_at(&self, theta: f64) -> f64 {
        match self.queue.last_point() {
            None => 0.0,
            Some((t, q)) if theta >= t => (q - self.capacity * (theta - t)).max(0.0),
            Some(_) => self.queue.eval(theta).max(0.0),
        }
    }

    /// `T_e(θ) = θ + τ_e + q_e(θ) / ν_e`.
    pub fn exit_time(&self, theta: f64) -> f64 {
        theta + self.transit_time + self.queue_at(theta) / self.capacity
    }
}

#[derive(Clone, Copy, Debug)]
struct Class {
    commodity: CommodityId,
    walk: usize,
    position: usize,
    edge: EdgeId,
}

/// Result of loading a walk-flow.
#[derive(Clone, Debug)]
pub struct LoadingResult {
    pub edges: Vec<EdgeTrace>,
    classes: Vec<Class>,
    /// First class of each walk, `[commodity][walk]`.
    class_offset: Vec<Vec<usize>>,
    walk_edges: Vec<Vec<Vec<EdgeId>>>,
    walk_inflow: Vec<Vec<StepFunction>>,
    class_outflow: Vec<StepFunction>,
    /// Last time any flow leaves an edge.
    pub horizon: f64,
    pub events: usize,
}

struct EdgeRun {
    classes: Vec<usize>,
    cursors: Vec<usize>,
    /// Inflow is processed on `[0, done)`.
    done: f64,
    queue: f64,
    finished: bool,
}

struct Engine<'a> {
    result: LoadingResult,
    runs: Vec<EdgeRun>,
    options: &'a LoadingOptions,
}

/// Loads `flow` into the network: computes every edge's queue and in- and
/// outflows and the per-walk flows at each position.
pub fn network_loading(
    net: &Network,
    catalog: &WalkCatalog,
    flow: &WalkFlow,
    options: &LoadingOptions,
) -> Result<LoadingResult, LoadingError> {
    flow.check_shape(catalog)?;
    let mut classes = Vec::new();
    let mut class_offset = Vec::new();
    let mut walk_edges = Vec::new();
    let mut walk_inflow = Vec::new();
    for (i, entry) in catalog.entries.iter().enumerate() {
        let mut offsets = Vec::with_capacity(entry.walks.len());
        let mut edges_i = Vec::with_capacity(entry.walks.len());
        let mut inflow_i = Vec::with_capacity(entry.walks.len());
        for (w, walk) in entry.walks.iter().enumerate() {
            offsets.push(classes.len());
            for (position, &edge) in walk.edges.iter().enumerate() {
                if edge >= net.num_edges() {
                    return Err(LoadingError::UnknownEdge { commodity: i, walk: w, edge });
                }
                classes.push(Class { commodity: i, walk: w, position, edge });
            }
            edges_i.push(walk.edges.clone());
            inflow_i.push(flow.walk_rate_function(i, w));
        }
        class_offset.push(offsets);
        walk_edges.push(edges_i);
        walk_inflow.push(inflow_i);
    }

    let mut runs: Vec<EdgeRun> = (0..net.num_edges())
        .map(|_| EdgeRun { classes: Vec::new(), cursors: Vec::new(), done: 0.0, queue: 0.0, finished: false })
        .collect();
    for (c, class) in classes.iter().enumerate() {
        runs[class.edge].classes.push(c);
        runs[class.edge].cursors.push(0);
    }
    let edges = net
        .edges
        .iter()
        .map(|e| EdgeTrace {
            transit_time: e.transit_time,
            capacity: e.capacity,
            inflow: StepFunction::new(),
            outflow: StepFunction::new(),
            queue: PiecewiseLinearFn::from_points(vec![(0.0, 0.0)]),
        })
        .collect();
    let num_classes = classes.len();
    let mut engine = Engine {
        result: LoadingResult {
            edges,
            classes,
            class_offset,
            walk_edges,
            walk_inflow,
            class_outflow: vec![StepFunction::new(); num_classes],
            horizon: 0.0,
            events: 0,
        },
        runs,
        options,
    };
    engine.run()?;
    let mut result = engine.result;
    result.horizon = result
        .edges
        .iter()
        .map(|e| e.outflow.support_end())
        .fold(0.0, f64::max);
    Ok(result)
}

impl Engine<'_> {
    fn predecessor(&self, c: usize) -> Option<usize> {
        (self.result.classes[c].position > 0).then(|| c - 1)
    }

    fn class_inflow(&self, c: usize) -> &StepFunction {
        match self.predecessor(c) {
            Some(p) => &self.result.class_outflow[p],
            None => {
                let class = self.result.classes[c];
                &self.result.walk_inflow[class.commodity][class.walk]
            }
        }
    }

    /// Time until which the outflow of edge `e` is determined.
    fn known_outflow(&self, e: EdgeId) -> f64 {
        let run = &self.runs[e];
        if run.finished {
            return f64::INFINITY;
        }
        self.result.edges[e].exit_time_with_queue(run.done, run.queue)
    }

    /// Edge processing order: feeding edges first where the feed graph is
    /// acyclic.
    fn sweep_order(&self) -> Vec<EdgeId> {
        let m = self.runs.len();
        let mut succ = vec![Vec::new(); m];
        let mut indeg = vec![0usize; m];
        for (c, class) in self.result.classes.iter().enumerate() {
            if let Some(p) = self.predecessor(c) {
                let from = self.result.classes[p].edge;
                if !succ[from].contains(&class.edge) {
                    succ[from].push(class.edge);
                    indeg[class.edge] += 1;
                }
            }
        }
        let mut queue: VecDeque<EdgeId> = (0..m).filter(|&e| indeg[e] == 0).collect();
        let mut order = Vec::with_capacity(m);
        let mut placed = vec![false; m];
        while let Some(e) = queue.pop_front() {
            order.push(e);
            placed[e] = true;
            for &s in &succ[e] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        order.extend((0..m).filter(|&e| !placed[e]));
        order
    }

    fn run(&mut self) -> Result<(), LoadingError> {
        let order = self.sweep_order();
        for &e in &order {
            if self.runs[e].classes.is_empty() {
                self.runs[e].finished = true;
            }
        }
        loop {
            let mut progress = false;
            let mut all_done = true;
            for &e in &order {
                if self.runs[e].finished {
                    continue;
                }
                progress |= self.extend(e)?;
                all_done &= self.runs[e].finished;
            }
            if all_done {
                return Ok(());
            }
            if !progress {
                let t = self.runs.iter().filter(|r| !r.finished).map(|r| r.done).fold(f64::INFINITY, f64::min);
                return Err(LoadingError::Stalled(t));
            }
        }
    }

    /// Advances edge `e` as far as its feeders allow. Returns whether any
    /// progress was made.
    fn extend(&mut self, e: EdgeId) -> Result<bool, LoadingError> {
        let start = self.runs[e].done;
        let mut limit = f64::INFINITY;
        for &c in &self.runs[e].classes {
            if let Some(p) = self.predecessor(c) {
                limit = limit.min(self.known_outflow(self.result.classes[p].edge));
            }
        }
        let complete = limit == f64::INFINITY;
        if complete {
            limit = self.runs[e]
                .classes
                .iter()
                .map(|&c| self.class_inflow(c).end())
                .fold(start, f64::max);
        } else if limit <= start {
            return Ok(false);
        }

        let mut cuts = vec![start];
        {
            let run = &mut self.runs[e];
            for (k, &c) in run.classes.iter().enumerate() {
                let f = match (self.result.classes[c].position > 0).then(|| c - 1) {
                    Some(p) => &self.result.class_outflow[p],
                    None => {
                        let cl = self.result.classes[c];
                        &self.result.walk_inflow[cl.commodity][cl.walk]
                    }
                };
                f.breakpoints_in(start, limit, &mut run.cursors[k], &mut cuts);
            }
        }
        cuts.push(limit);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|b, a| *b - *a <= TIME_EPS * a.abs().max(1.0));
        if *cuts.last().unwrap() < limit {
            *cuts.last_mut().unwrap() = limit;
        }

        let n = self.runs[e].classes.len();
        let mut rates = vec![0.0; n];
        for window in cuts.windows(2) {
            let (a, b) = (window[0], window[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            for (rate, &class) in rates.iter_mut().zip(&self.runs[e].classes) {
                *rate = self.class_inflow(class).value_at(mid);
            }
            self.advance(e, a, b, &rates);
            self.result.events += 1;
            if self.result.events > self.options.max_events {
                return Err(LoadingError::EventLimit(self.options.max_events));
            }
        }
        self.runs[e].done = limit;

        if complete {
            let q = self.runs[e].queue;
            if q > 0.0 {
                let trace = &mut self.result.edges[e];
                let empty_at = limit + q / trace.capacity;
                trace.queue.push(empty_at, 0.0);
                self.runs[e].done = empty_at;
                self.runs[e].queue = 0.0;
            }
            self.runs[e].finished = true;
        }
        Ok(true)
    }

    /// Processes a window `[a, b)` of constant class inflow rates.
    fn advance(&mut self, e: EdgeId, a: f64, b: f64, rates: &[f64]) {
        let total: f64 = rates.iter().sum();
        let capacity = self.result.edges[e].capacity;
        let mut a = a;
        let mut q = self.runs[e].queue;
        if q < QUEUE_EPS {
            q = 0.0;
        }
        self.result.edges[e].inflow.push(a, b, total);
        if q > 0.0 && total < capacity {
            let empty_at = a + q / (capacity - total);
            if empty_at < b {
                self.queued_piece(e, a, empty_at, q, rates, total);
                q = 0.0;
                a = empty_at;
            }
        }
        if q > 0.0 || total > capacity {
            q = self.queued_piece(e, a, b, q, rates, total);
        } else {
            self.free_piece(e, a, b, rates, total);
        }
        self.runs[e].queue = q;
    }

    /// Piece during which the edge runs at capacity. Returns the queue at `b`.
    fn queued_piece(&mut self, e: EdgeId, a: f64, b: f64, q: f64, rates: &[f64], total: f64) -> f64 {
        let trace = &mut self.result.edges[e];
        let nu = trace.capacity;
        let q_end = (q + (total - nu) * (b - a)).max(0.0);
        let q_end = if q_end < QUEUE_EPS { 0.0 } else { q_end };
        let exit_a = trace.exit_time_with_queue(a, q);
        let exit_b = trace.exit_time_with_queue(b, q_end).max(exit_a);
        trace.queue.push(a, q);
        trace.queue.push(b, q_end);
        if total > 0.0 && exit_b > exit_a {
            trace.outflow.push(exit_a, exit_b, nu);
            let run = &self.runs[e];
            for (k, &c) in run.classes.iter().enumerate() {
                if rates[k] > 0.0 {
                    self.result.class_outflow[c].push(exit_a, exit_b, rates[k] * nu / total);
                }
            }
        }
        q_end
    }

    fn free_piece(&mut self, e: EdgeId, a: f64, b: f64, rates: &[f64], total: f64) {
        let trace = &mut self.result.edges[e];
        let tau = trace.transit_time;
        trace.queue.push(a, 0.0);
        trace.queue.push(b, 0.0);
        if total > 0.0 {
            trace.outflow.push(a + tau, b + tau, total);
            let run = &self.runs[e];
            for (k, &c) in run.classes.iter().enumerate() {
                if rates[k] > 0.0 {
                    self.result.class_outflow[c].push(a + tau, b + tau, rates[k]);
                }
            }
        }
    }
}

impl EdgeTrace {
    fn exit_time_with_queue(&self, theta: f64, queue: f64) -> f64 {
        theta + self.transit_time + queue / self.capacity
    }
}

/// Largest violations of the flow-over-time constraints found by
/// [`LoadingResult::check_invariants`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InvariantReport {
    /// `max |Σ_e (F^+_e − F^-_e) − (Σ_i U_i − Z)|` over event times.
    pub conservation: f64,
    /// Most negative queue value, reported as a positive number.
    pub negative_queue: f64,
    /// Largest excess of an outflow rate over the capacity.
    pub capacity_excess: f64,
    /// Largest decrease of an exit-time function between breakpoints.
    pub fifo_violation: f64,
    /// `max |Σ classes − aggregate|` of cumulative edge flows.
    pub aggregation: f64,
    /// `max |q_e(θ) − (F^+_e(θ) − F^-_e(θ + τ_e))|`.
    pub queue_consistency: f64,
}

impl LoadingResult {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn exit_time(&self, edge: EdgeId, theta: f64) -> f64 {
        self.edges[edge].exit_time(theta)
    }

    pub fn queue_at(&self, edge: EdgeId, theta: f64) -> f64 {
        self.edges[edge].queue_at(theta)
    }

    pub fn cumulative_inflow(&self, edge: EdgeId, theta: f64) -> f64 {
        self.edges[edge].inflow.integral_to(theta)
    }

    pub fn cumulative_outflow(&self, edge: EdgeId, theta: f64) -> f64 {
        self.edges[edge].outflow.integral_to(theta)
    }

    /// Arrival time at the end of the walk when entering at `θ`: the exit
    /// times composed along the walk.
    pub fn walk_arrival(&self, commodity: CommodityId, walk: usize, theta: f64) -> f64 {
        self.walk_edges[commodity][walk]
            .iter()
            .fold(theta, |t, &e| self.edges[e].exit_time(t))
    }

    /// `μ(θ)`: travel time along the walk when entering at `θ`.
    pub fn walk_travel_time(&self, commodity: CommodityId, walk: usize, theta: f64) -> f64 {
        self.walk_arrival(commodity, walk, theta) - theta
    }

    /// Walk inflow rate at position `j` of the walk (`f^{W,+}_{i,j}`).
    pub fn class_inflow(&self, commodity: CommodityId, walk: usize, position: usize) -> &StepFunction {
        if position == 0 {
            &self.walk_inflow[commodity][walk]
        } else {
            &self.class_outflow[self.class_offset[commodity][walk] + position - 1]
        }
    }

    /// Walk outflow rate at position `j` of the walk (`f^{W,-}_{i,j}`).
    pub fn class_outflow(&self, commodity: CommodityId, walk: usize, position: usize) -> &StepFunction {
        &self.class_outflow[self.class_offset[commodity][walk] + position]
    }

    pub fn walk_edges(&self, commodity: CommodityId, walk: usize) -> &[EdgeId] {
        &self.walk_edges[commodity][walk]
    }

    /// Volume that has left the network by `θ` (`Z(θ)`).
    pub fn arrived(&self, theta: f64) -> f64 {
        let mut z = 0.0;
        for (i, walks) in self.walk_edges.iter().enumerate() {
            for (w, edges) in walks.iter().enumerate() {
                z += self.class_outflow(i, w, edges.len() - 1).integral_to(theta);
            }
        }
        z
    }

    /// Volume that has entered the network by `θ`.
    pub fn injected(&self, theta: f64) -> f64 {
        self.walk_inflow.iter().flatten().map(|f| f.integral_to(theta)).sum()
    }

    /// All breakpoints of aggregate edge flows, sorted and deduplicated.
    pub fn event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .edges
            .iter()
            .flat_map(|e| e.inflow.breakpoints().iter().chain(e.outflow.breakpoints()))
            .copied()
            .collect();
        times.extend(self.walk_inflow.iter().flatten().flat_map(|f| f.breakpoints().iter().copied()));
        times.push(0.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// Evaluates the flow-over-time constraints at every event time.
    pub fn check_invariants(&self) -> InvariantReport {
        let times = self.event_times();
        let mut report = InvariantReport::default();

        for &t in &times {
            let load: f64 = (0..self.edges.len())
                .map(|e| self.cumulative_inflow(e, t) - self.cumulative_outflow(e, t))
                .sum();
            let expected = self.injected(t) - self.arrived(t);
            report.conservation = report.conservation.max((load - expected).abs());
        }

        let mut per_edge_classes: Vec<Vec<usize>> = vec![Vec::new(); self.edges.len()];
        for (c, class) in self.classes.iter().enumerate() {
            per_edge_classes[class.edge].push(c);
        }
        for (e, trace) in self.edges.iter().enumerate() {
            for &(t, q) in trace.queue.points() {
                report.negative_queue = report.negative_queue.max(-q);
                let by_definition = trace.inflow.integral_to(t) - trace.outflow.integral_to(t + trace.transit_time);
                report.queue_consistency = report.queue_consistency.max((by_definition - q).abs());
            }
            for (_, _, rate) in trace.outflow.pieces() {
                report.capacity_excess = report.capacity_excess.max(rate - trace.capacity);
            }
            let pts = trace.queue.points();
            for pair in pts.windows(2) {
                let t0 = trace.exit_time(pair[0].0);
                let t1 = trace.exit_time(pair[1].0);
                report.fifo_violation = report.fifo_violation.max(t0 - t1);
            }
            let mut check_times: Vec<f64> = trace
                .inflow
                .breakpoints()
                .iter()
                .chain(trace.outflow.breakpoints())
                .copied()
                .collect();
            check_times.sort_by(f64::total_cmp);
            for &t in &check_times {
                let mut class_in = 0.0;
                let mut class_out = 0.0;
                for &c in &per_edge_classes[e] {
                    let cl = self.classes[c];
                    class_in += self.class_inflow(cl.commodity, cl.walk, cl.position).integral_to(t);
                    class_out += self.class_outflow[c].integral_to(t);
                }
                let err_in = (class_in - trace.inflow.integral_to(t)).abs();
                let err_out = (class_out - trace.outflow.integral_to(t)).abs();
                report.aggregation = report.aggregation.max(err_in).max(err_out);
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::AggregationSpec;
    use crate::flow::Discretization;
    use crate::netmodel::{Commodity, CommodityEdgeAttrs, Edge, EdgeKind};
    use crate::walks::Walk;

    /// Line network `0 -> 1 -> ... -> k` with one commodity using it.
    fn line(edges: &[(f64, f64)], horizon: f64) -> Network {
        Network {
            node_names: (0..=edges.len()).map(|i| i.to_string()).collect(),
            edges: edges
                .iter()
                .enumerate()
                .map(|(k, &(tau, nu))| Edge {
                    name: format!("a{k}"),
                    tail: k,
                    head: k + 1,
                    transit_time: tau,
                    capacity: nu,
                    kind: EdgeKind::Physical,
                })
                .collect(),
            attrs: vec![vec![CommodityEdgeAttrs::default(); edges.len()]],
            commodities: vec![Commodity {
                name: "c".into(),
                source: 0,
                sink: edges.len(),
                inflow: StepFunction::constant(0.0, horizon, 1.0),
                initial_battery: 1.0,
                battery_capacity: 1.0,
                price_budget: None,
                aggregation: AggregationSpec::Lambda(1.0),
            }],
            gadgets: vec![],
            horizon,
        }
    }

    fn single_walk(net: &Network, rates: Vec<f64>) -> (WalkCatalog, WalkFlow) {
        let walk = Walk::new(net, 0, (0..net.num_edges()).collect()).unwrap();
        let catalog = WalkCatalog::from_walks(vec![vec![walk]]);
        let grid = Discretization::new(net.horizon, rates.len());
        let flow = WalkFlow { grid, rates: vec![rates.into_iter().map(|r| vec![r]).collect()] };
        (catalog, flow)
    }

    #[test]
    fn single_queue_closed_form() {
        let net = line(&[(1.0, 1.0)], 1.0);
        let (catalog, flow) = single_walk(&net, vec![3.0]);
        let res = network_loading(&net, &catalog, &flow, &LoadingOptions::default()).unwrap();
        for theta in [0.0, 0.25, 0.5, 1.0] {
            assert!((res.queue_at(0, theta) - 2.0 * theta).abs() < 1e-12);
        }
        for theta in [1.5, 2.0, 3.0] {
            assert!((res.queue_at(0, theta) - (3.0 - theta)).abs() < 1e-12);
        }
        assert_eq!(res.queue_at(0, 4.0), 0.0);
        assert!((res.exit_time(0, 1.0) - 4.0).abs() < 1e-12);
        assert!((res.cumulative_outflow(0, 4.0) - 3.0).abs() < 1e-12);
        assert!((res.walk_arrival(0, 0, 1.0) - 4.0).abs() < 1e-12);
        assert!((res.horizon - 4.0).abs() < 1e-12);
        let inv = res.check_invariants();
        assert!(inv.conservation < 1e-9 && inv.queue_consistency < 1e-9, "{inv:?}");
    }

    #[test]
    fn zero_inflow_gives_free_flow() {
        let net = line(&[(1.0, 1.0), (2.0, 0.5)], 2.0);
        let (catalog, flow) = single_walk(&net, vec![0.0, 0.0]);
        let res = network_loading(&net, &catalog, &flow, &LoadingOptions::default()).unwrap();
        for theta in [0.0, 0.7, 5.0] {
            assert_eq!(res.exit_time(0, theta), theta + 1.0);
            assert_eq!(res.exit_time(1, theta), theta + 2.0);
            assert_eq!(res.walk_travel_time(0, 0, theta), 3.0);
        }
    }

    #[test]
    fn exit_time_formula() {
        let trace = EdgeTrace {
            transit_time: 2.0,
            capacity: 0.5,
            inflow: StepFunction::new(),
            outflow: StepFunction::new(),
            queue: PiecewiseLinearFn::from_points(vec![(0.0, 3.0), (10.0, 3.0)]),
        };
        assert_eq!(trace.exit_time(4.0), 4.0 + 8.0);
    }

    #[test]
    fn fifo_split_between_two_walks() {
        // Two parallel two-edge walks sharing the first edge.
        let mut net = line(&[(1.0, 1.0)], 1.0);
        net.node_names.push("2".into());
        net.edges.push(Edge { name: "b".into(), tail: 1, head: 2, transit_time: 1.0, capacity: 10.0, kind: EdgeKind::Physical });
        net.edges.push(Edge { name: "c".into(), tail: 1, head: 2, transit_time: 1.0, capacity: 10.0, kind: EdgeKind::Physical });
        net.attrs[0] = vec![CommodityEdgeAttrs::default(); 3];
        net.commodities[0].sink = 2;
        let w1 = Walk::new(&net, 0, vec![0, 1]).unwrap();
        let w2 = Walk::new(&net, 0, vec![0, 2]).unwrap();
        let catalog = WalkCatalog::from_walks(vec![vec![w1, w2]]);
        let flow = WalkFlow { grid: Discretization::new(1.0, 1), rates: vec![vec![vec![2.0, 1.0]]] };
        let res = network_loading(&net, &catalog, &flow, &LoadingOptions::default()).unwrap();
        // The queue exits over [1, 4] at capacity 1, split 2/3 : 1/3.
        let f1 = res.class_outflow(0, 0, 0);
        let f2 = res.class_outflow(0, 1, 0);
        for t in [1.5, 2.5, 3.9] {
            assert!((f1.value_at(t) - 2.0 / 3.0).abs() < 1e-12);
            assert!((f2.value_at(t) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((f1.total() - 2.0).abs() < 1e-12);
        assert!((res.class_inflow(0, 1, 1).total() - 1.0).abs() < 1e-12);
        let inv = res.check_invariants();
        assert!(inv.aggregation < 1e-9 && inv.conservation < 1e-9, "{inv:?}");
    }
}
