//! Test oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use evq_core::equilibrium::AggregationSpec;
use evq_core::netmodel::{Commodity, CommodityEdgeAttrs, Edge, EdgeKind, Network};
use evq_core::{Discretization, StepFunction, Walk, WalkCatalog, WalkFlow};
use rand::Rng;

/// A random single-commodity instance together with a walk-flow.
pub struct RandomInstance {
    pub net: Network,
    pub catalog: WalkCatalog,
    pub flow: WalkFlow,
}

/// All `0 → sink` paths of a DAG given as an edge list.
fn all_paths(edges: &[(usize, usize)], sink: usize) -> Vec<Vec<usize>> {
    fn go(edges: &[(usize, usize)], node: usize, sink: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == sink {
            out.push(path.clone());
            return;
        }
        for (e, &(a, b)) in edges.iter().enumerate() {
            if a == node {
                path.push(e);
                go(edges, b, sink, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(edges, 0, sink, &mut Vec::new(), &mut out);
    out
}

/// Builds a network on nodes `0..=3` from `(tail, head, τ, ν)`.
pub fn network_from(edges: &[(usize, usize, f64, f64)], inflow: StepFunction, horizon: f64) -> Network {
    Network {
        node_names: (0..4).map(|k| format!("n{k}")).collect(),
        edges: edges
            .iter()
            .enumerate()
            .map(|(k, &(tail, head, tau, nu))| Edge {
                name: format!("e{k}"),
                tail,
                head,
                transit_time: tau,
                capacity: nu,
                kind: EdgeKind::Physical,
            })
            .collect(),
        attrs: vec![vec![CommodityEdgeAttrs::default(); edges.len()]],
        commodities: vec![Commodity {
            name: "c".into(),
            source: 0,
            sink: 3,
            inflow,
            initial_battery: 1.0,
            battery_capacity: 1.0,
            price_budget: None,
            aggregation: AggregationSpec::LambdaTilde(0.0),
        }],
        gadgets: Vec::new(),
        horizon,
    }
}

/// Up to 5 edges on 4 nodes, up to 3 walks from node 0 to node 3 and a
/// walk-flow with up to 4 constant pieces per walk.
///
/// Transit times are multiples of 0.05 so that they are whole numbers of
/// simulator steps.
pub fn random_instance<R: Rng>(rng: &mut R, uncapacitated: bool) -> RandomInstance {
    let mut topo: Vec<(usize, usize)> = vec![];
    // A backbone path guarantees an s-t walk.
    let mut node = 0;
    while node < 3 {
        let next = rng.gen_range(node + 1..=3);
        topo.push((node, next));
        node = next;
    }
    let extra = rng.gen_range(0..=5 - topo.len());
    for _ in 0..extra {
        let a = rng.gen_range(0..3);
        let b = rng.gen_range(a + 1..=3);
        topo.push((a, b));
    }
    let edges: Vec<(usize, usize, f64, f64)> = topo
        .iter()
        .map(|&(a, b)| {
            let tau = rng.gen_range(2..=40) as f64 * 0.05;
            let nu = if uncapacitated { f64::INFINITY } else { rng.gen_range(0.3..3.0) };
            (a, b, tau, nu)
        })
        .collect();
    let mut paths = all_paths(&topo, 3);
    while paths.len() > 3 {
        let k = rng.gen_range(0..paths.len());
        paths.remove(k);
    }
    let horizon = rng.gen_range(2..=5) as f64;
    let intervals = rng.gen_range(1..=4);
    let grid = Discretization::new(horizon, intervals);
    let mut rates = vec![vec![0.0; paths.len()]; intervals];
    for row in rates.iter_mut() {
        for x in row.iter_mut() {
            *x = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..3.0) };
        }
    }
    let pieces: Vec<(f64, f64, f64)> = (0..intervals)
        .map(|j| {
            let (a, b) = grid.bounds(j);
            (a, b, rates[j].iter().sum())
        })
        .collect();
    let mut net = network_from(&edges, StepFunction::from_pieces(pieces), horizon);
    net.resolve_uncapacitated();
    let walks: Vec<Walk> = paths.into_iter().map(|p| Walk::new(&net, 0, p).expect("valid path")).collect();
    let catalog = WalkCatalog::from_walks(vec![walks]);
    let mut flow = WalkFlow::zeros(grid, &[catalog.walks(0).len()]);
    for (j, row) in rates.into_iter().enumerate() {
        flow.rates[0][j] = row;
    }
    RandomInstance { net, catalog, flow }
}

/// Cumulative edge flows sampled at the step boundaries `k·Δt`.
pub struct Simulation {
    pub dt: f64,
    /// `inflow[e][k]` = volume that entered `e` during `[0, k·Δt)`.
    pub inflow: Vec<Vec<f64>>,
    pub outflow: Vec<Vec<f64>>,
}

/// Forward-Euler point-queue simulator.
///
/// Volume entering an edge during a step waits `τ` steps, then joins a FIFO
/// queue that discharges at most `ν·Δt` per step. Packets that became ready
/// in the same step leave proportionally. Discharged volume enters the next
/// edge of its walk one step later.
pub fn simulate(net: &Network, catalog: &WalkCatalog, flow: &WalkFlow, dt: f64, end: f64) -> Simulation {
    struct Packet {
        ready: usize,
        amounts: Vec<(usize, f64)>,
    }
    // Classes: (commodity, walk, position).
    let mut classes = Vec::new();
    let mut first_class = Vec::new();
    for (i, entry) in catalog.entries.iter().enumerate() {
        let mut offsets = Vec::new();
        for (w, walk) in entry.walks.iter().enumerate() {
            offsets.push(classes.len());
            for (p, &e) in walk.edges.iter().enumerate() {
                classes.push((i, w, p, e));
            }
        }
        first_class.push(offsets);
    }
    let walk_fns: Vec<Vec<StepFunction>> = catalog
        .entries
        .iter()
        .enumerate()
        .map(|(i, entry)| (0..entry.walks.len()).map(|w| flow.walk_rate_function(i, w)).collect())
        .collect();

    let m = net.num_edges();
    let steps = (end / dt).ceil() as usize;
    let delay: Vec<usize> = net.edges.iter().map(|e| (e.transit_time / dt).round() as usize).collect();
    let mut queues: Vec<VecDeque<Packet>> = (0..m).map(|_| VecDeque::new()).collect();
    let mut pending = vec![0.0; classes.len()];
    let mut inflow = vec![vec![0.0; steps + 1]; m];
    let mut outflow = vec![vec![0.0; steps + 1]; m];

    for k in 0..steps {
        let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let mut entering: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (c, &(i, w, p, e)) in classes.iter().enumerate() {
            let amount = if p == 0 {
                let f = &walk_fns[i][w];
                f.integral_to(t1) - f.integral_to(t0)
            } else {
                std::mem::take(&mut pending[c])
            };
            if amount > 0.0 {
                entering[e].push((c, amount));
            }
        }
        for e in 0..m {
            let total: f64 = entering[e].iter().map(|x| x.1).sum();
            inflow[e][k + 1] = inflow[e][k] + total;
            if total > 0.0 {
                queues[e].push_back(Packet { ready: k + delay[e], amounts: std::mem::take(&mut entering[e]) });
            }
            let mut budget = net.edges[e].capacity * dt;
            let mut left = 0.0;
            while budget > 0.0 {
                let Some(front) = queues[e].front_mut() else { break };
                if front.ready > k {
                    break;
                }
                let size: f64 = front.amounts.iter().map(|x| x.1).sum();
                let share = if size <= budget { 1.0 } else { budget / size };
                for &mut (c, ref mut a) in front.amounts.iter_mut() {
                    let out = *a * share;
                    *a -= out;
                    left += out;
                    let (i, w, p, _) = classes[c];
                    if p + 1 < catalog.walks(i)[w].edges.len() {
                        pending[first_class[i][w] + p + 1] += out;
                    }
                }
                budget -= size * share;
                if share == 1.0 {
                    queues[e].pop_front();
                } else {
                    break;
                }
            }
            outflow[e][k + 1] = outflow[e][k] + left;
        }
    }
    Simulation { dt, inflow, outflow }
}

/// Sup-norm distance between the simulator's cumulative edge flows and the
/// exact ones, over all step boundaries.
pub fn sup_gap(sim: &Simulation, loading: &evq_core::LoadingResult) -> f64 {
    let mut gap: f64 = 0.0;
    for e in 0..sim.inflow.len() {
        for k in 0..sim.inflow[e].len() {
            let t = k as f64 * sim.dt;
            gap = gap.max((sim.inflow[e][k] - loading.cumulative_inflow(e, t)).abs());
            gap = gap.max((sim.outflow[e][k] - loading.cumulative_outflow(e, t)).abs());
        }
    }
    gap
}

/// A random network with battery costs and prices on up to 5 nodes, with
/// cycles and up to three recharge stations.
pub fn random_energy_network<R: Rng>(rng: &mut R) -> Network {
    use evq_core::netmodel::{build_battery_extended_network, ChargingStationSpec, Recharge, RechargeOption};
    let n = rng.gen_range(3..=5);
    let m = rng.gen_range(n..=n + 4);
    let mut edges = Vec::new();
    let mut attrs = Vec::new();
    for k in 0..m {
        // The first n-1 edges form a backbone 0 -> 1 -> ... -> n-1.
        let (a, b) = if k + 1 < n {
            (k, k + 1)
        } else {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n);
            while b == a {
                b = rng.gen_range(0..n);
            }
            (a, b)
        };
        edges.push(Edge {
            name: format!("e{k}"),
            tail: a,
            head: b,
            transit_time: 1.0,
            capacity: 1.0,
            kind: EdgeKind::Physical,
        });
        attrs.push(CommodityEdgeAttrs {
            battery_cost: rng.gen_range(0..=2) as f64,
            price: rng.gen_range(0..=2) as f64,
        });
    }
    let b_max = rng.gen_range(3..=6) as f64;
    let base = Network {
        node_names: (0..n).map(|k| format!("n{k}")).collect(),
        edges,
        attrs: vec![attrs],
        commodities: vec![Commodity {
            name: "c".into(),
            source: 0,
            sink: n - 1,
            inflow: StepFunction::constant(0.0, 1.0, 1.0),
            initial_battery: if rng.gen_bool(0.5) { b_max } else { rng.gen_range(1..=b_max as usize) as f64 },
            battery_capacity: b_max,
            price_budget: rng.gen_bool(0.5).then(|| rng.gen_range(2..=8) as f64),
            aggregation: AggregationSpec::LambdaTilde(1.0),
        }],
        gadgets: Vec::new(),
        horizon: 1.0,
    };
    let stations: Vec<ChargingStationSpec> = (0..rng.gen_range(0..=3))
        .map(|s| ChargingStationSpec {
            node: rng.gen_range(0..n),
            options: vec![RechargeOption {
                mode: format!("m{s}"),
                duration: 1.0,
                price: rng.gen_range(0..=3) as f64,
                recharge: if rng.gen_bool(0.5) { Recharge::Full } else { Recharge::Amount(rng.gen_range(1..=3) as f64) },
                capacity: None,
                compatible: None,
            }],
        })
        .collect();
    build_battery_extended_network(&base, &stations, 0.5).expect("random stations are well-formed")
}
