//! Base networks, commodities and the battery-extended network.
//!
//! Charging stations are expanded into per-option gadget cycles
//! `v -> aux(v, o) -> v`. The entry edge carries the option's duration,
//! price, capacity and (negative) battery cost; the return edge is a short,
//! free, uncapacitated hop back to the station node.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::equilibrium::AggregationSpec;
use crate::functions::StepFunction;

pub type NodeId = usize;
pub type EdgeId = usize;
pub type CommodityId = usize;

/// Default transit time of a gadget return edge.
pub const DEFAULT_RETURN_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Physical,
    RechargeEntry,
    RechargeReturn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub name: String,
    pub tail: NodeId,
    pub head: NodeId,
    pub transit_time: f64,
    pub capacity: f64,
    pub kind: EdgeKind,
}

/// Per commodity-edge battery consumption and price.
///
/// A battery cost of `+∞` closes the edge for the commodity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CommodityEdgeAttrs {
    pub battery_cost: f64,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Commodity {
    pub name: String,
    pub source: NodeId,
    pub sink: NodeId,
    /// Network inflow rate `u_i`.
    pub inflow: StepFunction,
    pub initial_battery: f64,
    pub battery_capacity: f64,
    /// `None` means no price budget.
    pub price_budget: Option<f64>,
    pub aggregation: AggregationSpec,
}

impl Commodity {
    pub fn within_budget(&self, price: f64) -> bool {
        self.price_budget.is_none_or(|p| price <= p)
    }
}

/// Battery effect of a recharge option.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Recharge {
    /// Recharge to the commodity's battery capacity.
    Full,
    /// Add a fixed amount of energy (capped at the capacity).
    Amount(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RechargeOption {
    pub mode: String,
    pub duration: f64,
    pub price: f64,
    pub recharge: Recharge,
    /// `None` means uncapacitated.
    pub capacity: Option<f64>,
    /// `None` means every commodity may use the option.
    pub compatible: Option<Vec<CommodityId>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargingStationSpec {
    pub node: NodeId,
    pub options: Vec<RechargeOption>,
}

/// Records which gadget an auxiliary node and its two edges came from.
#[derive(Clone, Debug, PartialEq)]
pub struct GadgetProvenance {
    pub station: usize,
    pub option: usize,
    pub station_node: NodeId,
    pub aux_node: NodeId,
    pub entry_edge: EdgeId,
    pub return_edge: EdgeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub node_names: Vec<String>,
    pub edges: Vec<Edge>,
    /// `attrs[commodity][edge]`.
    pub attrs: Vec<Vec<CommodityEdgeAttrs>>,
    pub commodities: Vec<Commodity>,
    pub gadgets: Vec<GadgetProvenance>,
    /// Time horizon `[0, T]` of the network inflow.
    pub horizon: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("unknown commodity {0}")]
    UnknownCommodity(String),
    #[error("recharge option {mode} at node {node}: {reason}")]
    BadOption { node: String, mode: String, reason: String },
    #[error("attribute table has {found} rows for {expected} commodities")]
    CommodityMismatch { expected: usize, found: usize },
    #[error("duplicate identifier {0}")]
    Duplicate(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

impl Network {
    pub fn num_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn attr(&self, commodity: CommodityId, e: EdgeId) -> CommodityEdgeAttrs {
        self.attrs[commodity][e]
    }

    pub fn node_index(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name)
    }

    /// Outgoing edges per node, each list sorted by edge id.
    pub fn out_edges(&self) -> Vec<Vec<EdgeId>> {
        let mut out = vec![Vec::new(); self.num_nodes()];
        for (id, e) in self.edges.iter().enumerate() {
            out[e.tail].push(id);
        }
        out
    }

    /// A capacity no edge flow can reach: total peak network inflow plus the
    /// sum of all finite edge capacities.
    pub fn never_binding_capacity(&self) -> f64 {
        let inflow: f64 = self.commodities.iter().map(|c| c.inflow.sup()).sum();
        let caps: f64 = self
            .edges
            .iter()
            .map(|e| e.capacity)
            .filter(|c| c.is_finite())
            .sum();
        (inflow + caps).max(1.0)
    }

    /// Replaces infinite edge capacities by [`Self::never_binding_capacity`].
    pub fn resolve_uncapacitated(&mut self) {
        let big = self.never_binding_capacity();
        for e in &mut self.edges {
            if e.capacity == f64::INFINITY {
                e.capacity = big;
            }
        }
    }

    /// Looks up the gadget an edge belongs to.
    pub fn gadget_of_edge(&self, e: EdgeId) -> Option<&GadgetProvenance> {
        self.gadgets
            .iter()
            .find(|g| g.entry_edge == e || g.return_edge == e)
    }
}

/// Expands every station option into a two-edge recharge cycle.
///
/// Options without a capacity, and all return edges, get
/// [`Network::never_binding_capacity`] of the base network.
pub fn build_battery_extended_network(
    base: &Network,
    stations: &[ChargingStationSpec],
    return_epsilon: f64,
) -> Result<Network, NetworkError> {
    if !(return_epsilon > 0.0 && return_epsilon.is_finite()) {
        return Err(NetworkError::Invalid(format!(
            "return edge transit time must be positive, got {return_epsilon}"
        )));
    }
    if base.attrs.len() != base.commodities.len() {
        return Err(NetworkError::CommodityMismatch {
            expected: base.commodities.len(),
            found: base.attrs.len(),
        });
    }
    let mut net = base.clone();
    let big = base.never_binding_capacity();
    for (s, station) in stations.iter().enumerate() {
        let node_name = base
            .node_names
            .get(station.node)
            .ok_or_else(|| NetworkError::UnknownNode(station.node.to_string()))?
            .clone();
        for (o, opt) in station.options.iter().enumerate() {
            let bad = |reason: &str| NetworkError::BadOption {
                node: node_name.clone(),
                mode: opt.mode.clone(),
                reason: reason.to_string(),
            };
            if !(opt.duration > 0.0 && opt.duration.is_finite()) {
                return Err(bad("duration must be positive"));
            }
            if !(opt.price >= 0.0 && opt.price.is_finite()) {
                return Err(bad("price must be non-negative"));
            }
            if let Some(c) = opt.capacity {
                if !(c > 0.0) {
                    return Err(bad("capacity must be positive"));
                }
            }
            if let Recharge::Amount(a) = opt.recharge {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(bad("recharge amount must be non-negative"));
                }
            }
            if let Some(ids) = &opt.compatible {
                if let Some(&bad_id) = ids.iter().find(|&&i| i >= base.commodities.len()) {
                    return Err(NetworkError::UnknownCommodity(bad_id.to_string()));
                }
            }
            let entry_name = format!("{}-entry", opt.mode);
            let return_name = format!("{}-return", opt.mode);
            if net.edge_index(&entry_name).is_some() || net.edge_index(&return_name).is_some() {
                return Err(NetworkError::Duplicate(opt.mode.clone()));
            }

            let aux = net.node_names.len();
            net.node_names.push(format!("{node_name}:{}", opt.mode));
            let entry_edge = net.edges.len();
            net.edges.push(Edge {
                name: entry_name,
                tail: station.node,
                head: aux,
                transit_time: opt.duration,
                capacity: opt.capacity.unwrap_or(big),
                kind: EdgeKind::RechargeEntry,
            });
            let return_edge = net.edges.len();
            net.edges.push(Edge {
                name: return_name,
                tail: aux,
                head: station.node,
                transit_time: return_epsilon,
                capacity: big,
                kind: EdgeKind::RechargeReturn,
            });
            for (i, commodity) in base.commodities.iter().enumerate() {
                let allowed = opt.compatible.as_ref().is_none_or(|ids| ids.contains(&i));
                let entry = if allowed {
                    CommodityEdgeAttrs {
                        battery_cost: match opt.recharge {
                            Recharge::Full => -commodity.battery_capacity,
                            Recharge::Amount(a) => -a,
                        },
                        price: opt.price,
                    }
                } else {
                    CommodityEdgeAttrs { battery_cost: f64::INFINITY, price: opt.price }
                };
                net.attrs[i].push(entry);
                net.attrs[i].push(CommodityEdgeAttrs::default());
            }
            net.gadgets.push(GadgetProvenance {
                station: s,
                option: o,
                station_node: station.node,
                aux_node: aux,
                entry_edge,
                return_edge,
            });
        }
    }
    Ok(net)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    NonPositiveTransitTime { edge: String, value: f64 },
    NonPositiveCapacity { edge: String, value: f64 },
    SelfLoop { edge: String },
    NegativePrice { commodity: String, edge: String, value: f64 },
    UnreachableSink { commodity: String },
    EmptyInflow { commodity: String },
    InflowOutsideHorizon { commodity: String, support_end: f64, horizon: f64 },
    BadBattery { commodity: String, initial: f64, capacity: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveTransitTime { edge, value } => {
                write!(f, "edge {edge}: transit time {value} is not positive")
            }
            Self::NonPositiveCapacity { edge, value } => {
                write!(f, "edge {edge}: capacity {value} is not positive")
            }
            Self::SelfLoop { edge } => write!(f, "edge {edge} is a self-loop"),
            Self::NegativePrice { commodity, edge, value } => {
                write!(f, "commodity {commodity}, edge {edge}: negative price {value}")
            }
            Self::UnreachableSink { commodity } => {
                write!(f, "commodity {commodity}: sink unreachable from source")
            }
            Self::EmptyInflow { commodity } => write!(f, "commodity {commodity}: inflow is zero"),
            Self::InflowOutsideHorizon { commodity, support_end, horizon } => write!(
                f,
                "commodity {commodity}: inflow ends at {support_end}, after horizon {horizon}"
            ),
            Self::BadBattery { commodity, initial, capacity } => write!(
                f,
                "commodity {commodity}: need 0 < initial battery {initial} <= capacity {capacity}"
            ),
        }
    }
}

/// Checks the type invariants. An empty list means the network is valid.
pub fn validate_network(net: &Network) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for e in &net.edges {
        if !(e.transit_time > 0.0 && e.transit_time.is_finite()) {
            diags.push(Diagnostic::NonPositiveTransitTime { edge: e.name.clone(), value: e.transit_time });
        }
        if !(e.capacity > 0.0) {
            diags.push(Diagnostic::NonPositiveCapacity { edge: e.name.clone(), value: e.capacity });
        }
        if e.tail == e.head {
            diags.push(Diagnostic::SelfLoop { edge: e.name.clone() });
        }
    }
    for (i, c) in net.commodities.iter().enumerate() {
        if let Some(row) = net.attrs.get(i) {
            for (e, a) in row.iter().enumerate() {
                if a.price < 0.0 {
                    diags.push(Diagnostic::NegativePrice {
                        commodity: c.name.clone(),
                        edge: net.edges[e].name.clone(),
                        value: a.price,
                    });
                }
            }
        }
        if !(c.initial_battery > 0.0 && c.initial_battery <= c.battery_capacity) {
            diags.push(Diagnostic::BadBattery {
                commodity: c.name.clone(),
                initial: c.initial_battery,
                capacity: c.battery_capacity,
            });
        }
        if c.inflow.total() <= 0.0 {
            diags.push(Diagnostic::EmptyInflow { commodity: c.name.clone() });
        } else if c.inflow.support_end() > net.horizon * (1.0 + 1e-12) {
            diags.push(Diagnostic::InflowOutsideHorizon {
                commodity: c.name.clone(),
                support_end: c.inflow.support_end(),
                horizon: net.horizon,
            });
        }
        if !sink_reachable(net, i) {
            diags.push(Diagnostic::UnreachableSink { commodity: c.name.clone() });
        }
    }
    diags
}

/// Breadth-first search over the edges open to the commodity.
fn sink_reachable(net: &Network, commodity: CommodityId) -> bool {
    let c = &net.commodities[commodity];
    let out = net.out_edges();
    let mut seen = vec![false; net.num_nodes()];
    let mut queue = VecDeque::from([c.source]);
    seen[c.source] = true;
    while let Some(v) = queue.pop_front() {
        if v == c.sink {
            return true;
        }
        for &e in &out[v] {
            let open = net
                .attrs
                .get(commodity)
                .and_then(|row| row.get(e))
                .is_none_or(|a| a.battery_cost.is_finite());
            let w = net.edges[e].head;
            if open && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{example1, Example1Variant};

    #[test]
    fn example1_c_gadgets() {
        let net = example1(Example1Variant::C);
        assert_eq!(net.num_nodes(), 4 + 2);
        assert_eq!(net.num_edges(), 5 + 4);
        assert_eq!(net.gadgets.len(), 2);
        let m1 = net.edge_index("m1-entry").unwrap();
        let m2 = net.edge_index("m2-entry").unwrap();
        assert_eq!(net.edge(m1).transit_time, 1.5);
        assert_eq!(net.attr(0, m1).battery_cost, -6.0);
        assert_eq!(net.attr(0, m2).price, 7.0);
        let ret = net.edge_index("m1-return").unwrap();
        assert_eq!(net.edge(ret).transit_time, DEFAULT_RETURN_EPSILON);
        assert_eq!(net.attr(0, ret), CommodityEdgeAttrs::default());
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn empty_station_list_is_identity() {
        let base = example1(Example1Variant::B);
        let net = build_battery_extended_network(&base, &[], DEFAULT_RETURN_EPSILON).unwrap();
        assert_eq!(net, base);
    }

    #[test]
    fn full_recharge_cost_is_minus_capacity() {
        let base = example1(Example1Variant::B);
        let v = base.node_index("v").unwrap();
        let station = ChargingStationSpec {
            node: v,
            options: vec![RechargeOption {
                mode: "fast".into(),
                duration: 1.0,
                price: 0.0,
                recharge: Recharge::Full,
                capacity: None,
                compatible: None,
            }],
        };
        let net = build_battery_extended_network(&base, &[station], 1e-3).unwrap();
        let entry = net.gadgets[0].entry_edge;
        assert_eq!(net.attr(0, entry).battery_cost, -6.0);
        assert_eq!(net.edge(net.gadgets[0].return_edge).transit_time, 1e-3);
    }

    #[test]
    fn gadget_errors() {
        let base = example1(Example1Variant::B);
        let opt = RechargeOption {
            mode: "x".into(),
            duration: 0.0,
            price: 0.0,
            recharge: Recharge::Full,
            capacity: None,
            compatible: None,
        };
        let err = build_battery_extended_network(
            &base,
            &[ChargingStationSpec { node: 1, options: vec![opt.clone()] }],
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::BadOption { .. }));
        let err = build_battery_extended_network(
            &base,
            &[ChargingStationSpec { node: 99, options: vec![] }],
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::UnknownNode(_)));
        let opt = RechargeOption { duration: 1.0, compatible: Some(vec![3]), ..opt };
        let err = build_battery_extended_network(
            &base,
            &[ChargingStationSpec { node: 1, options: vec![opt] }],
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::UnknownCommodity(_)));
    }

    #[test]
    fn incompatible_commodity_gets_closed_edge() {
        let base = example1(Example1Variant::B);
        let opt = RechargeOption {
            mode: "slow".into(),
            duration: 2.0,
            price: 0.0,
            recharge: Recharge::Amount(2.0),
            capacity: Some(1.0),
            compatible: Some(vec![]),
        };
        let net =
            build_battery_extended_network(&base, &[ChargingStationSpec { node: 2, options: vec![opt] }], 1e-6)
                .unwrap();
        assert_eq!(net.attr(0, net.gadgets[0].entry_edge).battery_cost, f64::INFINITY);
    }

    #[test]
    fn zero_capacity_is_diagnosed() {
        let mut net = example1(Example1Variant::A);
        net.edges[2].capacity = 0.0;
        let diags = validate_network(&net);
        assert_eq!(diags.len(), 1);
        assert!(matches!(diags[0], Diagnostic::NonPositiveCapacity { .. }));
    }

    #[test]
    fn unreachable_sink_is_diagnosed() {
        let mut net = example1(Example1Variant::A);
        // Remove e3, the only u -> v edge.
        net.edges[2].head = 0;
        net.edges[2].tail = 1;
        let diags = validate_network(&net);
        assert_eq!(diags, vec![Diagnostic::UnreachableSink { commodity: "c0".into() }]);
    }
}
