//! Instance files (JSON) and TNTP network import.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::AggregationSpec;
use crate::functions::StepFunction;
use crate::netmodel::{
    build_battery_extended_network, ChargingStationSpec, Commodity, CommodityEdgeAttrs, Edge, EdgeKind, Network,
    NetworkError, Recharge, RechargeOption, DEFAULT_RETURN_EPSILON,
};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("TNTP line {line}: {reason}")]
    Tntp { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub tau: f64,
    /// Missing means uncapacitated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommoditySpec {
    pub id: String,
    pub source: String,
    pub sink: String,
    /// `(t_start, t_end, rate)` pieces.
    pub inflow: Vec<(f64, f64, f64)>,
    pub b_init: f64,
    pub b_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default)]
    pub aggregation: AggregationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeAttrSpec {
    pub commodity: String,
    pub edge: String,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub p: f64,
}

/// `"full"` or an energy amount.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RechargeSpec {
    Amount(f64),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSpec {
    pub mode: String,
    pub tau: f64,
    #[serde(default)]
    pub price: f64,
    pub recharge: RechargeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Commodity ids allowed to use the option; missing means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commodities: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub node: String,
    pub options: Vec<OptionSpec>,
}

/// On-disk instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub commodities: Vec<CommoditySpec>,
    /// Battery costs and prices; unlisted pairs default to zero.
    #[serde(default)]
    pub edge_attrs: Vec<EdgeAttrSpec>,
    #[serde(default)]
    pub stations: Vec<StationSpec>,
    /// Time horizon; defaults to the end of the latest inflow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_epsilon: Option<f64>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Builds the battery-extended network.
    pub fn to_network(&self) -> Result<Network, InstanceError> {
        let mut node_index = HashMap::new();
        for (k, n) in self.nodes.iter().enumerate() {
            if node_index.insert(n.as_str(), k).is_some() {
                return Err(NetworkError::Duplicate(n.clone()).into());
            }
        }
        let node = |name: &str| node_index.get(name).copied().ok_or_else(|| NetworkError::UnknownNode(name.into()));

        let mut edge_index = HashMap::new();
        let mut edges = Vec::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            if edge_index.insert(e.id.as_str(), k).is_some() {
                return Err(NetworkError::Duplicate(e.id.clone()).into());
            }
            edges.push(Edge {
                name: e.id.clone(),
                tail: node(&e.tail)?,
                head: node(&e.head)?,
                transit_time: e.tau,
                capacity: e.nu.unwrap_or(f64::INFINITY),
                kind: EdgeKind::Physical,
            });
        }

        let mut commodity_index = HashMap::new();
        let mut commodities = Vec::with_capacity(self.commodities.len());
        for (k, c) in self.commodities.iter().enumerate() {
            if commodity_index.insert(c.id.as_str(), k).is_some() {
                return Err(NetworkError::Duplicate(c.id.clone()).into());
            }
            let mut pieces = c.inflow.clone();
            pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pieces.iter().any(|p| !(p.1 >= p.0 && p.2 >= 0.0 && p.2.is_finite()))
                || pieces.windows(2).any(|w| w[1].0 < w[0].1)
            {
                return Err(NetworkError::Invalid(format!("commodity {}: malformed inflow pieces", c.id)).into());
            }
            if !c.aggregation.is_valid() {
                return Err(NetworkError::Invalid(format!("commodity {}: invalid aggregation", c.id)).into());
            }
            commodities.push(Commodity {
                name: c.id.clone(),
                source: node(&c.source)?,
                sink: node(&c.sink)?,
                inflow: StepFunction::from_pieces(pieces),
                initial_battery: c.b_init,
                battery_capacity: c.b_max,
                price_budget: c.p_max,
                aggregation: c.aggregation,
            });
        }

        let mut attrs = vec![vec![CommodityEdgeAttrs::default(); edges.len()]; commodities.len()];
        for a in &self.edge_attrs {
            let i = *commodity_index
                .get(a.commodity.as_str())
                .ok_or_else(|| NetworkError::UnknownCommodity(a.commodity.clone()))?;
            let e = *edge_index.get(a.edge.as_str()).ok_or_else(|| NetworkError::UnknownEdge(a.edge.clone()))?;
            attrs[i][e] = CommodityEdgeAttrs { battery_cost: a.b, price: a.p };
        }

        let horizon = self.horizon.unwrap_or_else(|| {
            commodities.iter().map(|c| c.inflow.support_end()).fold(0.0, f64::max)
        });
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(NetworkError::Invalid(format!("horizon {horizon} is not positive")).into());
        }
        let mut base = Network { node_names: self.nodes.clone(), edges, attrs, commodities, gadgets: Vec::new(), horizon };
        base.resolve_uncapacitated();

        let mut modes = HashSet::new();
        let mut stations = Vec::with_capacity(self.stations.len());
        for s in &self.stations {
            let mut options = Vec::with_capacity(s.options.len());
            for o in &s.options {
                if !modes.insert(o.mode.as_str()) {
                    return Err(NetworkError::Duplicate(o.mode.clone()).into());
                }
                let recharge = match &o.recharge {
                    RechargeSpec::Amount(a) => Recharge::Amount(*a),
                    RechargeSpec::Keyword(k) if k == "full" => Recharge::Full,
                    RechargeSpec::Keyword(k) => {
                        return Err(NetworkError::Invalid(format!("mode {}: unknown recharge {k:?}", o.mode)).into())
                    }
                };
                let compatible = o
                    .commodities
                    .as_ref()
                    .map(|ids| {
                        ids.iter()
                            .map(|id| {
                                commodity_index
                                    .get(id.as_str())
                                    .copied()
                                    .ok_or_else(|| NetworkError::UnknownCommodity(id.clone()))
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .transpose()?;
                options.push(RechargeOption {
                    mode: o.mode.clone(),
                    duration: o.tau,
                    price: o.price,
                    recharge,
                    capacity: o.nu,
                    compatible,
                });
            }
            stations.push(ChargingStationSpec { node: node(&s.node)?, options });
        }
        Ok(build_battery_extended_network(
            &base,
            &stations,
            self.return_epsilon.unwrap_or(DEFAULT_RETURN_EPSILON),
        )?)
    }
}

/// Reads and builds an instance file.
pub fn load_instance(path: &Path) -> Result<Network, InstanceError> {
    InstanceFile::read(path)?.to_network()
}

/// Everything of an instance except the graph: merged into a TNTP import.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TntpAttrs {
    #[serde(default)]
    pub commodities: Vec<CommoditySpec>,
    #[serde(default)]
    pub edge_attrs: Vec<EdgeAttrSpec>,
    #[serde(default)]
    pub stations: Vec<StationSpec>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub return_epsilon: Option<f64>,
}

impl TntpAttrs {
    /// Parses an attrs document; blank input means no attributes.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Parses a TNTP `_net.tntp` file into nodes and edges.
///
/// Edges are named `init-term`; `free_flow_time` becomes the transit time and
/// `capacity × capacity_scale` the capacity.
pub fn parse_tntp_net(text: &str, capacity_scale: f64) -> Result<(Vec<String>, Vec<EdgeSpec>), InstanceError> {
    let mut num_nodes: Option<usize> = None;
    let mut in_data = false;
    let mut columns: Option<HashMap<String, usize>> = None;
    let mut edges = Vec::new();
    let mut names = HashSet::new();
    let mut max_node = 0usize;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !in_data {
            if let Some(rest) = line.strip_prefix("<NUMBER OF NODES>") {
                num_nodes = rest.trim().parse().ok();
            } else if line.starts_with("<END OF METADATA>") {
                in_data = true;
            }
            continue;
        }
        if let Some(header) = line.strip_prefix('~') {
            let cols: HashMap<String, usize> = header
                .split_whitespace()
                .filter(|c| *c != ";")
                .enumerate()
                .map(|(k, c)| (c.to_ascii_lowercase(), k))
                .collect();
            columns = Some(cols);
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches(';').split_whitespace().collect();
        let col = |name: &str, default: usize| -> usize {
            columns.as_ref().and_then(|c| c.get(name).copied()).unwrap_or(default)
        };
        let field = |name: &str, default: usize| -> Result<&str, InstanceError> {
            fields.get(col(name, default)).copied().ok_or_else(|| InstanceError::Tntp {
                line: ln + 1,
                reason: format!("missing column {name}"),
            })
        };
        let number = |name: &str, default: usize| -> Result<f64, InstanceError> {
            let s = field(name, default)?;
            s.parse().map_err(|_| InstanceError::Tntp { line: ln + 1, reason: format!("bad {name} value {s:?}") })
        };
        let init = field("init_node", 0)?.to_string();
        let term = field("term_node", 1)?.to_string();
        let capacity = number("capacity", 2)? * capacity_scale;
        let fft = number("free_flow_time", 4)?;
        for n in [&init, &term] {
            let k: usize = n
                .parse()
                .map_err(|_| InstanceError::Tntp { line: ln + 1, reason: format!("bad node id {n:?}") })?;
            max_node = max_node.max(k);
        }
        let mut id = format!("{init}-{term}");
        let mut dup = 1;
        while !names.insert(id.clone()) {
            dup += 1;
            id = format!("{init}-{term}#{dup}");
        }
        edges.push(EdgeSpec { id, tail: init, head: term, tau: fft, nu: Some(capacity) });
    }
    let n = num_nodes.unwrap_or(max_node).max(max_node);
    Ok(((1..=n).map(|k| k.to_string()).collect(), edges))
}

/// Combines a TNTP network with an attrs document into an instance.
pub fn import_tntp(net_text: &str, attrs: TntpAttrs, capacity_scale: f64) -> Result<InstanceFile, InstanceError> {
    let (nodes, edges) = parse_tntp_net(net_text, capacity_scale)?;
    let instance = InstanceFile {
        nodes,
        edges,
        commodities: attrs.commodities,
        edge_attrs: attrs.edge_attrs,
        stations: attrs.stations,
        horizon: attrs.horizon,
        return_epsilon: attrs.return_epsilon,
    };
    // Validate references.
    let edge_ids: HashSet<&str> = instance.edges.iter().map(|e| e.id.as_str()).collect();
    if let Some(a) = instance.edge_attrs.iter().find(|a| !edge_ids.contains(a.edge.as_str())) {
        return Err(NetworkError::UnknownEdge(a.edge.clone()).into());
    }
    Ok(instance)
}
