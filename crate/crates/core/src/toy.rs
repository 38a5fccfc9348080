//! The four-node toy network `s -> u -> v -> t` in its three variants.
//!
//! * `A`: no energy consumption.
//! * `B`: energy consumption, battery capacity 6.
//! * `C`: as `B` plus a station at `v` with two full-recharge modes
//!   (`m1`: duration 3/2, free; `m2`: duration 1, price 7) and a price
//!   budget of 6.

use crate::equilibrium::AggregationSpec;
use crate::functions::StepFunction;
use crate::netmodel::{
    build_battery_extended_network, ChargingStationSpec, Commodity, CommodityEdgeAttrs, Edge, EdgeKind, Network,
    Recharge, RechargeOption, DEFAULT_RETURN_EPSILON,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example1Variant {
    A,
    B,
    C,
}

/// Edge data `(name, tail, head, τ, ν, battery cost)`.
const EDGES: [(&str, usize, usize, f64, f64, f64); 5] = [
    ("e1", 0, 1, 1.0, 2.0, 4.0),
    ("e2", 0, 1, 2.0, 1.0, 2.0),
    ("e3", 1, 2, 1.0, 1.0, 0.0),
    ("e4", 2, 3, 1.0, f64::INFINITY, 4.0),
    ("e5", 2, 3, 2.0, 0.5, 2.0),
];

pub fn example1(variant: Example1Variant) -> Network {
    let energy = variant != Example1Variant::A;
    let mut base = Network {
        node_names: ["s", "u", "v", "t"].map(String::from).to_vec(),
        edges: EDGES
            .iter()
            .map(|&(name, tail, head, tau, nu, _)| Edge {
                name: name.into(),
                tail,
                head,
                transit_time: tau,
                capacity: nu,
                kind: EdgeKind::Physical,
            })
            .collect(),
        attrs: vec![EDGES
            .iter()
            .map(|&(.., b)| CommodityEdgeAttrs { battery_cost: if energy { b } else { 0.0 }, price: 0.0 })
            .collect()],
        commodities: vec![Commodity {
            name: "c0".into(),
            source: 0,
            sink: 3,
            inflow: StepFunction::constant(0.0, 10.0, 3.0),
            initial_battery: 6.0,
            battery_capacity: 6.0,
            price_budget: (variant == Example1Variant::C).then_some(6.0),
            aggregation: AggregationSpec::LambdaTilde(1.0),
        }],
        gadgets: Vec::new(),
        horizon: 10.0,
    };
    base.resolve_uncapacitated();
    if variant != Example1Variant::C {
        return base;
    }
    let option = |mode: &str, duration: f64, price: f64| RechargeOption {
        mode: mode.into(),
        duration,
        price,
        recharge: Recharge::Full,
        capacity: None,
        compatible: None,
    };
    let station = ChargingStationSpec { node: 2, options: vec![option("m1", 1.5, 0.0), option("m2", 1.0, 7.0)] };
    build_battery_extended_network(&base, &[station], DEFAULT_RETURN_EPSILON)
        .expect("toy station is well-formed")
}
