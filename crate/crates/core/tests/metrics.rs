use evq_core::flow::Demand;
use evq_core::metrics::{energy_profile, energy_stats, qopi, QopiMode};
use evq_core::walks::{CatalogEntry, EnumerationStats};
use evq_core::{Discretization, Walk, WalkCatalog, WalkFlow};
use proptest::prelude::*;

/// Random commodities: per commodity, walk energies and per-interval
/// (flow row, cost row).
type Sample = Vec<(Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>)>;

const INTERVALS: usize = 4;

fn sample() -> impl Strategy<Value = Sample> {
    prop::collection::vec(
        (1usize..4).prop_flat_map(|walks| {
            (
                prop::collection::vec(-6.0f64..10.0, walks),
                prop::collection::vec(
                    (
                        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], walks),
                        prop::collection::vec(prop_oneof![Just(1.0), 1.0f64..5.0], walks),
                    ),
                    INTERVALS,
                ),
            )
        }),
        1..4,
    )
}

fn build(s: &Sample) -> (WalkFlow, Vec<Vec<Vec<f64>>>, Demand, WalkCatalog) {
    let grid = Discretization::new(4.0, INTERVALS);
    let rates: Vec<Vec<Vec<f64>>> = s.iter().map(|(_, rows)| rows.iter().map(|r| r.0.clone()).collect()).collect();
    let costs = s.iter().map(|(_, rows)| rows.iter().map(|r| r.1.clone()).collect()).collect();
    let demand_rows: Vec<Vec<f64>> = rates.iter().map(|rows| rows.iter().map(|r| r.iter().sum()).collect()).collect();
    let volumes = demand_rows.iter().map(|r| r.iter().sum::<f64>() * grid.width()).collect();
    let catalog = WalkCatalog {
        entries: s
            .iter()
            .enumerate()
            .map(|(i, (energies, _))| CatalogEntry {
                commodity: i,
                walks: energies
                    .iter()
                    .map(|&energy| Walk {
                        commodity: i,
                        edges: vec![0],
                        battery_profile: vec![],
                        total_price: 0.0,
                        free_flow_time: 1.0,
                        energy,
                    })
                    .collect(),
                kappa: 1,
                stats: EnumerationStats::default(),
            })
            .collect(),
    };
    (WalkFlow { grid, rates }, costs, Demand { rows: demand_rows, volumes }, catalog)
}

proptest! {
    #[test]
    fn qopi_vanishes_exactly_at_equilibrium(s in sample()) {
        let (flow, costs, demand, _) = build(&s);
        let value = qopi(&flow, &costs, &demand, QopiMode::Absolute).unwrap();
        let equilibrium = flow.rates.iter().zip(&costs).all(|(rows, crow)| {
            rows.iter().zip(crow).all(|(h, c)| {
                let min = c.iter().copied().fold(f64::INFINITY, f64::min);
                h.iter().zip(c).all(|(h, c)| *h == 0.0 || *c == min)
            })
        });
        prop_assert_eq!(value == 0.0, equilibrium);
        prop_assert!(value >= 0.0);
    }

    #[test]
    fn relative_qopi_scales_by_volume(s in sample()) {
        let (flow, costs, demand, _) = build(&s[..1].to_vec());
        let abs = qopi(&flow, &costs, &demand, QopiMode::Absolute).unwrap();
        let rel = qopi(&flow, &costs, &demand, QopiMode::Relative).unwrap();
        if demand.volumes[0] > 0.0 {
            prop_assert!((abs - rel * demand.volumes[0]).abs() <= 1e-12 * abs.max(1.0));
        }
    }

    #[test]
    fn energy_stats_are_ordered_and_sum_to_profile(s in sample()) {
        let (flow, _, demand, catalog) = build(&s);
        let stats = energy_stats(&flow, &catalog, &demand);
        let eta = energy_profile(&flow, &catalog, &demand);
        for j in 0..INTERVALS {
            let mut total = 0.0;
            let mut any = false;
            for st in &stats {
                if let (Some(lo), Some(mean), Some(hi)) = (st.min.values[j], st.mean.values[j], st.max.values[j]) {
                    prop_assert!(lo <= mean + 1e-12 && mean <= hi + 1e-12);
                    total += mean;
                    any = true;
                }
            }
            match eta.values[j] {
                Some(e) if any => prop_assert!((e - total).abs() <= 1e-12 * total.abs().max(1.0)),
                Some(e) => prop_assert_eq!(e, 0.0),
                None => prop_assert!(!any),
            }
        }
    }
}
