mod common;

use evq_core::equilibrium::{fixed_point_residual, midpoint_costs, solve_fp_update};
use evq_core::{network_loading, LoadingOptions, NormKind, WalkFlow};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of `v ↦ Σ [h − α c + v]_+ − u` by bisection.
fn bisect(h: &[f64], c: &[f64], u: f64, alpha: f64) -> f64 {
    let f = |v: f64| h.iter().zip(c).map(|(h, c)| (h - alpha * c + v).max(0.0)).sum::<f64>() - u;
    let (mut lo, mut hi) = (-1e4, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn row_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..5.0, n),
            prop::collection::vec(0.1f64..20.0, n),
            0.01f64..2.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn update_stays_in_feasible_set((h, c, alpha) in row_strategy(), u in 0.0f64..10.0) {
        let (_, row) = solve_fp_update(&h, &c, u, alpha).unwrap();
        prop_assert!(row.iter().all(|&x| x >= 0.0));
        let sum: f64 = row.iter().sum();
        prop_assert!((sum - u).abs() <= 1e-12 * u.max(1.0), "sum {sum} demand {u}");
    }

    #[test]
    fn update_matches_bisection((h, c, alpha) in row_strategy(), u in 0.01f64..10.0) {
        let (v, row) = solve_fp_update(&h, &c, u, alpha).unwrap();
        let vb = bisect(&h, &c, u, alpha);
        prop_assert!((v - vb).abs() <= 1e-8 * vb.abs().max(1.0), "v {v} bisection {vb}");
        for ((x, h), c) in row.iter().zip(&h).zip(&c) {
            prop_assert!((x - (h - alpha * c + vb).max(0.0)).abs() <= 1e-7);
        }
    }

    #[test]
    fn raising_a_cost_never_raises_its_flow((h, c, alpha) in row_strategy(), u in 0.0f64..10.0, k in any::<prop::sample::Index>(), bump in 0.0f64..10.0) {
        let k = k.index(h.len());
        let (_, before) = solve_fp_update(&h, &c, u, alpha).unwrap();
        let mut c2 = c.clone();
        c2[k] += bump;
        let (_, after) = solve_fp_update(&h, &c2, u, alpha).unwrap();
        prop_assert!(after[k] <= before[k] + 1e-12);
    }
}

/// Largest cost excess over the row minimum among walks carrying flow.
fn equilibrium_gap(flow: &WalkFlow, costs: &[Vec<Vec<f64>>]) -> f64 {
    let mut gap: f64 = 0.0;
    for (i, rows) in flow.rates.iter().enumerate() {
        for (j, row) in rows.iter().enumerate() {
            let min = costs[i][j].iter().copied().fold(f64::INFINITY, f64::min);
            for (h, c) in row.iter().zip(&costs[i][j]) {
                if *h > 1e-9 {
                    gap = gap.max(c - min);
                }
            }
        }
    }
    gap
}

#[test]
fn fixed_points_are_equilibria_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let options = LoadingOptions::default();
    for n in 0..50 {
        // Uncapacitated: costs are free-flow times, so flow on the cheapest
        // walks is an equilibrium.
        let mut inst = common::random_instance(&mut rng, true);
        let ffc: Vec<f64> = inst.catalog.walks(0).iter().map(|w| w.free_flow_time).collect();
        let best = ffc.iter().copied().fold(f64::INFINITY, f64::min);
        let cheapest: Vec<usize> = (0..ffc.len()).filter(|&w| ffc[w] - best < 1e-12).collect();
        for row in inst.flow.rates[0].iter_mut() {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x = 0.0);
            for &w in &cheapest {
                row[w] = total / cheapest.len() as f64;
            }
        }
        for alpha in [0.5, 1.0] {
            let r = fixed_point_residual(&inst.net, &inst.catalog, &inst.flow, alpha, NormKind::L1, &options).unwrap();
            assert!(r <= 1e-12, "instance {n}: equilibrium has residual {r} at alpha {alpha}");
        }

        // Capacitated random flows: residual vanishes exactly for equilibria.
        let inst = common::random_instance(&mut rng, false);
        let loading = network_loading(&inst.net, &inst.catalog, &inst.flow, &options).unwrap();
        let costs = midpoint_costs(&inst.net, &loading, &inst.catalog, &inst.flow.grid);
        let gap = equilibrium_gap(&inst.flow, &costs);
        let r = fixed_point_residual(&inst.net, &inst.catalog, &inst.flow, 0.5, NormKind::L1, &options).unwrap();
        if gap > 1e-9 {
            assert!(r > 0.0, "instance {n}: gap {gap} but zero residual");
        } else {
            assert!(r <= 1e-12, "instance {n}: equilibrium with residual {r}");
        }
    }
}

#[test]
fn fixed_points_survive_doubling_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let options = LoadingOptions::default();
    let mut checked = 0;
    for _ in 0..100 {
        // Capacitated instances with all flow on one walk per interval: a
        // fixed point whenever that walk is the cheapest everywhere.
        let mut inst = common::random_instance(&mut rng, false);
        let loading = network_loading(&inst.net, &inst.catalog, &inst.flow, &options).unwrap();
        let first = midpoint_costs(&inst.net, &loading, &inst.catalog, &inst.flow.grid);
        let w = (0..inst.catalog.walks(0).len())
            .min_by(|&a, &b| first[0][0][a].total_cmp(&first[0][0][b]))
            .unwrap();
        for row in inst.flow.rates[0].iter_mut() {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x = 0.0);
            row[w] = total;
        }
        let r = fixed_point_residual(&inst.net, &inst.catalog, &inst.flow, 1.0, NormKind::L1, &options).unwrap();
        if r <= 1e-12 {
            checked += 1;
            let r2 = fixed_point_residual(&inst.net, &inst.catalog, &inst.flow, 2.0, NormKind::L1, &options).unwrap();
            assert!(r2 <= 1e-12, "residual {r2} at doubled alpha");
        }
    }
    assert!(checked >= 10, "only {checked} fixed points sampled");
}
