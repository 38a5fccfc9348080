mod common;

use evq_core::{network_loading, LoadingOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn invariants_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 0..200 {
        let inst = common::random_instance(&mut rng, n % 4 == 0);
        let loading = network_loading(&inst.net, &inst.catalog, &inst.flow, &LoadingOptions::default()).unwrap();
        let r = loading.check_invariants();
        assert!(r.conservation <= 1e-9, "instance {n}: {r:?}");
        assert!(r.negative_queue <= 1e-9, "instance {n}: {r:?}");
        assert!(r.capacity_excess <= 1e-12 * inst.net.never_binding_capacity(), "instance {n}: {r:?}");
        assert!(r.fifo_violation <= 1e-9, "instance {n}: {r:?}");
        assert!(r.aggregation <= 1e-9, "instance {n}: {r:?}");
        assert!(r.queue_consistency <= 1e-9, "instance {n}: {r:?}");
        // Walk arrivals are non-decreasing in the entry time.
        for w in 0..inst.catalog.walks(0).len() {
            let mut last = f64::NEG_INFINITY;
            for k in 0..=200 {
                let theta = k as f64 * inst.net.horizon / 200.0;
                let t = loading.walk_arrival(0, w, theta);
                assert!(t >= last - 1e-9, "instance {n}: arrival decreases at {theta}");
                assert!(t - theta >= inst.catalog.walks(0)[w].free_flow_time - 1e-9);
                last = t;
            }
        }
    }
}

#[test]
fn time_stepped_simulation_converges_at_first_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let steps = [1e-2, 1e-3, 1e-4];
    for n in 0..10 {
        let inst = common::random_instance(&mut rng, false);
        let loading = network_loading(&inst.net, &inst.catalog, &inst.flow, &LoadingOptions::default()).unwrap();
        let end = loading.horizon + 1.0;
        let gaps: Vec<f64> = steps
            .iter()
            .map(|&dt| common::sup_gap(&common::simulate(&inst.net, &inst.catalog, &inst.flow, dt, end), &loading))
            .collect();
        let c = gaps[0] / steps[0];
        for (gap, dt) in gaps.iter().zip(steps) {
            assert!(*gap <= 1.5 * c * dt + 1e-9, "instance {n}: gaps {gaps:?}");
        }
    }
}
