//! Property tests over random small instances.

use maglap::ConnectionGraph;
use maglap::graph::holonomy;
use maglap::laplacian::{assemble_combinatorial_laplacian, assemble_magnetic_laplacian};
use maglap::oracle::{enumerate_mtsfs, regularized_determinant};
use maglap::rng::replicate_rng;
use maglap::sampler::{WeightMode, cycle_popping};
use maglap::syncrank::kendall_tau;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::TAU;

/// Connected random connection graph: a spanning path plus extra edges, all
/// unit weights, arbitrary angles.
fn graph_strategy(max_n: usize, max_extra: usize) -> impl Strategy<Value = ConnectionGraph> {
    (3..=max_n, 0..=max_extra, any::<u64>()).prop_map(move |(n, extra, seed)| {
        let mut s = maglap::rng::SplitMix64::from_key(&[seed]);
        let mut edges: Vec<(usize, usize, f64, f64)> = (0..n - 1)
            .map(|i| (i, i + 1, 1.0, s.next_f64() * TAU))
            .collect();
        let mut tries = 0;
        while edges.len() < n - 1 + extra && tries < 100 {
            tries += 1;
            let u = s.next_below(n as u64) as usize;
            let v = s.next_below(n as u64) as usize;
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if edges.iter().any(|&(a, b, _, _)| (a.min(b), a.max(b)) == key) {
                continue;
            }
            edges.push((key.0, key.1, 1.0, s.next_f64() * TAU));
        }
        ConnectionGraph::new(n, edges).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinant_identity(g in graph_strategy(6, 3), q in prop_oneof![Just(0.0), 0.05f64..2.5]) {
        let det = regularized_determinant(&g, q);
        let sum: f64 = enumerate_mtsfs(&g, q).unwrap().iter().map(|f| f.weight).sum();
        prop_assert!((sum - det).abs() <= 1e-8 * det.abs().max(1e-6), "sum {sum} vs det {det}");
    }

    #[test]
    fn magnetic_equals_combinatorial_on_zero_angles(g in graph_strategy(7, 4)) {
        let zeroed = ConnectionGraph::new(
            g.node_count(),
            g.edges().iter().map(|e| (e.u, e.v, e.weight, 0.0)).collect(),
        ).unwrap();
        let mag = assemble_magnetic_laplacian(&zeroed, 0.0);
        let comb = assemble_combinatorial_laplacian(&zeroed, 0.0);
        for u in 0..g.node_count() {
            for v in 0..g.node_count() {
                prop_assert!((mag.entry(u, v) - comb.entry(u, v)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn quadratic_form_matches_sine_identity(g in graph_strategy(7, 4), seed in any::<u64>()) {
        let lap = assemble_magnetic_laplacian(&g, 0.0);
        let mut s = maglap::rng::SplitMix64::from_key(&[seed, 1]);
        let h: Vec<f64> = (0..g.node_count()).map(|_| s.next_f64() * TAU).collect();
        let f: Vec<Complex64> = h.iter().map(|&x| Complex64::new(0.0, x).exp()).collect();
        let form = lap.quadratic_form(&f);
        let sines: f64 = g.edges().iter().map(|e| {
            let half = 0.5 * (e.angle + h[e.u] - h[e.v]);
            4.0 * e.weight * half.sin().powi(2)
        }).sum();
        prop_assert!((form - sines).abs() <= 1e-8 * form.abs().max(1.0));
    }

    #[test]
    fn sampled_mtsfs_satisfy_structure(
        g in graph_strategy(8, 4),
        q in 0.05f64..2.0,
        seed in any::<u64>(),
    ) {
        let mut rng = replicate_rng(seed, 0);
        let (f, stats) = cycle_popping(&g, q, WeightMode::Capped, &mut rng).unwrap();
        prop_assert!(f.validate(&g).is_ok());
        prop_assert_eq!(f.edge_count(), g.node_count() - f.tree_count());
        prop_assert!(f.importance_weight() >= 1.0 - 1e-12);
        prop_assert!(stats.steps >= (g.node_count() - f.tree_count()) as u64);
        // Every cycle of the sample is a closed walk whose independently
        // recomputed holonomy matches the recorded angle.
        for c in f.cycles() {
            let (theta, _) = holonomy(&g, &c.cycle).unwrap();
            prop_assert!((theta - c.cycle_angle).abs() < 1e-9);
        }
    }

    #[test]
    fn edge_list_round_trips(g in graph_strategy(7, 4)) {
        let text = g.to_edge_list();
        let parsed = ConnectionGraph::parse_edge_list(&text).unwrap();
        prop_assert_eq!(g.node_count(), parsed.node_count());
        prop_assert_eq!(g.edges(), parsed.edges());
    }

    #[test]
    fn kendall_tau_properties(seed in any::<u64>()) {
        let n = 9;
        let mut s = maglap::rng::SplitMix64::from_key(&[seed, 2]);
        let mut r: Vec<usize> = (1..=n).collect();
        for i in (1..n).rev() {
            let j = s.next_below(i as u64 + 1) as usize;
            r.swap(i, j);
        }
        let id: Vec<usize> = (1..=n).collect();
        let rev: Vec<usize> = r.iter().map(|&x| n + 1 - x).collect();
        let tau_self = kendall_tau(&r, &r).unwrap();
        prop_assert_eq!(tau_self, 1.0);
        let tau_rev = kendall_tau(&r, &rev).unwrap();
        prop_assert_eq!(tau_rev, -1.0);
        let tau_id = kendall_tau(&r, &id).unwrap();
        prop_assert!((-1.0..=1.0).contains(&tau_id));
        prop_assert!((kendall_tau(&id, &r).unwrap() - tau_id).abs() < 1e-15);
    }
}
