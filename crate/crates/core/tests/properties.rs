use std::collections::HashMap;

use meshmsf::experiment::{run_with_result, ExperimentConfig, Verdict};
use meshmsf::graph::Graph;
use meshmsf::mesh::{ExecMode, MeshConfig, MeshMachine};
use meshmsf::msf::{minimum_spanning_forest, MsfConfig};
use meshmsf::oracle::{cc_labels, kruskal_msf};
use meshmsf::primitives::{batched_lookup, mesh_sort};
use meshmsf::record::{Kind, Lanes, Record};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = Graph> {
    (1usize..40).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0u64..6), 0..80).prop_map(move |es| Graph::from_edges(n, es))
    })
}

fn machine(side: usize, exec: ExecMode) -> MeshMachine {
    MeshMachine::new(MeshConfig::new(side).with_exec(exec)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forest_matches_kruskal(g in graph()) {
        let (report, res) = run_with_result(&g, &ExperimentConfig::default()).unwrap();
        prop_assert_eq!(report.verdict, Verdict::Pass);
        prop_assert_eq!(&res.msf_origins, &kruskal_msf(&g));
        prop_assert_eq!(&res.component_of, &cc_labels(&g));
        prop_assert_eq!(res.msf_origins.len() + res.components(), g.n_vertices);
    }

    #[test]
    fn forest_is_invariant_under_edge_order(g in graph(), seed in any::<u64>()) {
        let mut h = g.clone();
        meshmsf::graph::gen::shuffle_edges(&mut h, &mut meshmsf::graph::gen::rng(seed));
        let a = minimum_spanning_forest(&g, &MsfConfig::default()).unwrap();
        let b = minimum_spanning_forest(&h, &MsfConfig::default()).unwrap();
        let wa: u64 = a.msf_origins.iter().map(|&i| g.edges[i].w).sum();
        let wb: u64 = b.msf_origins.iter().map(|&i| h.edges[i].w).sum();
        prop_assert_eq!(wa, wb);
        prop_assert_eq!(a.component_of, b.component_of);
        prop_assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn sort_orders_a_permutation(keys in prop::collection::vec(0u64..50, 0..=64), stepwise in any::<bool>()) {
        let exec = if stepwise { ExecMode::Stepwise } else { ExecMode::Fused };
        let mut m = machine(8, exec);
        for (rank, &k) in keys.iter().enumerate() {
            m.load(rank, 0, Record::vertex(k));
        }
        let t = m.root_tiling();
        mesh_sort(&mut m, &t, Lanes::of(&[0]), |r: &Record| (!r.is_null()).then_some(r.a)).unwrap();
        let got: Vec<u64> = m.cells().iter().map(|c| c.slots[0]).filter(|r| !r.is_null()).map(|r| r.a).collect();
        let mut want = keys.clone();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn lookup_agrees_with_a_map(
        dir in prop::collection::hash_map(0u64..100, 0u64..1000, 0..30),
        queries in prop::collection::vec(0u64..100, 0..30),
    ) {
        let mut m = machine(8, ExecMode::Fused);
        for (rank, (&k, &v)) in dir.iter().enumerate() {
            let mut r = Record::vertex(k);
            r.b = v;
            m.load(rank, 0, r);
        }
        for (rank, &q) in queries.iter().enumerate() {
            m.load(rank, 1, Record::edge(q, 0, 0, rank as u64));
        }
        let t = m.root_tiling();
        let mut answers = HashMap::new();
        batched_lookup(
            &mut m,
            &t,
            Lanes::of(&[0, 1]),
            |r| (r.kind == Kind::Vertex).then_some((r.a, r.b)),
            |r| (r.kind == Kind::Edge).then_some(r.a),
            |r, found| {
                answers.insert(r.idx, found);
            },
        )
        .unwrap();
        for (i, q) in queries.iter().enumerate() {
            prop_assert_eq!(answers[&(i as u64)], dir.get(q).copied());
        }
    }
}
