mod common;

use bethe_zeta::{generators, Error, FactorGraph};
use common::{feed_matrix, spanning_trees_bruteforce};
use bethe_zeta::zeta::EdgeWeights;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn hypergraph() -> impl Strategy<Value = FactorGraph> {
    (2usize..6)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::btree_set(0..n, 1..4), 1..6)))
        .prop_filter_map("every vertex covered", |(n, fs)| {
            let factors: Vec<Vec<usize>> = fs.into_iter().map(|s| s.into_iter().collect()).collect();
            if (0..n).any(|i| !factors.iter().any(|f| f.contains(&i))) {
                return None;
            }
            FactorGraph::from_members(n, factors).ok()
        })
}

fn mobius(n: usize) -> i64 {
    let mut n = n;
    let mut sign = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

/// Prime cycle classes of length `k` from `tr 𝓜^d` by Möbius inversion.
fn prime_counts_from_traces(m: &DMatrix<f64>, max_len: usize) -> Vec<i64> {
    let mut traces = vec![0i64];
    let mut p = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 1..=max_len {
        p = &p * m;
        traces.push(p.trace().round() as i64);
    }
    (0..=max_len)
        .map(|k| {
            if k == 0 {
                return 0;
            }
            let s: i64 = (1..=k).filter(|d| k % d == 0).map(|d| mobius(k / d) * traces[d]).sum();
            s / k as i64
        })
        .collect()
}

fn bipartite_edges(g: &FactorGraph) -> Vec<(usize, usize)> {
    let n = g.num_vertices();
    g.factors()
        .iter()
        .enumerate()
        .flat_map(|(a, f)| f.iter().map(move |&i| (i, n + a)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prime_cycle_counts_match_trace_inversion(g in hypergraph()) {
        let m = feed_matrix(&g, &EdgeWeights::uniform(&g, 1.0));
        let want = prime_counts_from_traces(&m, 6);
        let mut got = vec![0i64; 7];
        for c in g.prime_cycles(6) {
            got[c.len()] += 1;
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn feed_relation_follows_the_definition(g in hypergraph()) {
        for (x, e) in g.edges().iter().enumerate() {
            for (y, f) in g.edges().iter().enumerate() {
                let rule = g.factor(f.factor).contains(&e.vertex) && e.vertex != f.vertex && e.factor != f.factor;
                prop_assert_eq!(g.feeds(x, y), rule);
            }
        }
    }

    #[test]
    fn nullity_is_the_cycle_rank(g in hypergraph()) {
        let e = g.num_edges() as i64;
        let v = (g.num_vertices() + g.num_factors()) as i64;
        prop_assert_eq!(g.nullity() as i64, e - v + g.connected_components() as i64);
        prop_assert_eq!(g.is_tree(), g.nullity() == 0 && g.connected_components() == 1);
    }

    #[test]
    fn bipartite_spanning_trees_by_enumeration(g in hypergraph()) {
        prop_assume!(g.connected_components() == 1 && g.num_edges() <= 16);
        let n = g.num_vertices() + g.num_factors();
        let want = spanning_trees_bruteforce(n, &bipartite_edges(&g));
        prop_assert_eq!(g.spanning_tree_count_bipartite().unwrap(), want as u128);
    }

    #[test]
    fn perron_frobenius_bounds_bracket_kappa(g in hypergraph()) {
        let (lo, hi) = g.pf_bounds();
        let kappa = bethe_zeta::linalg::spectral_radius(&feed_matrix(&g, &EdgeWeights::uniform(&g, 1.0))).unwrap();
        prop_assert!(lo as f64 <= kappa + 1e-9 && kappa <= hi as f64 + 1e-9);
    }
}

#[test]
fn graph_spanning_trees_by_enumeration() {
    for g in [
        generators::complete(4),
        generators::complete(5),
        generators::complete_bipartite(2, 3),
        generators::torus(2, 3),
        generators::cycle(7),
    ] {
        let edges: Vec<(usize, usize)> = g.factors().iter().map(|f| (f[0], f[1])).collect();
        let want = spanning_trees_bruteforce(g.num_vertices(), &edges);
        assert_eq!(g.spanning_tree_count_graph().unwrap(), want as u128);
    }
}

#[test]
fn k4_prime_cycles() {
    let g = generators::complete(4);
    let mut by_len = [0; 5];
    for c in g.prime_cycles(4) {
        by_len[c.len()] += 1;
    }
    // 4 triangles and 3 squares, both orientations
    assert_eq!(by_len, [0, 0, 0, 8, 6]);
}

#[test]
fn hypergraph_example_shape() {
    let g = generators::hyper_example();
    assert_eq!((g.num_vertices(), g.num_factors(), g.num_edges()), (4, 3, 7));
    assert_eq!(g.nullity(), 1);
    assert_eq!(g.label(0), "1");
    assert_eq!(g.vertex_index("4"), Some(3));
}

#[test]
fn malformed_graphs_are_rejected() {
    assert!(matches!(FactorGraph::from_members(2, vec![vec![]]), Err(Error::EmptyFactor { .. })));
    assert!(matches!(FactorGraph::from_members(2, vec![vec![0, 0]]), Err(Error::DuplicateMember { .. })));
    assert!(matches!(FactorGraph::build(&["a", "b"], &[vec!["a", "c"]]), Err(Error::UnknownVertex { .. })));
    assert!(matches!(FactorGraph::build(&["a", "a"], &[vec!["a"]]), Err(Error::DuplicateVertex(_))));
}

#[test]
fn trees_have_no_prime_cycles() {
    let g = generators::star(4);
    assert!(g.prime_cycles(10).is_empty());
    assert!(g.is_tree());
}
