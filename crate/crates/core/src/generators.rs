//! Standard graph shapes used by the experiments and tests.

use rand::Rng;

use crate::graph::FactorGraph;

pub fn cycle(n: usize) -> FactorGraph {
    let factors = (0..n).map(|k| vec![k, (k + 1) % n]).collect();
    FactorGraph::from_members(n, factors).expect("cycle")
}

pub fn path(n: usize) -> FactorGraph {
    let factors = (0..n.saturating_sub(1)).map(|k| vec![k, k + 1]).collect();
    FactorGraph::from_members(n, factors).expect("path")
}

pub fn complete(n: usize) -> FactorGraph {
    let mut factors = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            factors.push(vec![i, j]);
        }
    }
    FactorGraph::from_members(n, factors).expect("complete graph")
}

/// `K_{a,b}`: vertices `0..a` on one side, `a..a+b` on the other.
pub fn complete_bipartite(a: usize, b: usize) -> FactorGraph {
    let mut factors = Vec::new();
    for i in 0..a {
        for j in 0..b {
            factors.push(vec![i, a + j]);
        }
    }
    FactorGraph::from_members(a + b, factors).expect("complete bipartite graph")
}

/// `K_{1,k}` with centre 0.
pub fn star(k: usize) -> FactorGraph {
    FactorGraph::from_members(k + 1, (1..=k).map(|j| vec![0, j]).collect()).expect("star")
}

/// Pairwise torus: vertex `(r, c)` is `r * cols + c`, linked right and down with wraparound.
/// With a side of length 2 the wraparound produces parallel edges.
pub fn torus(rows: usize, cols: usize) -> FactorGraph {
    let id = |r: usize, c: usize| (r % rows) * cols + (c % cols);
    let mut factors = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            factors.push(vec![id(r, c), id(r, c + 1)]);
            factors.push(vec![id(r, c), id(r + 1, c)]);
        }
    }
    FactorGraph::from_members(rows * cols, factors).expect("torus")
}

/// Torus with the roles swapped: every grid point is a factor over its four incident grid
/// edges, and every grid edge is a variable. Variable `2*(r*cols+c)` is the edge to the right
/// of `(r, c)`, variable `2*(r*cols+c)+1` the edge below.
pub fn factor_torus(rows: usize, cols: usize) -> FactorGraph {
    let node = |r: usize, c: usize| (r % rows) * cols + (c % cols);
    let mut factors = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let right = 2 * node(r, c);
            let down = 2 * node(r, c) + 1;
            let left = 2 * node(r, c + cols - 1);
            let up = 2 * node(r + rows - 1, c) + 1;
            factors.push(vec![right, down, left, up]);
        }
    }
    FactorGraph::from_members(2 * rows * cols, factors).expect("factor torus")
}

/// The four-vertex hypergraph with factors {1,2}, {1,2,3,4}, {4}.
pub fn hyper_example() -> FactorGraph {
    FactorGraph::build(
        &["1", "2", "3", "4"],
        &[vec!["1", "2"], vec!["1", "2", "3", "4"], vec!["4"]],
    )
    .expect("four-vertex hypergraph")
}

/// Random hypertree on `n` vertices: each new factor joins one existing vertex to
/// one or more fresh ones (up to `max_degree` members); optional unary factors are sprinkled in.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, max_degree: usize) -> FactorGraph {
    assert!(n >= 1 && max_degree >= 2);
    let mut factors: Vec<Vec<usize>> = Vec::new();
    let mut placed = 1;
    while placed < n {
        let anchor = rng.random_range(0..placed);
        let room = (n - placed).min(max_degree - 1);
        let fresh = rng.random_range(1..=room);
        let mut f = vec![anchor];
        f.extend(placed..placed + fresh);
        placed += fresh;
        factors.push(f);
    }
    if factors.is_empty() || rng.random_bool(0.3) {
        factors.push(vec![rng.random_range(0..n)]);
    }
    FactorGraph::from_members(n, factors).expect("random tree")
}

/// Random pairwise tree (ordinary graph) on `n >= 2` vertices.
pub fn random_pairwise_tree<R: Rng>(rng: &mut R, n: usize) -> FactorGraph {
    let factors = (1..n).map(|k| vec![rng.random_range(0..k), k]).collect();
    FactorGraph::from_members(n, factors).expect("random pairwise tree")
}
