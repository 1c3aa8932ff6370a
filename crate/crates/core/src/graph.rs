//! Factor hypergraphs and the combinatorics of their directed edges.
//!
//! A directed edge `e = (α → i)` exists for every vertex `i` of every factor `α`;
//! `s(e) = α`, `t(e) = i`. Edge `e` feeds `e'` (written `e ⇀ e'`) when
//! `t(e) ∈ s(e')`, `t(e) ≠ t(e')` and `s(e) ≠ s(e')`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::bareiss_det;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedEdge {
    pub factor: usize,
    pub vertex: usize,
    /// position of `vertex` inside the member list of `factor`
    pub slot: usize,
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    labels: Vec<String>,
    factors: Vec<Vec<usize>>,
    edges: Vec<DirectedEdge>,
    factor_edges: Vec<Vec<usize>>,
    vertex_edges: Vec<Vec<usize>>,
    feeders: Vec<Vec<usize>>,
    successors: Vec<Vec<usize>>,
}

/// Prime cycle in canonical form (lexicographically smallest rotation).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeCycle {
    pub edges: Vec<usize>,
}

impl PrimeCycle {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

impl FactorGraph {
    /// Builds a graph from vertex labels and factor member lists given by label.
    pub fn build<T: AsRef<str>>(vertex_ids: &[T], factors: &[Vec<T>]) -> Result<Self> {
        let mut index = HashMap::new();
        for (k, id) in vertex_ids.iter().enumerate() {
            if index.insert(id.as_ref().to_string(), k).is_some() {
                return Err(Error::DuplicateVertex(id.as_ref().to_string()));
            }
        }
        let mut members = Vec::with_capacity(factors.len());
        for (a, f) in factors.iter().enumerate() {
            let mut list = Vec::with_capacity(f.len());
            for v in f {
                let k = *index.get(v.as_ref()).ok_or_else(|| Error::UnknownVertex {
                    factor: a,
                    vertex: v.as_ref().to_string(),
                })?;
                list.push(k);
            }
            members.push(list);
        }
        let labels = vertex_ids.iter().map(|s| s.as_ref().to_string()).collect();
        Self::assemble(labels, members)
    }

    /// Builds a graph on vertices `0..n` labelled by their index.
    pub fn from_members(n: usize, factors: Vec<Vec<usize>>) -> Result<Self> {
        let labels = (0..n).map(|k| k.to_string()).collect();
        for (a, f) in factors.iter().enumerate() {
            if let Some(&v) = f.iter().find(|&&v| v >= n) {
                return Err(Error::UnknownVertex {
                    factor: a,
                    vertex: v.to_string(),
                });
            }
        }
        Self::assemble(labels, factors)
    }

    fn assemble(labels: Vec<String>, factors: Vec<Vec<usize>>) -> Result<Self> {
        let n = labels.len();
        let mut edges = Vec::new();
        let mut factor_edges = Vec::with_capacity(factors.len());
        let mut vertex_edges = vec![Vec::new(); n];
        for (a, f) in factors.iter().enumerate() {
            if f.is_empty() {
                return Err(Error::EmptyFactor { factor: a });
            }
            let mut seen = vec![false; n];
            let mut ids = Vec::with_capacity(f.len());
            for (slot, &v) in f.iter().enumerate() {
                if seen[v] {
                    return Err(Error::DuplicateMember {
                        factor: a,
                        vertex: labels[v].clone(),
                    });
                }
                seen[v] = true;
                ids.push(edges.len());
                vertex_edges[v].push(edges.len());
                edges.push(DirectedEdge {
                    factor: a,
                    vertex: v,
                    slot,
                });
            }
            factor_edges.push(ids);
        }
        let mut feeders = vec![Vec::new(); edges.len()];
        let mut successors = vec![Vec::new(); edges.len()];
        for (e, ed) in edges.iter().enumerate() {
            let mut list = Vec::new();
            for &j in &factors[ed.factor] {
                if j == ed.vertex {
                    continue;
                }
                for &f in &vertex_edges[j] {
                    if edges[f].factor != ed.factor {
                        list.push(f);
                    }
                }
            }
            list.sort_unstable();
            for &f in &list {
                successors[f].push(e);
            }
            feeders[e] = list;
        }
        for s in &mut successors {
            s.sort_unstable();
        }
        Ok(FactorGraph {
            labels,
            factors,
            edges,
            factor_edges,
            vertex_edges,
            feeders,
            successors,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vertex_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn factor(&self, a: usize) -> &[usize] {
        &self.factors[a]
    }

    pub fn factors(&self) -> &[Vec<usize>] {
        &self.factors
    }

    pub fn edge(&self, e: usize) -> DirectedEdge {
        self.edges[e]
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    /// Edge ids `(α → i)` for the members of `α`, in member order.
    pub fn factor_edges(&self, a: usize) -> &[usize] {
        &self.factor_edges[a]
    }

    /// Edge ids `(α → i)` over the factors containing `i`, in factor order.
    pub fn vertex_edges(&self, i: usize) -> &[usize] {
        &self.vertex_edges[i]
    }

    /// Edge id of `(α → i)` where `i` is the `slot`-th member of `α`.
    pub fn edge_id(&self, a: usize, slot: usize) -> usize {
        self.factor_edges[a][slot]
    }

    pub fn vertex_degree(&self, i: usize) -> usize {
        self.vertex_edges[i].len()
    }

    pub fn factor_degree(&self, a: usize) -> usize {
        self.factors[a].len()
    }

    /// Edges `e'` with `e' ⇀ e`.
    pub fn feeders(&self, e: usize) -> &[usize] {
        &self.feeders[e]
    }

    /// Edges `e'` with `e ⇀ e'`.
    pub fn successors(&self, e: usize) -> &[usize] {
        &self.successors[e]
    }

    pub fn feeds(&self, e: usize, f: usize) -> bool {
        self.successors[e].binary_search(&f).is_ok()
    }

    /// All ordered pairs `(e, e')` with `e ⇀ e'`, sorted.
    pub fn feed_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for e in 0..self.edges.len() {
            for &f in &self.successors[e] {
                out.push((e, f));
            }
        }
        out
    }

    /// True if every factor has exactly two members.
    pub fn is_pairwise(&self) -> bool {
        self.factors.iter().all(|f| f.len() == 2)
    }

    /// Connected components of the bipartite (vertex + factor) representation.
    pub fn connected_components(&self) -> usize {
        let n = self.num_vertices();
        let mut parent: Vec<usize> = (0..n + self.num_factors()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for ed in &self.edges {
            let a = find(&mut parent, ed.vertex);
            let b = find(&mut parent, n + ed.factor);
            if a != b {
                parent[a] = b;
            }
        }
        (0..parent.len()).filter(|&x| find(&mut parent, x) == x).count()
    }

    /// Cycle rank of the bipartite representation, `|Ê| − |V| − |F| + k`.
    pub fn nullity(&self) -> usize {
        self.num_edges() + self.connected_components() - self.num_vertices() - self.num_factors()
    }

    /// `χ = |V| + |F| − |Ê|`.
    pub fn euler_number(&self) -> i64 {
        self.num_vertices() as i64 + self.num_factors() as i64 - self.num_edges() as i64
    }

    pub fn is_tree(&self) -> bool {
        self.connected_components() == 1 && self.nullity() == 0
    }

    /// `(min, max)` over edges of the number of feeding edges.
    pub fn pf_bounds(&self) -> (usize, usize) {
        let counts = self.feeders.iter().map(Vec::len);
        let lo = counts.clone().min().unwrap_or(0);
        let hi = counts.max().unwrap_or(0);
        (lo, hi)
    }

    /// All prime cycles of length at most `max_len`, canonical and sorted by (length, edges).
    pub fn prime_cycles(&self, max_len: usize) -> Vec<PrimeCycle> {
        let mut out = Vec::new();
        let mut path = Vec::with_capacity(max_len);
        for s in 0..self.edges.len() {
            path.clear();
            path.push(s);
            self.extend_cycles(s, max_len, &mut path, &mut out);
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.edges.cmp(&b.edges)));
        out
    }

    fn extend_cycles(&self, s: usize, max_len: usize, path: &mut Vec<usize>, out: &mut Vec<PrimeCycle>) {
        let last = *path.last().unwrap();
        if self.feeds(last, s) && is_canonical(path) && is_primitive(path) {
            out.push(PrimeCycle { edges: path.clone() });
        }
        if path.len() == max_len {
            return;
        }
        for &f in &self.successors[last] {
            if f < s {
                continue;
            }
            path.push(f);
            self.extend_cycles(s, max_len, path, out);
            path.pop();
        }
    }

    /// Number of spanning trees of the bipartite representation `B_H`.
    pub fn spanning_tree_count_bipartite(&self) -> Result<u128> {
        let k = self.connected_components();
        if k != 1 {
            return Err(Error::Disconnected { components: k });
        }
        let n = self.num_vertices();
        let links: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.vertex, n + e.factor)).collect();
        Ok(matrix_tree(n + self.num_factors(), &links))
    }

    /// Number of spanning trees of the ordinary (multi)graph formed by pairwise factors.
    pub fn spanning_tree_count_graph(&self) -> Result<u128> {
        if !self.is_pairwise() {
            return Err(Error::Unsupported("spanning trees of G need a pairwise graph".into()));
        }
        let k = self.connected_components();
        if k != 1 {
            return Err(Error::Disconnected { components: k });
        }
        let links: Vec<(usize, usize)> = self.factors.iter().map(|f| (f[0], f[1])).collect();
        Ok(matrix_tree(self.num_vertices(), &links))
    }
}

fn matrix_tree(nodes: usize, links: &[(usize, usize)]) -> u128 {
    if nodes <= 1 {
        return 1;
    }
    let mut lap = vec![vec![0i128; nodes]; nodes];
    for &(a, b) in links {
        if a == b {
            continue;
        }
        lap[a][a] += 1;
        lap[b][b] += 1;
        lap[a][b] -= 1;
        lap[b][a] -= 1;
    }
    let reduced: Vec<Vec<i128>> = lap[1..].iter().map(|row| row[1..].to_vec()).collect();
    bareiss_det(reduced).unsigned_abs()
}

fn is_canonical(seq: &[usize]) -> bool {
    let n = seq.len();
    (1..n).all(|r| {
        for k in 0..n {
            let a = seq[k];
            let b = seq[(k + r) % n];
            if a != b {
                return a < b;
            }
        }
        true
    })
}

fn is_primitive(seq: &[usize]) -> bool {
    let n = seq.len();
    (1..n).filter(|p| n % p == 0).all(|p| (0..n).any(|k| seq[k] != seq[(k + p) % n]))
}
