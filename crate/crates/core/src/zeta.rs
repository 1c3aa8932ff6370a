//! Matrix-weighted graph zeta functions.
//!
//! Orientation convention for `M(u)`: row block `e = (α → i)`, column block
//! `e' = (β → j)`, entry `u^α_{j→i}` when `e' ⇀ e` and zero otherwise. This is the
//! orientation in which the Jacobian of the LBP update equals `M(u)`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::graph::{FactorGraph, PrimeCycle};
use crate::linalg::{log_abs_det, operator_norm, spectral_radius, spectrum};

/// Matrix weights `u^α_{i→j}` (shape `r_j × r_i`) for every factor and ordered member pair.
#[derive(Debug, Clone)]
pub struct EdgeWeights {
    dims: Vec<usize>,
    blocks: Vec<Vec<DMatrix<f64>>>,
}

impl EdgeWeights {
    /// `f(α, a, b)` returns `u^α_{m_a → m_b}` where `m_a` is the `a`-th member of `α`.
    pub fn from_fn<F>(graph: &FactorGraph, dims: &[usize], mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> DMatrix<f64>,
    {
        if dims.len() != graph.num_vertices() {
            return Err(Error::Shape("one dimension per vertex required".into()));
        }
        let mut blocks = Vec::with_capacity(graph.num_factors());
        for a in 0..graph.num_factors() {
            let members = graph.factor(a);
            let d = members.len();
            let mut fb = Vec::with_capacity(d * d);
            for x in 0..d {
                for y in 0..d {
                    if x == y {
                        fb.push(DMatrix::zeros(0, 0));
                        continue;
                    }
                    let m = f(a, x, y);
                    let want = (dims[members[y]], dims[members[x]]);
                    if m.shape() != want {
                        return Err(Error::Shape(format!(
                            "weight of factor {a} ({x}->{y}) is {:?}, expected {want:?}",
                            m.shape()
                        )));
                    }
                    fb.push(m);
                }
            }
            blocks.push(fb);
        }
        Ok(EdgeWeights {
            dims: dims.to_vec(),
            blocks,
        })
    }

    /// Scalar weights, all equal to `u`.
    pub fn uniform(graph: &FactorGraph, u: f64) -> Self {
        Self::from_fn(graph, &vec![1; graph.num_vertices()], |_, _, _| DMatrix::from_element(1, 1, u))
            .expect("scalar shapes")
    }

    /// Scalar weights given per (factor, a, b).
    pub fn scalar<F: FnMut(usize, usize, usize) -> f64>(graph: &FactorGraph, mut f: F) -> Self {
        Self::from_fn(graph, &vec![1; graph.num_vertices()], |a, x, y| DMatrix::from_element(1, 1, f(a, x, y)))
            .expect("scalar shapes")
    }

    pub fn zeros(graph: &FactorGraph, dims: &[usize]) -> Result<Self> {
        let members: Vec<Vec<usize>> = graph.factors().to_vec();
        Self::from_fn(graph, dims, |a, x, y| DMatrix::zeros(dims[members[a][y]], dims[members[a][x]]))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `u^α_{m_a → m_b}`.
    pub fn get(&self, factor: usize, a: usize, b: usize) -> &DMatrix<f64> {
        let d = (self.blocks[factor].len() as f64).sqrt().round() as usize;
        &self.blocks[factor][a * d + b]
    }

    /// Scalar weights `‖u^α_{i→j}‖` (largest singular value).
    pub fn norms(&self, graph: &FactorGraph) -> EdgeWeights {
        EdgeWeights::scalar(graph, |a, x, y| operator_norm(self.get(a, x, y)))
    }

    pub fn max_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|fb| fb.iter())
            .map(operator_norm)
            .fold(0.0, f64::max)
    }

    /// `u^α_{i→j} = (u^α_{j→i})ᵀ` for all blocks, within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.blocks.iter().all(|fb| {
            let d = (fb.len() as f64).sqrt().round() as usize;
            (0..d).all(|x| {
                (0..d).filter(|&y| y != x).all(|y| {
                    (&fb[x * d + y] - fb[y * d + x].transpose()).abs().max() <= tol
                })
            })
        })
    }
}

/// Dense representation of `M(u)` with its block layout.
#[derive(Debug, Clone)]
pub struct BlockEdgeMatrix {
    offsets: Vec<usize>,
    matrix: DMatrix<f64>,
}

impl BlockEdgeMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Row/column offset of the block of edge `e`.
    pub fn offset(&self, e: usize) -> usize {
        self.offsets[e]
    }

    pub fn block_dim(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    /// Block `(e, f)`.
    pub fn block(&self, e: usize, f: usize) -> DMatrix<f64> {
        self.matrix
            .view((self.offsets[e], self.offsets[f]), (self.block_dim(e), self.block_dim(f)))
            .into_owned()
    }

    pub fn spectrum(&self) -> Result<Vec<Complex<f64>>> {
        spectrum(&self.matrix)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.matrix)
    }
}

fn edge_offsets(graph: &FactorGraph, dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(graph.num_edges() + 1);
    let mut acc = 0;
    offsets.push(0);
    for ed in graph.edges() {
        acc += dims[ed.vertex];
        offsets.push(acc);
    }
    offsets
}

/// `M(u)`.
pub fn directed_edge_matrix(graph: &FactorGraph, w: &EdgeWeights) -> Result<BlockEdgeMatrix> {
    if w.blocks.len() != graph.num_factors() {
        return Err(Error::Shape("weights belong to another graph".into()));
    }
    let offsets = edge_offsets(graph, &w.dims);
    let n = *offsets.last().unwrap();
    let mut matrix = DMatrix::zeros(n, n);
    for (e, ed) in graph.edges().iter().enumerate() {
        for &f in graph.feeders(e) {
            let j = graph.edge(f).vertex;
            let a = graph.factor(ed.factor).iter().position(|&v| v == j).expect("feeder vertex in factor");
            let blk = w.get(ed.factor, a, ed.slot);
            matrix.view_mut((offsets[e], offsets[f]), blk.shape()).copy_from(blk);
        }
    }
    Ok(BlockEdgeMatrix { offsets, matrix })
}

/// Unweighted directed edge matrix `𝓜`.
pub fn unweighted_matrix(graph: &FactorGraph) -> DMatrix<f64> {
    directed_edge_matrix(graph, &EdgeWeights::uniform(graph, 1.0))
        .expect("uniform weights")
        .into_matrix()
}

/// `ζ^{-1} = det(I − M(u))`.
pub fn zeta_inverse(graph: &FactorGraph, w: &EdgeWeights) -> Result<f64> {
    let m = directed_edge_matrix(graph, w)?;
    let n = m.matrix.nrows();
    Ok((DMatrix::identity(n, n) - m.matrix).determinant())
}

/// `ζ(u) = det(I − M(u))^{-1}`.
pub fn zeta_determinant(graph: &FactorGraph, w: &EdgeWeights) -> Result<f64> {
    let d = zeta_inverse(graph, w)?;
    if d.abs() < 1e-14 {
        return Err(Error::Pole(d));
    }
    Ok(1.0 / d)
}

/// Weight product `π(𝔭)` of a closed geodesic, composed in the order of `M(u)`.
pub fn cycle_weight(graph: &FactorGraph, w: &EdgeWeights, cycle: &PrimeCycle) -> Result<DMatrix<f64>> {
    let m = directed_edge_matrix(graph, w)?;
    Ok(cycle_weight_in(&m, &cycle.edges))
}

fn cycle_weight_in(m: &BlockEdgeMatrix, edges: &[usize]) -> DMatrix<f64> {
    let l = edges.len();
    let r0 = m.block_dim(edges[0]);
    let mut acc = DMatrix::identity(r0, r0);
    for k in 0..l {
        let from = edges[k];
        let to = edges[(k + 1) % l];
        acc = m.block(to, from) * acc;
    }
    acc
}

/// Euler product over the prime cycles of length at most `max_len`.
pub fn zeta_euler_truncated(graph: &FactorGraph, w: &EdgeWeights, max_len: usize) -> Result<f64> {
    let m = directed_edge_matrix(graph, w)?;
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for c in graph.prime_cycles(max_len) {
        let pi = cycle_weight_in(&m, &c.edges);
        let r = pi.nrows();
        let d = (DMatrix::identity(r, r) - pi).determinant();
        if d == 0.0 {
            return Err(Error::Pole(d));
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_abs -= d.abs().ln();
    }
    Ok(sign * log_abs.exp())
}

/// Bound on `|ζ_L / ζ − 1|` for the Euler product truncated at length `L`. Closed walks of
/// length `k` number at most `|Ê| k_M^k`, each contributes at most `r·w^k` to the trace, so the
/// omitted part of `log ζ` is below `B = Σ_{k>L} r |Ê| (k_M w)^k / k` and the relative error
/// below `e^B − 1`. Infinite when `k_M w ≥ 1`.
pub fn euler_tail_bound(graph: &FactorGraph, w: &EdgeWeights, max_len: usize) -> f64 {
    let (_, k_max) = graph.pf_bounds();
    let q = k_max as f64 * w.max_norm();
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let r = w.dims.iter().copied().max().unwrap_or(1) as f64;
    let e = graph.num_edges() as f64;
    let mut b = 0.0;
    let mut k = max_len + 1;
    let mut term = q.powi(k as i32);
    while term > 1e-300 && k < max_len + 100_000 {
        b += r * e * term / k as f64;
        term *= q;
        k += 1;
    }
    b.exp_m1()
}

/// Both factors of the Ihara–Bass type formula.
#[derive(Debug, Clone)]
pub struct IharaBass {
    /// `det(I − D + 𝓦)`
    pub vertex_det: f64,
    /// `det U_α` per factor
    pub factor_dets: Vec<f64>,
    pub product: f64,
}

fn vertex_offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(dims.len() + 1);
    let mut acc = 0;
    off.push(0);
    for &d in dims {
        acc += d;
        off.push(acc);
    }
    off
}

/// `U_α` with block `(a, b)` equal to `u^α_{m_b → m_a}` off the diagonal and `I` on it.
pub fn factor_u(graph: &FactorGraph, w: &EdgeWeights, factor: usize) -> DMatrix<f64> {
    let members = graph.factor(factor);
    let local: Vec<usize> = members.iter().map(|&i| w.dims[i]).collect();
    let off = vertex_offsets(&local);
    let n = off[members.len()];
    let mut u = DMatrix::identity(n, n);
    for a in 0..members.len() {
        for b in 0..members.len() {
            if a != b {
                let blk = w.get(factor, b, a);
                u.view_mut((off[a], off[b]), blk.shape()).copy_from(blk);
            }
        }
    }
    u
}

/// `I − D + 𝓦` on the vertex space.
pub fn vertex_operator(graph: &FactorGraph, w: &EdgeWeights) -> Result<DMatrix<f64>> {
    let off = vertex_offsets(&w.dims);
    let n = off[graph.num_vertices()];
    let mut x = DMatrix::<f64>::identity(n, n);
    for i in 0..graph.num_vertices() {
        let d = graph.vertex_degree(i) as f64;
        for k in off[i]..off[i + 1] {
            x[(k, k)] -= d;
        }
    }
    for a in 0..graph.num_factors() {
        let members = graph.factor(a);
        let local: Vec<usize> = members.iter().map(|&i| w.dims[i]).collect();
        let loff = vertex_offsets(&local);
        let wa = factor_u(graph, w, a)
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("U of factor {a}")))?;
        for (p, &i) in members.iter().enumerate() {
            for (q, &j) in members.iter().enumerate() {
                let blk = wa.view((loff[p], loff[q]), (local[p], local[q]));
                let mut dst = x.view_mut((off[i], off[j]), (local[p], local[q]));
                dst += blk;
            }
        }
    }
    Ok(x)
}

pub fn ihara_bass_factorization(graph: &FactorGraph, w: &EdgeWeights) -> Result<IharaBass> {
    let factor_dets: Vec<f64> = (0..graph.num_factors()).map(|a| factor_u(graph, w, a).determinant()).collect();
    if let Some(a) = factor_dets.iter().position(|d| d.abs() < 1e-14) {
        return Err(Error::Singular(format!("U of factor {a}")));
    }
    let vertex_det = vertex_operator(graph, w)?.determinant();
    let product = vertex_det * factor_dets.iter().product::<f64>();
    Ok(IharaBass {
        vertex_det,
        factor_dets,
        product,
    })
}

/// `det(I + D̂ − Â) Π_{[e]} det(I − u_e u_ē)` for a pairwise graph.
pub fn ihara_bass_graph(graph: &FactorGraph, w: &EdgeWeights) -> Result<f64> {
    if !graph.is_pairwise() {
        return Err(Error::Unsupported("graph form needs pairwise factors".into()));
    }
    let off = vertex_offsets(&w.dims);
    let n = off[graph.num_vertices()];
    let mut x = DMatrix::<f64>::identity(n, n);
    let mut prod = 1.0;
    for a in 0..graph.num_factors() {
        let f = graph.factor(a);
        for (ti, oi) in [(0usize, 1usize), (1, 0)] {
            let (t, o) = (f[ti], f[oi]);
            // directed graph edge e = (o → t)
            let ue = w.get(a, oi, ti);
            let ubar = w.get(a, ti, oi);
            let rt = w.dims[t];
            let core = DMatrix::identity(rt, rt) - ue * ubar;
            if ti == 0 {
                prod *= core.determinant();
            }
            let inv = core
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("I - u_e u_ebar at factor {a}")))?;
            let dhat = &inv * ue * ubar;
            let ahat = &inv * ue;
            let mut dd = x.view_mut((off[t], off[t]), (rt, rt));
            dd += dhat;
            let mut da = x.view_mut((off[t], off[o]), (rt, w.dims[o]));
            da -= ahat;
        }
    }
    Ok(x.determinant() * prod)
}

/// Classical `(1−u²)^{|E|−|V|} det(I − uA + u²(D − I))`.
pub fn ihara_bass_classical(graph: &FactorGraph, u: f64) -> Result<f64> {
    if !graph.is_pairwise() {
        return Err(Error::Unsupported("classical formula needs pairwise factors".into()));
    }
    let n = graph.num_vertices();
    let mut x = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        x[(i, i)] += u * u * (graph.vertex_degree(i) as f64 - 1.0);
    }
    for f in graph.factors() {
        x[(f[0], f[1])] -= u;
        x[(f[1], f[0])] -= u;
    }
    let exp = graph.num_factors() as i32 - n as i32;
    Ok((1.0 - u * u).powi(exp) * x.determinant())
}

/// `‖M(u) − (ι T T* − ι)‖_∞` with all operators built as explicit matrices.
pub fn iota_decomposition_residual(graph: &FactorGraph, w: &EdgeWeights) -> Result<f64> {
    let m = directed_edge_matrix(graph, w)?;
    let eoff = edge_offsets(graph, &w.dims);
    let voff = vertex_offsets(&w.dims);
    let ne = eoff[graph.num_edges()];
    let nv = voff[graph.num_vertices()];
    let mut iota = DMatrix::zeros(ne, ne);
    let mut t = DMatrix::zeros(ne, nv);
    for (e, ed) in graph.edges().iter().enumerate() {
        let r = w.dims[ed.vertex];
        t.view_mut((eoff[e], voff[ed.vertex]), (r, r)).fill_with_identity();
        for (slot, &f) in graph.factor_edges(ed.factor).iter().enumerate() {
            if slot == ed.slot {
                continue;
            }
            let blk = w.get(ed.factor, slot, ed.slot);
            iota.view_mut((eoff[e], eoff[f]), blk.shape()).copy_from(blk);
        }
    }
    let t_star = t.transpose();
    let rebuilt = &iota * &t * &t_star - &iota;
    Ok((m.matrix - rebuilt).abs().max())
}

/// Near-pole evaluation of the zeta function against spanning-tree counts.
#[derive(Debug, Clone)]
pub struct HashimotoReport {
    pub u: f64,
    /// `ζ_H(u)^{-1} (1 − u)^{χ − 1}`
    pub numeric: f64,
    /// `χ(H) κ(B_H)`
    pub predicted: f64,
    /// `ζ(u)^{-1} (1 − u)^{−(|E|−|V|+1)}` and `−2^{|E|−|V|+1}(|E|−|V|) κ(G)` for pairwise graphs.
    pub graph: Option<(f64, f64)>,
}

pub const HASHIMOTO_U: f64 = 1.0 - 1e-4;

pub fn hashimoto_limit(graph: &FactorGraph) -> Result<HashimotoReport> {
    let k = graph.connected_components();
    if k != 1 {
        return Err(Error::Disconnected { components: k });
    }
    if graph.nullity() == 0 {
        return Err(Error::Unsupported("the limit statement is vacuous on trees".into()));
    }
    let u = HASHIMOTO_U;
    let m = unweighted_matrix(graph);
    let n = m.nrows();
    let (sign, logdet) = log_abs_det(&(DMatrix::identity(n, n) - u * m));
    let zinv = sign * logdet.exp();
    let chi = graph.euler_number();
    let numeric = zinv * (1.0 - u).powi((chi - 1) as i32);
    let predicted = chi as f64 * graph.spanning_tree_count_bipartite()? as f64;
    let graph_form = if graph.is_pairwise() {
        let excess = graph.num_factors() as i32 - graph.num_vertices() as i32;
        let num = zinv * (1.0 - u).powi(-(excess + 1));
        let kappa = graph.spanning_tree_count_graph()? as f64;
        let pred = -(2f64.powi(excess + 1)) * excess as f64 * kappa;
        Some((num, pred))
    } else {
        None
    };
    Ok(HashimotoReport {
        u,
        numeric,
        predicted,
        graph: graph_form,
    })
}
