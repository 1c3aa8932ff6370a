#![allow(dead_code)]

use bethe_zeta::bethe::PseudomarginalPoint;
use bethe_zeta::lbp::{self, MessageSet};
use bethe_zeta::zeta::EdgeWeights;
use bethe_zeta::{FactorGraph, ModelSpec, VertexKind};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// M(u) assembled straight from the feed rule: block (e, e') is `u^α_{j→i}` when
/// e = (α→i), e' = (β→j), j ∈ α, j ≠ i and β ≠ α.
pub fn feed_matrix(g: &FactorGraph, w: &EdgeWeights) -> DMatrix<f64> {
    let dims = w.dims();
    let edges = g.edges();
    let mut off = vec![0];
    for e in edges {
        off.push(off.last().unwrap() + dims[e.vertex]);
    }
    let n = *off.last().unwrap();
    let mut m = DMatrix::zeros(n, n);
    for (x, e) in edges.iter().enumerate() {
        for (y, f) in edges.iter().enumerate() {
            if f.factor == e.factor || f.vertex == e.vertex {
                continue;
            }
            let Some(slot_j) = g.factor(e.factor).iter().position(|&v| v == f.vertex) else {
                continue;
            };
            let blk = w.get(e.factor, slot_j, e.slot);
            m.view_mut((off[x], off[y]), blk.shape()).copy_from(blk);
        }
    }
    m
}

pub fn det_i_minus(m: &DMatrix<f64>) -> f64 {
    (DMatrix::identity(m.nrows(), m.ncols()) - m).determinant()
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Random scalar weights in `[-s, s]`.
pub fn random_scalar_weights<R: Rng>(g: &FactorGraph, rng: &mut R, s: f64) -> EdgeWeights {
    EdgeWeights::scalar(g, |_, _, _| rng.random_range(-s..s))
}

/// Random `r×r` weight blocks rescaled to operator norm at most `s`.
pub fn random_block_weights<R: Rng>(g: &FactorGraph, rng: &mut R, r: usize, s: f64) -> EdgeWeights {
    EdgeWeights::from_fn(g, &vec![r; g.num_vertices()], |_, _, _| {
        let b = DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
        let norm: f64 = b.clone().svd(false, false).singular_values.max();
        b * (rng.random_range(0.0..s) / norm.max(1e-12))
    })
    .unwrap()
}

/// Spanning trees of a multigraph by testing every `(|V|−1)`-subset of edges.
pub fn spanning_trees_bruteforce(n: usize, edges: &[(usize, usize)]) -> u64 {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let m = edges.len();
    let mut count = 0;
    for mask in 0u64..(1u64 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        let mut ok = true;
        for (k, &(a, b)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    ok = false;
                    break;
                }
                parent[ra] = rb;
            }
        }
        if ok {
            count += 1;
        }
    }
    count
}

/// Enumerated joint log-potential of a discrete model (vertex 0 most significant).
pub fn joint_log_psi(model: &ModelSpec) -> (Vec<usize>, Vec<f64>) {
    let g = model.graph();
    let fam = model.family();
    let radices: Vec<usize> = fam.kinds().iter().map(|k| k.states().unwrap()).collect();
    let total: usize = radices.iter().product();
    let mut logs = vec![0.0; total];
    for (s, l) in logs.iter_mut().enumerate() {
        let x = digits(&radices, s);
        for a in 0..g.num_factors() {
            *l += factor_log_potential(model, a, &x);
        }
    }
    (radices, logs)
}

pub fn digits(radices: &[usize], s: usize) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    let mut s = s;
    for k in (0..radices.len()).rev() {
        out[k] = s % radices[k];
        s /= radices[k];
    }
    out
}

/// Statistic value of vertex kind at state `x`.
pub fn vertex_stats(kind: VertexKind, x: usize) -> Vec<f64> {
    match kind {
        VertexKind::Spin => vec![if x == 0 { 1.0 } else { -1.0 }],
        VertexKind::Multinomial { states } => (0..states - 1).map(|k| if k == x { 1.0 } else { 0.0 }).collect(),
        _ => unreachable!(),
    }
}

/// `⟨θ̄_α, φ_α(x_α)⟩` with the statistics ordered as pure products of member statistics
/// (increasing subsets of size at least two, lexicographic in coordinates) and then members.
pub fn factor_log_potential(model: &ModelSpec, a: usize, x: &[usize]) -> f64 {
    let fam = model.family();
    let members = model.graph().factor(a);
    let stats: Vec<Vec<f64>> = members.iter().map(|&i| vertex_stats(fam.kind(i), x[i])).collect();
    let phi = factor_stats(&stats);
    let theta = model.theta(a);
    assert_eq!(phi.len(), theta.len());
    phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum()
}

/// Pure products over all member subsets of size ≥ 2 in the family's order, then members.
pub fn factor_stats(stats: &[Vec<f64>]) -> Vec<f64> {
    let d = stats.len();
    let mut pure = Vec::new();
    for size in 2..=d {
        for subset in subsets(d, size) {
            let mut acc = vec![1.0];
            for &k in &subset {
                acc = acc.iter().flat_map(|p| stats[k].iter().map(move |s| p * s)).collect();
            }
            pure.extend(acc);
        }
    }
    let mut out = pure;
    for s in stats {
        out.extend(s.iter().copied());
    }
    out
}

fn subsets(d: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, d: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..d {
            cur.push(k);
            rec(k + 1, d, size, cur, out);
            cur.pop();
        }
    }
    rec(0, d, size, &mut cur, &mut out);
    out
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact vertex marginal probabilities of a discrete model.
pub fn exact_vertex_marginals(model: &ModelSpec) -> Vec<Vec<f64>> {
    let (radices, logs) = joint_log_psi(model);
    let lz = log_sum_exp(&logs);
    let mut out: Vec<Vec<f64>> = radices.iter().map(|&r| vec![0.0; r]).collect();
    for (s, l) in logs.iter().enumerate() {
        let p = (l - lz).exp();
        for (i, &x) in digits(&radices, s).iter().enumerate() {
            out[i][x] += p;
        }
    }
    out
}

/// Probabilities of a discrete vertex belief from its expectation parameter.
pub fn vertex_probs(kind: VertexKind, eta: &DVector<f64>) -> Vec<f64> {
    match kind {
        VertexKind::Spin => vec![(1.0 + eta[0]) / 2.0, (1.0 - eta[0]) / 2.0],
        VertexKind::Multinomial { .. } => {
            let mut p: Vec<f64> = eta.iter().copied().collect();
            p.push(1.0 - eta.sum());
            p
        }
        _ => unreachable!(),
    }
}

/// Precision of a pairwise fixed-mean Gaussian model with statistics
/// `((x_i−m_i)(x_j−m_j), (x_i−m_i)², (x_j−m_j)²)` per factor.
pub fn gaussian_precision(model: &ModelSpec) -> DMatrix<f64> {
    let g = model.graph();
    let n = g.num_vertices();
    let mut p = DMatrix::zeros(n, n);
    for a in 0..g.num_factors() {
        let f = g.factor(a);
        let t = model.theta(a);
        p[(f[0], f[1])] -= t[0];
        p[(f[1], f[0])] -= t[0];
        p[(f[0], f[0])] -= 2.0 * t[1];
        p[(f[1], f[1])] -= 2.0 * t[2];
    }
    p
}

/// `log ∫ exp(−½ xᵀPx) dx`.
pub fn gaussian_log_z(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows() as f64;
    0.5 * (n * (2.0 * std::f64::consts::PI).ln() - p.determinant().ln())
}

/// Central-difference Jacobian of the parallel LBP update.
pub fn fd_jacobian(model: &ModelSpec, msgs: &MessageSet, h: f64) -> DMatrix<f64> {
    let base = msgs.to_vector();
    let n = base.len();
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut up = base.clone();
        up[k] += h;
        let mut dn = base.clone();
        dn[k] -= h;
        let tp = lbp::update_parallel(model, &MessageSet::from_vector(model, &up)).unwrap().to_vector();
        let tm = lbp::update_parallel(model, &MessageSet::from_vector(model, &dn)).unwrap().to_vector();
        jac.set_column(k, &((tp - tm) / (2.0 * h)));
    }
    jac
}

/// LBP to a tight fixed point: damped iteration, finished by Newton.
pub fn converge(model: &ModelSpec) -> MessageSet {
    let init = lbp::init_messages(model, lbp::InitMode::Zeros).unwrap();
    let cfg = lbp::LbpConfig {
        damping: 0.3,
        tol: 1e-13,
        max_iters: 20_000,
        ..Default::default()
    };
    let run = lbp::run(model, init, &cfg).unwrap();
    let refined = lbp::newton_fixed_point(model, run.messages, 1e-13, 50).unwrap();
    refined.messages
}

/// Random discrete kinds mixing spins and 3-state variables.
pub fn random_discrete_kinds<R: Rng>(rng: &mut R, n: usize) -> Vec<VertexKind> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                VertexKind::Spin
            } else {
                VertexKind::Multinomial { states: 3 }
            }
        })
        .collect()
}

pub fn random_theta<R: Rng>(model: &ModelSpec, rng: &mut R, s: f64) -> Vec<DVector<f64>> {
    (0..model.graph().num_factors())
        .map(|a| DVector::from_fn(model.family().factor(a).dim(), |_, _| rng.random_range(-s..s)))
        .collect()
}

/// Random discrete model with parameters in `[-s, s]`.
pub fn random_discrete_model<R: Rng>(g: FactorGraph, kinds: Vec<VertexKind>, rng: &mut R, s: f64) -> ModelSpec {
    let zero = ModelSpec::zero(g, kinds).unwrap();
    let theta = random_theta(&zero, rng, s);
    zero.with_thetas(theta).unwrap()
}

/// Diagonally dominant fixed-mean Gaussian on a pairwise graph, unit diagonal.
pub fn random_gaussian_model<R: Rng>(g: FactorGraph, rng: &mut R) -> ModelSpec {
    let n = g.num_vertices();
    let dmax = (0..n).map(|i| g.vertex_degree(i)).max().unwrap_or(1) as f64;
    let c: Vec<f64> = (0..g.num_factors()).map(|_| rng.random_range(-0.9..0.9) / dmax).collect();
    ModelSpec::fixed_mean_gaussian(g, &c, &vec![1.0; n], &vec![0.0; n]).unwrap()
}

/// Gaussian belief covariance of a pairwise fixed-mean point on a tree:
/// `Σ^{-1} = Σ_α Var_α^{-1} + Σ_i (1 − d_i) η_ii^{-1}`.
pub fn tree_gaussian_covariance(model: &ModelSpec, point: &PseudomarginalPoint) -> DMatrix<f64> {
    let g = model.graph();
    let n = g.num_vertices();
    let mut k = DMatrix::zeros(n, n);
    for a in 0..g.num_factors() {
        let f = g.factor(a);
        let c = DMatrix::from_row_slice(
            2,
            2,
            &[point.vertex[f[0]][0], point.pure[a][0], point.pure[a][0], point.vertex[f[1]][0]],
        );
        let inv = c.try_inverse().unwrap();
        for x in 0..2 {
            for y in 0..2 {
                k[(f[x], f[y])] += inv[(x, y)];
            }
        }
    }
    for i in 0..n {
        k[(i, i)] += (1.0 - g.vertex_degree(i) as f64) / point.vertex[i][0];
    }
    k.try_inverse().unwrap()
}
