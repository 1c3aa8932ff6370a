//! Loopy belief propagation in natural parameters, its fixed points, and its linearization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bethe::PseudomarginalPoint;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spd_inverse};
use crate::model::ModelSpec;
use crate::zeta::{directed_edge_matrix, BlockEdgeMatrix, EdgeWeights};

/// Linearizing off a fixed point: residual above this sets the warning flag.
pub const FIXED_POINT_WARNING: f64 = 1e-6;

/// One natural-parameter vector `μ_{α→i} ∈ R^{r_i}` per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    pub mu: Vec<DVector<f64>>,
}

impl MessageSet {
    pub fn zeros(model: &ModelSpec) -> Self {
        let g = model.graph();
        MessageSet {
            mu: g.edges().iter().map(|e| DVector::zeros(model.family().r(e.vertex))).collect(),
        }
    }

    /// `max_e ‖μ_e − ν_e‖∞`.
    pub fn distance(&self, other: &MessageSet) -> f64 {
        self.mu
            .iter()
            .zip(&other.mu)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.mu.iter().flat_map(|v| v.iter().copied()).collect())
    }

    pub fn from_vector(model: &ModelSpec, v: &DVector<f64>) -> Self {
        let mut out = Self::zeros(model);
        let mut k = 0;
        for m in &mut out.mu {
            let n = m.len();
            m.copy_from(&v.rows(k, n));
            k += n;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitMode {
    Zeros,
    Random { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Parallel,
    /// Edge order; empty means the natural edge order.
    Sequential { order: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbpConfig {
    pub schedule: Schedule,
    /// `ε` in `(1 − ε) T(μ) + ε μ`
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LbpConfig {
    fn default() -> Self {
        LbpConfig {
            schedule: Schedule::Parallel,
            damping: 0.0,
            tol: 1e-9,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbpRun {
    pub messages: MessageSet,
    pub converged: bool,
    pub iterations: usize,
    /// change `‖μ^{(t)} − μ^{(t−1)}‖∞` after each update
    pub residuals: Vec<f64>,
}

/// Initial messages. Zero messages that leave a Gaussian factor unnormalizable are
/// replaced by `μ_{α→i} = (0.9 / d_i) Σ_{β∋i} θ̄^β_i`.
pub fn init_messages(model: &ModelSpec, mode: InitMode) -> Result<MessageSet> {
    let g = model.graph();
    let msgs = match mode {
        InitMode::Zeros => MessageSet::zeros(model),
        InitMode::Random { seed, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = MessageSet::zeros(model);
            for v in &mut m.mu {
                for x in v.iter_mut() {
                    *x = rng.random_range(-scale..=scale);
                }
            }
            m
        }
    };
    if messages_valid(model, &msgs) {
        return Ok(msgs);
    }
    if !matches!(mode, InitMode::Zeros) {
        return Err(Error::OutsideDomain("initial messages give an unnormalizable factor".into()));
    }
    let mut fallback = MessageSet::zeros(model);
    for i in 0..g.num_vertices() {
        let d = g.vertex_degree(i) as f64;
        let mut total = DVector::zeros(model.family().r(i));
        for &e in g.vertex_edges(i) {
            let ed = g.edge(e);
            let r = model.family().factor(ed.factor).vertex_range(ed.slot);
            total += model.theta(ed.factor).rows(r.start, r.len());
        }
        for &e in g.vertex_edges(i) {
            fallback.mu[e] = &total * (0.9 / d);
        }
    }
    if messages_valid(model, &fallback) {
        Ok(fallback)
    } else {
        Err(Error::OutsideDomain("no normalizable initial messages found".into()))
    }
}

fn messages_valid(model: &ModelSpec, msgs: &MessageSet) -> bool {
    (0..model.graph().num_factors()).all(|a| model.family().factor(a).in_theta_domain(&factor_theta(model, msgs, a)))
}

/// Sum of the messages into vertex `i` except the one on edge `skip`.
fn cavity(model: &ModelSpec, msgs: &MessageSet, i: usize, skip: usize) -> DVector<f64> {
    let mut out = DVector::zeros(model.family().r(i));
    for &e in model.graph().vertex_edges(i) {
        if e != skip {
            out += &msgs.mu[e];
        }
    }
    out
}

/// `θ̄_α` plus, in every member slot, the cavity messages from the other factors.
pub fn factor_theta(model: &ModelSpec, msgs: &MessageSet, a: usize) -> DVector<f64> {
    let g = model.graph();
    let fam = model.family().factor(a);
    let mut theta = model.theta(a).clone();
    for (slot, &i) in g.factor(a).iter().enumerate() {
        let r = fam.vertex_range(slot);
        let c = cavity(model, msgs, i, g.edge_id(a, slot));
        let mut s = theta.rows_mut(r.start, r.len());
        s += c;
    }
    theta
}

/// New messages on all edges of factor `a`.
fn update_factor(model: &ModelSpec, msgs: &MessageSet, a: usize, slots: Option<usize>) -> Result<Vec<(usize, DVector<f64>)>> {
    let g = model.graph();
    let fam = model.family().factor(a);
    let theta = factor_theta(model, msgs, a);
    let not_normalizable = |slot: usize| Error::NotNormalizable {
        edge: g.edge_id(a, slot),
        factor: a,
        vertex: g.factor(a)[slot],
    };
    let eta = fam.to_expectation(&theta).map_err(|_| not_normalizable(0))?;
    let mut out = Vec::new();
    for (slot, &i) in g.factor(a).iter().enumerate() {
        if slots.is_some_and(|s| s != slot) {
            continue;
        }
        let r = fam.vertex_range(slot);
        let marginal = eta.rows(r.start, r.len()).into_owned();
        let nat = model.family().vertex(i).to_natural(&marginal).map_err(|_| not_normalizable(slot))?;
        let e = g.edge_id(a, slot);
        out.push((e, nat - cavity(model, msgs, i, e)));
    }
    Ok(out)
}

/// `T(μ)`: all messages updated from the same old messages.
pub fn update_parallel(model: &ModelSpec, msgs: &MessageSet) -> Result<MessageSet> {
    let mut out = msgs.clone();
    for a in 0..model.graph().num_factors() {
        for (e, m) in update_factor(model, msgs, a, None)? {
            out.mu[e] = m;
        }
    }
    Ok(out)
}

/// One sweep over `order`, each edge seeing the latest messages.
pub fn update_sequential(model: &ModelSpec, msgs: &MessageSet, order: &[usize]) -> Result<MessageSet> {
    let g = model.graph();
    let mut out = msgs.clone();
    let natural: Vec<usize>;
    let order = if order.is_empty() {
        natural = (0..g.num_edges()).collect();
        &natural
    } else {
        order
    };
    for &e in order {
        if e >= g.num_edges() {
            return Err(Error::Invalid(format!("edge {e} out of range")));
        }
        let ed = g.edge(e);
        for (e2, m) in update_factor(model, &out, ed.factor, Some(ed.slot))? {
            out.mu[e2] = m;
        }
    }
    Ok(out)
}

/// `(1 − ε) T(μ) + ε μ`.
pub fn update_damped(model: &ModelSpec, msgs: &MessageSet, eps: f64) -> Result<MessageSet> {
    let mut t = update_parallel(model, msgs)?;
    for (n, o) in t.mu.iter_mut().zip(&msgs.mu) {
        *n = &*n * (1.0 - eps) + o * eps;
    }
    Ok(t)
}

fn step(model: &ModelSpec, msgs: &MessageSet, cfg: &LbpConfig) -> Result<MessageSet> {
    let next = match &cfg.schedule {
        Schedule::Parallel => update_parallel(model, msgs)?,
        Schedule::Sequential { order } => update_sequential(model, msgs, order)?,
    };
    if cfg.damping == 0.0 {
        return Ok(next);
    }
    let mut out = next;
    for (n, o) in out.mu.iter_mut().zip(&msgs.mu) {
        *n = &*n * (1.0 - cfg.damping) + o * cfg.damping;
    }
    Ok(out)
}

/// Iterate until the change in `ℓ∞` drops below `tol` or `max_iters` updates were made.
pub fn run(model: &ModelSpec, init: MessageSet, cfg: &LbpConfig) -> Result<LbpRun> {
    if !(0.0..1.0).contains(&cfg.damping) {
        return Err(Error::Invalid(format!("damping {} outside [0, 1)", cfg.damping)));
    }
    let mut msgs = init;
    let mut residuals = Vec::new();
    for it in 1..=cfg.max_iters {
        let next = step(model, &msgs, cfg)?;
        let change = next.distance(&msgs);
        msgs = next;
        residuals.push(change);
        if !change.is_finite() {
            return Err(Error::OutsideDomain(format!("messages diverged at iteration {it}")));
        }
        if change < cfg.tol {
            return Ok(LbpRun {
                messages: msgs,
                converged: true,
                iterations: it,
                residuals,
            });
        }
    }
    Ok(LbpRun {
        messages: msgs,
        converged: false,
        iterations: cfg.max_iters,
        residuals,
    })
}

/// `‖T(μ) − μ‖∞`.
pub fn fixed_point_residual(model: &ModelSpec, msgs: &MessageSet) -> Result<f64> {
    Ok(update_parallel(model, msgs)?.distance(msgs))
}

/// Factor and vertex beliefs induced by messages.
#[derive(Debug, Clone)]
pub struct Beliefs {
    /// full `η_α` per factor
    pub factor: Vec<DVector<f64>>,
    pub vertex: Vec<DVector<f64>>,
}

impl Beliefs {
    pub fn point(&self, model: &ModelSpec) -> PseudomarginalPoint {
        PseudomarginalPoint {
            pure: self
                .factor
                .iter()
                .enumerate()
                .map(|(a, eta)| eta.rows(0, model.family().factor(a).pure_dim()).into_owned())
                .collect(),
            vertex: self.vertex.clone(),
        }
    }

    /// Largest mismatch between a factor belief's member marginal and the vertex belief.
    pub fn consistency_residual(&self, model: &ModelSpec) -> f64 {
        let g = model.graph();
        let mut worst: f64 = 0.0;
        for a in 0..g.num_factors() {
            let fam = model.family().factor(a);
            for (slot, &i) in g.factor(a).iter().enumerate() {
                let r = fam.vertex_range(slot);
                worst = worst.max(max_abs(&(self.factor[a].rows(r.start, r.len()) - &self.vertex[i])));
            }
        }
        worst
    }
}

pub fn beliefs(model: &ModelSpec, msgs: &MessageSet) -> Result<Beliefs> {
    let g = model.graph();
    let factor = (0..g.num_factors())
        .map(|a| model.family().factor(a).to_expectation(&factor_theta(model, msgs, a)))
        .collect::<Result<Vec<_>>>()?;
    let vertex = (0..g.num_vertices())
        .map(|i| {
            let mut th = DVector::zeros(model.family().r(i));
            for &e in g.vertex_edges(i) {
                th += &msgs.mu[e];
            }
            model.family().vertex(i).to_expectation(&th)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Beliefs { factor, vertex })
}

#[derive(Debug, Clone)]
pub struct Linearization {
    /// `T'(μ)`, equal to `M(u)`
    pub matrix: BlockEdgeMatrix,
    pub weights: EdgeWeights,
    pub fixed_point_residual: f64,
    /// set when `μ` is not within `FIXED_POINT_WARNING` of a fixed point
    pub warning: bool,
}

/// `u^α_{i→j} = Var[φ_j]^{-1} Cov[φ_j, φ_i]` under the factor belief at `μ`.
pub fn linearization(model: &ModelSpec, msgs: &MessageSet) -> Result<Linearization> {
    let g = model.graph();
    let fam = model.family();
    let covs = (0..g.num_factors())
        .map(|a| fam.factor(a).covariance_theta(&factor_theta(model, msgs, a)))
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<usize> = (0..g.num_vertices()).map(|i| fam.r(i)).collect();
    let mut err = None;
    let weights = EdgeWeights::from_fn(g, &dims, |a, x, y| {
        let f = fam.factor(a);
        let rx = f.vertex_range(x);
        let ry = f.vertex_range(y);
        let var = covs[a].view((ry.start, ry.start), (ry.len(), ry.len())).into_owned();
        let cross = covs[a].view((ry.start, rx.start), (ry.len(), rx.len()));
        match spd_inverse(&var, "member variance") {
            Ok(inv) => inv * cross,
            Err(e) => {
                err = Some(e);
                DMatrix::zeros(ry.len(), rx.len())
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let residual = fixed_point_residual(model, msgs)?;
    Ok(Linearization {
        matrix: directed_edge_matrix(g, &weights)?,
        weights,
        fixed_point_residual: residual,
        warning: residual > FIXED_POINT_WARNING,
    })
}

/// Natural parameters `(θ_α per factor, θ_i per vertex)` of the beliefs induced by `μ`.
pub fn belief_naturals(model: &ModelSpec, msgs: &MessageSet) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let g = model.graph();
    let factor = (0..g.num_factors()).map(|a| factor_theta(model, msgs, a)).collect();
    let vertex = (0..g.num_vertices())
        .map(|i| {
            let mut th = DVector::zeros(model.family().r(i));
            for &e in g.vertex_edges(i) {
                th += &msgs.mu[e];
            }
            th
        })
        .collect();
    (factor, vertex)
}

/// Newton's method on `T(μ) − μ = 0` with Jacobian `M(u) − I` and backtracking on
/// `‖T(μ) − μ‖∞`. Unstable fixed points are reached as well.
pub fn newton_fixed_point(model: &ModelSpec, init: MessageSet, tol: f64, max_iters: usize) -> Result<LbpRun> {
    let mut msgs = init;
    let mut residuals = Vec::new();
    let mut f = (update_parallel(model, &msgs)?.to_vector()) - msgs.to_vector();
    for it in 1..=max_iters {
        let r = max_abs(&f);
        residuals.push(r);
        if r < tol {
            return Ok(LbpRun {
                messages: msgs,
                converged: true,
                iterations: it - 1,
                residuals,
            });
        }
        let lin = linearization(model, &msgs)?;
        let n = f.len();
        let jac = lin.matrix.into_matrix() - DMatrix::<f64>::identity(n, n);
        let delta = jac
            .lu()
            .solve(&(-&f))
            .ok_or_else(|| Error::Singular("I - T'(mu) at a Newton step".into()))?;
        let base = msgs.to_vector();
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let trial = MessageSet::from_vector(model, &(&base + t * &delta));
            if let Ok(next) = update_parallel(model, &trial) {
                let ft = next.to_vector() - trial.to_vector();
                if max_abs(&ft) < r {
                    msgs = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let last = max_abs(&f);
    Ok(LbpRun {
        messages: msgs,
        converged: last < tol,
        iterations: residuals.len(),
        residuals,
    })
}

/// Central-difference Jacobian of `T` at `μ`.
pub fn finite_difference_jacobian(model: &ModelSpec, msgs: &MessageSet, h: f64) -> Result<DMatrix<f64>> {
    let base = msgs.to_vector();
    let n = base.len();
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut plus = base.clone();
        plus[k] += h;
        let mut minus = base.clone();
        minus[k] -= h;
        let tp = update_parallel(model, &MessageSet::from_vector(model, &plus))?.to_vector();
        let tm = update_parallel(model, &MessageSet::from_vector(model, &minus))?.to_vector();
        jac.set_column(k, &((tp - tm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Messages of a stationary point: `μ_{α→i} = θ_i + θ̄^α_i − θ^α_i`.
pub fn messages_from_point(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<MessageSet> {
    let g = model.graph();
    let fam = model.family();
    let mut out = MessageSet::zeros(model);
    for a in 0..g.num_factors() {
        let f = fam.factor(a);
        let theta = f.to_natural(&point.factor_eta(model, a))?;
        for (slot, &i) in g.factor(a).iter().enumerate() {
            let r = f.vertex_range(slot);
            let ti = fam.vertex(i).to_natural(&point.vertex[i])?;
            out.mu[g.edge_id(a, slot)] =
                ti + model.theta(a).rows(r.start, r.len()) - theta.rows(r.start, r.len());
        }
    }
    Ok(out)
}
