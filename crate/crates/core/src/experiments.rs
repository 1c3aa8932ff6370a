//! The two sweep experiments on binary factors and the attractive-model trajectories.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{
    self, stability_classify, uniqueness_certificate, FactorTable, Trajectory, TrajectoryOptions, WeightCache,
    WeightKind, WeightOptions,
};
use crate::bethe;
use crate::error::{Error, Result};
use crate::family::{DiscreteFamily, VertexKind};
use crate::generators;
use crate::graph::FactorGraph;
use crate::lbp::{self, LbpConfig, Schedule};
use crate::model::ModelSpec;

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "BETHE_ZETA_THREADS";

/// `θ` of a spin factor with coupling `by_order[k]` on every product of `k` members.
pub fn symmetric_spin_theta(degree: usize, by_order: &[f64]) -> DVector<f64> {
    let fam = DiscreteFamily::new(&vec![VertexKind::Spin; degree]).expect("spin family");
    let mut theta = DVector::zeros(fam.dim());
    for (k, term) in fam.pure_terms().iter().enumerate() {
        theta[k] = by_order.get(term.len()).copied().unwrap_or(0.0);
    }
    theta
}

/// `Ψ = exp(K Σ_{i<j<k} x_i x_j x_k + J Σ_{i<j} x_i x_j)` on every grid point of the 3×3 torus,
/// binary variables on the grid edges.
pub fn grid_model(k: f64, j: f64) -> ModelSpec {
    grid_model_sized(3, 3, k, j).expect("grid model")
}

pub fn grid_model_sized(rows: usize, cols: usize, k: f64, j: f64) -> Result<ModelSpec> {
    let g = generators::factor_torus(rows, cols);
    let theta = vec![symmetric_spin_theta(4, &[0.0, 0.0, j, k]); g.num_factors()];
    let n = g.num_vertices();
    ModelSpec::new(g, vec![VertexKind::Spin; n], theta)
}

/// `Ψ(x1,x2,x3) = exp(K x1x2x3 + 0.3 Σ x_i x_j)`.
pub fn wn_factor(k: f64) -> FactorTable {
    let fam = DiscreteFamily::new(&[VertexKind::Spin; 3]).expect("spin family");
    let theta = symmetric_spin_theta(3, &[0.0, 0.0, 0.3, k]);
    let log = fam.stats() * theta;
    FactorTable::new(vec![2, 2, 2], log.iter().copied().collect()).expect("table")
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Runs `f` on a pool sized by `BETHE_ZETA_THREADS` when set.
pub fn with_pool<T: Send, F: FnOnce() -> T + Send>(f: F) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProtocolConfig {
    /// Constant initial messages, parallel updates, change below `1e−3` within 30 updates.
    fn default() -> Self {
        ProtocolConfig { tol: 1e-3, max_iters: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub converged: bool,
    pub rho_w: f64,
    pub rho_n: f64,
    pub certified_w: bool,
    pub certified_n: bool,
    #[serde(skip)]
    pub iterations: usize,
    /// `Some` at converged points
    #[serde(skip)]
    pub locally_stable: Option<bool>,
    #[serde(skip)]
    pub min_eig_restricted_hessian: Option<f64>,
}

pub fn grid_point(k: f64, j: f64, protocol: &ProtocolConfig, opts: &WeightOptions) -> Result<GridRow> {
    let model = grid_model(k, j);
    let run = lbp::run(
        &model,
        lbp::MessageSet::zeros(&model),
        &LbpConfig {
            schedule: Schedule::Parallel,
            damping: 0.0,
            tol: protocol.tol,
            max_iters: protocol.max_iters,
        },
    );
    let (converged, iterations, msgs) = match run {
        Ok(r) => (r.converged, r.iterations, Some(r.messages)),
        Err(_) => (false, protocol.max_iters, None),
    };
    let mut cache = WeightCache::new(*opts);
    let w = uniqueness_certificate(&model, WeightKind::W, &mut cache)?;
    let n = uniqueness_certificate(&model, WeightKind::N, &mut cache)?;
    let analysis = msgs
        .filter(|_| converged)
        .and_then(|m| polish(&model, m))
        .and_then(|m| fixed_point_analysis(&model, &m).ok());
    let (locally_stable, min_eig) = match analysis {
        Some((s, e)) => (Some(s), Some(e)),
        None => (None, None),
    };
    Ok(GridRow {
        k,
        j,
        converged,
        rho_w: w.rho,
        rho_n: n.rho,
        certified_w: w.certified,
        certified_n: n.certified,
        iterations,
        locally_stable,
        min_eig_restricted_hessian: min_eig,
    })
}

/// `(locally stable, min eig ∇²F̂)` at a fixed point.
pub fn fixed_point_analysis(model: &ModelSpec, msgs: &lbp::MessageSet) -> Result<(bool, f64)> {
    let s = stability_classify(model, msgs)?;
    let (ft, vt) = lbp::belief_naturals(model, msgs);
    let h = bethe::restricted_hessian_natural(model, &ft, &vt)?;
    Ok((s.locally_stable, h.min_eigenvalue()))
}

/// Residual, relative to `max(1, ‖μ‖∞)`, below which a polished point is accepted as a fixed point.
pub const POLISH_ACCEPT: f64 = 1e-7;

fn accepted(msgs: &lbp::MessageSet, residual: f64) -> bool {
    let scale = msgs.mu.iter().flat_map(|v| v.iter()).fold(1.0f64, |a, x| a.max(x.abs()));
    residual < POLISH_ACCEPT * scale
}

/// Refines a protocol-converged run to a tight fixed point by Newton steps, falling back to
/// (damped) iteration; `None` if neither reaches `POLISH_ACCEPT`.
pub fn polish(model: &ModelSpec, msgs: lbp::MessageSet) -> Option<lbp::MessageSet> {
    if let Ok(r) = lbp::newton_fixed_point(model, msgs.clone(), 1e-12, 30) {
        if r.residuals.last().is_some_and(|&x| accepted(&r.messages, x)) {
            return Some(r.messages);
        }
    }
    for damping in [0.0, 0.5] {
        let cfg = LbpConfig {
            schedule: Schedule::Parallel,
            damping,
            tol: 1e-12,
            max_iters: 5000,
        };
        if let Ok(r) = lbp::run(model, msgs.clone(), &cfg) {
            if lbp::fixed_point_residual(model, &r.messages).is_ok_and(|x| accepted(&r.messages, x)) {
                return Some(r.messages);
            }
        }
    }
    None
}

/// Rows in `K`-major order: for each `K`, every `J`.
pub fn grid_sweep(
    ks: &[f64],
    js: &[f64],
    protocol: &ProtocolConfig,
    opts: &WeightOptions,
) -> Result<Vec<GridRow>> {
    let points: Vec<(f64, f64)> = ks.iter().flat_map(|&k| js.iter().map(move |&j| (k, j))).collect();
    with_pool(|| points.par_iter().map(|&(k, j)| grid_point(k, j, protocol, opts)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WnRow {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "N")]
    pub n: f64,
    /// some start met the simplex tolerance
    pub optimizer_ok: bool,
}

pub fn wn_sweep(ks: &[f64], opts: &WeightOptions) -> Result<Vec<WnRow>> {
    with_pool(|| {
        ks.par_iter()
            .map(|&k| {
                let t = wn_factor(k);
                let w = diagnostics::w_weight_table(&t, 0, 1, opts)?;
                let n = diagnostics::n_weight_table(&t, 0, 1)?;
                Ok(WnRow {
                    k,
                    w: w.value,
                    n,
                    optimizer_ok: w.converged_starts > 0,
                })
            })
            .collect()
    })
}

/// Ising model on `graph` with every coupling `j` and no fields.
pub fn uniform_ising(graph: &FactorGraph, j: f64) -> Result<ModelSpec> {
    ModelSpec::ising(graph.clone(), &vec![j; graph.num_factors()], &vec![0.0; graph.num_vertices()])
}

/// Torus Ising `J = t`.
pub fn torus_ising_trajectory(rows: usize, cols: usize, t_grid: &[f64], opts: &TrajectoryOptions) -> Result<Trajectory> {
    let g = generators::torus(rows, cols);
    diagnostics::trajectory(|t| uniform_ising(&g, t), t_grid, opts)
}

/// Fixed-mean Gaussian torus with unit diagonal precision and coupling `t` on every edge.
pub fn gaussian_torus_trajectory(
    rows: usize,
    cols: usize,
    t_grid: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    let g = generators::torus(rows, cols);
    let n = g.num_vertices();
    let m = g.num_factors();
    diagnostics::trajectory(
        |t| ModelSpec::fixed_mean_gaussian(g.clone(), &vec![t; m], &vec![1.0; n], &vec![0.0; n]),
        t_grid,
        opts,
    )
}

/// Trajectory of `θ̄(t) = t · (pure part of the template)`.
pub fn template_trajectory(template: &ModelSpec, t_grid: &[f64], opts: &TrajectoryOptions) -> Result<Trajectory> {
    check_attractive_template(template)?;
    diagnostics::trajectory(|t| template.scale_pure(t), t_grid, opts)
}

/// Binary pairwise with nonnegative couplings, or pairwise fixed-mean Gaussian.
pub fn check_attractive_template(model: &ModelSpec) -> Result<()> {
    let g = model.graph();
    let fam = model.family();
    if !g.is_pairwise() {
        return Err(Error::Unsupported("trajectory needs a pairwise model".into()));
    }
    let binary = fam.kinds().iter().all(|k| matches!(k, VertexKind::Spin | VertexKind::Multinomial { states: 2 }));
    let fixed = fam.kinds().iter().all(|k| matches!(k, VertexKind::GaussianFixedMean { .. }));
    if fixed {
        return Ok(());
    }
    if !binary {
        return Err(Error::Unsupported("trajectory needs binary or fixed-mean Gaussian variables".into()));
    }
    for a in 0..g.num_factors() {
        let c = model.theta(a)[0];
        if c < 0.0 {
            return Err(Error::Unsupported(format!("factor {a} is not attractive (coupling {c})")));
        }
    }
    Ok(())
}
