//! Uniqueness certificates from scalar edge weights, spectral stability of fixed points,
//! and continuation of fixed points along a one-parameter family of models.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bethe::{in_real_ray, restricted_hessian_natural};
use crate::error::{Error, Result};
use crate::family::ExpFamily;
use crate::graph::FactorGraph;
use crate::lbp::{self, LbpConfig, MessageSet, Schedule};
use crate::linalg::{inv_sqrt_psd, operator_norm, spectral_radius};
use crate::model::ModelSpec;
use crate::zeta::{directed_edge_matrix, EdgeWeights};

/// Factor on its own: `log Ψ_α` over joint member states, first member most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    radices: Vec<usize>,
    log_psi: Vec<f64>,
}

impl FactorTable {
    pub fn new(radices: Vec<usize>, log_psi: Vec<f64>) -> Result<Self> {
        if radices.iter().product::<usize>() != log_psi.len() {
            return Err(Error::Shape("factor table size does not match the alphabets".into()));
        }
        Ok(FactorTable { radices, log_psi })
    }

    pub fn from_family(fam: &ExpFamily, theta: &DVector<f64>) -> Result<Self> {
        let d = fam
            .as_discrete()
            .ok_or_else(|| Error::Unsupported("edge weights need a multinomial factor".into()))?;
        let log = d.stats() * theta;
        Self::new(d.radices().to_vec(), log.iter().copied().collect())
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn log_psi(&self) -> &[f64] {
        &self.log_psi
    }

    fn digits(&self, mut s: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        for k in (0..self.radices.len()).rev() {
            out[k] = s % self.radices[k];
            s /= self.radices[k];
        }
        out
    }

    fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.radices).fold(0, |acc, (d, r)| acc * r + d)
    }

    /// Axis `k` of the result is axis `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let radices: Vec<usize> = order.iter().map(|&k| self.radices[k]).collect();
        let mut out = FactorTable {
            radices,
            log_psi: vec![0.0; self.log_psi.len()],
        };
        for s in 0..self.log_psi.len() {
            let d = self.digits(s);
            let nd: Vec<usize> = order.iter().map(|&k| d[k]).collect();
            let t = out.index(&nd);
            out.log_psi[t] = self.log_psi[s];
        }
        out
    }

    /// Members `i, j` moved to the front, constant removed. Used as a cache key.
    fn canonical(&self, i: usize, j: usize) -> Self {
        let mut order = vec![i, j];
        order.extend((0..self.radices.len()).filter(|&k| k != i && k != j));
        let mut t = self.permuted(&order);
        let c = t.log_psi[0];
        t.log_psi.iter_mut().for_each(|x| *x -= c);
        t
    }

    fn key(&self) -> Vec<u64> {
        self.radices
            .iter()
            .map(|&r| r as u64)
            .chain(std::iter::once(u64::MAX))
            .chain(self.log_psi.iter().map(|x| x.to_bits()))
            .collect()
    }
}

fn check_pair(t: &FactorTable, i: usize, j: usize) -> Result<()> {
    if i == j || i >= t.radices.len() || j >= t.radices.len() {
        return Err(Error::Invalid(format!("({i}, {j}) is not a pair of distinct members")));
    }
    Ok(())
}

/// `N_{ij}`: exact maximum of `tanh(¼ log[Ψ(a,b,γ)Ψ(a',b',γ') / (Ψ(a',b,γ)Ψ(a,b',γ'))])`
/// over `a≠a'`, `b≠b'` and all `γ, γ'`, taken over both assignments of the roles of `i, j`.
pub fn n_weight_table(t: &FactorTable, i: usize, j: usize) -> Result<f64> {
    check_pair(t, i, j)?;
    Ok(n_directed(t, i, j).max(n_directed(t, j, i)))
}

fn n_directed(t: &FactorTable, i: usize, j: usize) -> f64 {
    let n = t.log_psi.len();
    let digits: Vec<Vec<usize>> = (0..n).map(|s| t.digits(s)).collect();
    let mut best = f64::NEG_INFINITY;
    for s in 0..n {
        for s2 in 0..n {
            let (d, d2) = (&digits[s], &digits[s2]);
            if d[i] == d2[i] || d[j] == d2[j] {
                continue;
            }
            let mut x = d.clone();
            x[i] = d2[i];
            let mut y = d2.clone();
            y[i] = d[i];
            let v = t.log_psi[s] + t.log_psi[s2] - t.log_psi[t.index(&x)] - t.log_psi[t.index(&y)];
            best = best.max(v);
        }
    }
    (0.25 * best).tanh()
}

pub fn n_weight(fam: &ExpFamily, theta: &DVector<f64>, i: usize, j: usize) -> Result<f64> {
    n_weight_table(&FactorTable::from_family(fam, theta)?, i, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    pub starts: usize,
    pub max_evals: usize,
    pub tol: f64,
    /// initial log f coordinates drawn from `U[−init_range, init_range]`
    pub init_range: f64,
    pub seed: u64,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            starts: 20,
            max_evals: 2000,
            tol: 1e-6,
            init_range: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEstimate {
    /// best correlation norm found (a lower bound of the supremum)
    pub value: f64,
    /// starts whose simplex met the tolerance within budget
    pub converged_starts: usize,
    pub evaluations: usize,
}

/// `‖Corr_b[φ_i, φ_j]‖` for `b ∝ Ψ Π_k f_k`, with `log f_k(0) = 0` and the remaining
/// `log f_k` values taken from `z`.
struct CorrObjective<'a> {
    table: &'a FactorTable,
    i: usize,
    j: usize,
    digits: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl<'a> CorrObjective<'a> {
    fn new(table: &'a FactorTable, i: usize, j: usize) -> Self {
        let digits = (0..table.log_psi.len()).map(|s| table.digits(s)).collect();
        let mut offsets = vec![0];
        for r in &table.radices {
            offsets.push(offsets.last().unwrap() + r - 1);
        }
        CorrObjective {
            table,
            i,
            j,
            digits,
            offsets,
        }
    }

    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn eval(&self, z: &[f64]) -> f64 {
        let t = self.table;
        let mut logs: Vec<f64> = t.log_psi.clone();
        for (s, l) in logs.iter_mut().enumerate() {
            for (k, &x) in self.digits[s].iter().enumerate() {
                if x > 0 {
                    *l += z[self.offsets[k] + x - 1];
                }
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let (ri, rj) = (t.radices[self.i], t.radices[self.j]);
        let mut joint = DMatrix::<f64>::zeros(rj, ri);
        for (s, ps) in p.iter().enumerate() {
            let d = &self.digits[s];
            joint[(d[self.j], d[self.i])] += ps;
        }
        let pj: Vec<f64> = (0..rj).map(|b| joint.row(b).sum()).collect();
        let pi: Vec<f64> = (0..ri).map(|a| joint.column(a).sum()).collect();
        if ri == 2 && rj == 2 {
            let c = joint[(1, 1)] - pj[1] * pi[1];
            let v = pi[1] * (1.0 - pi[1]) * pj[1] * (1.0 - pj[1]);
            return if v > 0.0 { c.abs() / v.sqrt() } else { f64::NAN };
        }
        let vi = DMatrix::from_fn(ri - 1, ri - 1, |a, b| {
            (if a == b { pi[a + 1] } else { 0.0 }) - pi[a + 1] * pi[b + 1]
        });
        let vj = DMatrix::from_fn(rj - 1, rj - 1, |a, b| {
            (if a == b { pj[a + 1] } else { 0.0 }) - pj[a + 1] * pj[b + 1]
        });
        let c = DMatrix::from_fn(rj - 1, ri - 1, |b, a| joint[(b + 1, a + 1)] - pj[b + 1] * pi[a + 1]);
        if crate::linalg::sym_eigenvalues(&vi)[0] <= 0.0 || crate::linalg::sym_eigenvalues(&vj)[0] <= 0.0 {
            return f64::NAN;
        }
        operator_norm(&(inv_sqrt_psd(&vj) * c * inv_sqrt_psd(&vi)))
    }
}

/// Minimise `f` from `x0`. Returns the best point, its value, evaluations used and
/// whether the spread of simplex values fell below `tol`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    tol: f64,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut count = 0;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut count);
    simplex.push((x0.to_vec(), v0));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += step;
        let v = eval(&x, &mut count);
        simplex.push((x, v));
    }
    let mut converged = false;
    while count < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() <= tol {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for k in 0..n {
                centroid[k] += x[k] / n as f64;
            }
        }
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            (0..n).map(|k| centroid[k] + t * (worst[k] - centroid[k])).collect()
        };
        let worst = simplex[n].0.clone();
        let xr = along(-1.0, &worst);
        let fr = eval(&xr, &mut count);
        if fr < simplex[0].1 {
            let xe = along(-2.0, &worst);
            let fe = eval(&xe, &mut count);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5, &worst);
                let fc = eval(&xc, &mut count);
                (xc, fc)
            } else {
                let xc = along(0.5, &worst);
                let fc = eval(&xc, &mut count);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = (0..n).map(|k| best[k] + 0.5 * (item.0[k] - best[k])).collect();
                    let v = eval(&x, &mut count);
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, count, converged)
}

/// `W_{ij}`: supremum over positive vertex functions of the correlation norm, by multistart
/// Nelder–Mead over the free `log f` coordinates.
pub fn w_weight_table(t: &FactorTable, i: usize, j: usize, opts: &WeightOptions) -> Result<WeightEstimate> {
    check_pair(t, i, j)?;
    let obj = CorrObjective::new(t, i, j);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = f64::NEG_INFINITY;
    let mut converged_starts = 0;
    let mut evaluations = 0;
    for _ in 0..opts.starts {
        let x0: Vec<f64> = (0..obj.dim())
            .map(|_| rng.random_range(-opts.init_range..=opts.init_range))
            .collect();
        let (_, v, used, ok) = nelder_mead(|z| -obj.eval(z), &x0, 1.0, opts.max_evals, opts.tol);
        evaluations += used;
        if ok {
            converged_starts += 1;
        }
        if v.is_finite() {
            best = best.max(-v);
        }
    }
    if !best.is_finite() {
        return Err(Error::Invalid("correlation undefined at every start".into()));
    }
    Ok(WeightEstimate {
        value: best,
        converged_starts,
        evaluations,
    })
}

pub fn w_weight(
    fam: &ExpFamily,
    theta: &DVector<f64>,
    i: usize,
    j: usize,
    opts: &WeightOptions,
) -> Result<WeightEstimate> {
    w_weight_table(&FactorTable::from_family(fam, theta)?, i, j, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    W,
    N,
}

/// Factor-local weight computations shared across factors with identical tables.
#[derive(Debug, Default)]
pub struct WeightCache {
    values: HashMap<(WeightKind, Vec<u64>), f64>,
    opts: WeightOptions,
}

impl WeightCache {
    pub fn new(opts: WeightOptions) -> Self {
        WeightCache {
            values: HashMap::new(),
            opts,
        }
    }

    pub fn weight(&mut self, kind: WeightKind, t: &FactorTable, i: usize, j: usize) -> Result<f64> {
        check_pair(t, i, j)?;
        let c = t.canonical(i.min(j), i.max(j));
        let key = (kind, c.key());
        if let Some(v) = self.values.get(&key) {
            return Ok(*v);
        }
        let v = match kind {
            WeightKind::N => n_weight_table(&c, 0, 1)?,
            WeightKind::W => w_weight_table(&c, 0, 1, &self.opts)?.value,
        };
        self.values.insert(key, v);
        Ok(v)
    }
}

/// One symmetric weight matrix per factor (member slots × member slots, zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEdgeWeights {
    pub kind: WeightKind,
    pub per_factor: Vec<DMatrix<f64>>,
}

impl ScalarEdgeWeights {
    pub fn edge_weights(&self, graph: &FactorGraph, scale: f64) -> EdgeWeights {
        EdgeWeights::scalar(graph, |a, x, y| scale * self.per_factor[a][(x, y)])
    }

    pub fn max(&self) -> f64 {
        self.per_factor.iter().map(|m| m.max()).fold(0.0, f64::max)
    }
}

pub fn scalar_weights(model: &ModelSpec, kind: WeightKind, cache: &mut WeightCache) -> Result<ScalarEdgeWeights> {
    let g = model.graph();
    let mut per_factor = Vec::with_capacity(g.num_factors());
    for a in 0..g.num_factors() {
        let t = FactorTable::from_family(model.family().factor(a), model.theta(a))?;
        let d = g.factor_degree(a);
        let mut m = DMatrix::zeros(d, d);
        for x in 0..d {
            for y in x + 1..d {
                let v = cache.weight(kind, &t, x, y)?;
                m[(x, y)] = v;
                m[(y, x)] = v;
            }
        }
        per_factor.push(m);
    }
    Ok(ScalarEdgeWeights { kind, per_factor })
}

/// Applied to W before the spectral test.
pub const W_SAFETY_FACTOR: f64 = 1.001;

#[derive(Debug, Clone)]
pub struct Certificate {
    pub kind: WeightKind,
    /// `ρ(𝓜(weights))`, with the safety factor applied for W
    pub rho: f64,
    pub certified: bool,
    pub weights: ScalarEdgeWeights,
}

pub fn uniqueness_certificate(model: &ModelSpec, kind: WeightKind, cache: &mut WeightCache) -> Result<Certificate> {
    let weights = scalar_weights(model, kind, cache)?;
    let scale = match kind {
        WeightKind::W => W_SAFETY_FACTOR,
        WeightKind::N => 1.0,
    };
    let m = directed_edge_matrix(model.graph(), &weights.edge_weights(model.graph(), scale))?;
    let rho = spectral_radius(m.matrix())?;
    Ok(Certificate {
        kind,
        rho,
        certified: rho < 1.0,
        weights,
    })
}

/// Eigenvalues within this distance of the unit circle make the report marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub spectrum: Vec<Complex<f64>>,
    pub rho: f64,
    /// every `|λ| < 1`
    pub locally_stable: bool,
    /// every `Re λ < 1`
    pub stable_with_damping: bool,
    /// no eigenvalue in `R_{≥1}`
    pub local_min_certified: bool,
    pub marginal: bool,
    pub fixed_point_residual: f64,
}

pub fn stability_from_spectrum(spectrum: Vec<Complex<f64>>, fixed_point_residual: f64) -> StabilityReport {
    let rho = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    StabilityReport {
        locally_stable: spectrum.iter().all(|z| z.norm() < 1.0),
        stable_with_damping: spectrum.iter().all(|z| z.re < 1.0),
        local_min_certified: !spectrum.iter().any(in_real_ray),
        marginal: spectrum.iter().any(|z| (z.norm() - 1.0).abs() < MARGINAL_BAND),
        rho,
        spectrum,
        fixed_point_residual,
    }
}

pub fn stability_classify(model: &ModelSpec, msgs: &MessageSet) -> Result<StabilityReport> {
    let lin = lbp::linearization(model, msgs)?;
    Ok(stability_from_spectrum(lin.matrix.spectrum()?, lin.fixed_point_residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub damping: f64,
    /// damping of the retry when the first attempt does not converge
    pub fallback_damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            damping: 0.25,
            fallback_damping: 0.5,
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub rho_tprime: f64,
    pub min_eig_restricted_hessian: f64,
    pub stable: bool,
    pub iterations: usize,
    /// first grid point with `ρ(T′) ≥ 1`
    pub instability_onset: bool,
    /// first grid point with `min eig ∇²F̂ ≤ 0`
    pub hessian_onset: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub fixed_points: Vec<MessageSet>,
    /// `(t_prev, t]` of the first instability
    pub onset_interval: Option<(f64, f64)>,
    pub hessian_interval: Option<(f64, f64)>,
    pub truncated: Option<String>,
}

/// Continuation: each `t` starts damped LBP from the previous fixed point.
pub fn trajectory<F>(family: F, t_grid: &[f64], opts: &TrajectoryOptions) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<ModelSpec>,
{
    let mut out = Trajectory {
        rows: Vec::new(),
        fixed_points: Vec::new(),
        onset_interval: None,
        hessian_interval: None,
        truncated: None,
    };
    let mut msgs: Option<MessageSet> = None;
    let mut prev_t = f64::NAN;
    for &t in t_grid {
        let model = family(t)?;
        let init = match &msgs {
            Some(m) => m.clone(),
            None => lbp::init_messages(&model, lbp::InitMode::Zeros)?,
        };
        let attempt = |damping: f64| {
            lbp::run(
                &model,
                init.clone(),
                &LbpConfig {
                    schedule: Schedule::Parallel,
                    damping,
                    tol: opts.tol,
                    max_iters: opts.max_iters,
                },
            )
        };
        let mut run = attempt(opts.damping);
        if !matches!(&run, Ok(r) if r.converged) {
            run = attempt(opts.fallback_damping);
        }
        let run = match run {
            Ok(r) if r.converged => r,
            Ok(_) => {
                out.truncated = Some(format!("LBP lost the fixed point at t = {t}"));
                break;
            }
            Err(e) => {
                out.truncated = Some(format!("LBP failed at t = {t}: {e}"));
                break;
            }
        };
        let stability = stability_classify(&model, &run.messages)?;
        let (ft, vt) = lbp::belief_naturals(&model, &run.messages);
        let h = restricted_hessian_natural(&model, &ft, &vt)?;
        let rho = stability.rho;
        let min_eig = h.min_eigenvalue();
        let instability_onset = out.onset_interval.is_none() && rho >= 1.0;
        let hessian_onset = out.hessian_interval.is_none() && min_eig <= 0.0;
        if instability_onset {
            out.onset_interval = Some((prev_t, t));
        }
        if hessian_onset {
            out.hessian_interval = Some((prev_t, t));
        }
        out.rows.push(TrajectoryRow {
            t,
            rho_tprime: rho,
            min_eig_restricted_hessian: min_eig,
            stable: stability.locally_stable,
            iterations: run.iterations,
            instability_onset,
            hessian_onset,
        });
        out.fixed_points.push(run.messages.clone());
        msgs = Some(run.messages);
        prev_t = t;
    }
    Ok(out)
}

/// `0, step, 2·step, …` up to `tmax` (inclusive within rounding).
pub fn t_grid(tmax: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| tmax * k as f64 / steps as f64).collect()
}
