//! Command implementations behind the `bethe-zeta` binary. Each returns its document
//! (JSON report or CSV table) as a string so it can be tested without a process.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bethe;
use crate::diagnostics::{self, t_grid, TrajectoryOptions, WeightOptions};
use crate::error::{Error, Result};
use crate::experiments::{self, linspace, polish, ProtocolConfig};
use crate::io::{csv_string, fmt_f64, named_factor_vector, named_vertex_vector, LoadedModel};
use crate::lbp::{self, InitMode, LbpConfig, MessageSet, Schedule};
use crate::linalg::{max_abs_matrix, relative_diff, spectrum};
use crate::model::ModelSpec;
use crate::zeta::{self, EdgeWeights};

/// Exit status of a completed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
    NumericalFailure,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::VerificationFailed => 1,
            Outcome::NumericalFailure => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Output {
    pub document: String,
    pub outcome: Outcome,
    /// diagnostics for standard error
    pub notes: Vec<String>,
}

impl Output {
    fn ok(document: String) -> Self {
        Output {
            document,
            outcome: Outcome::Success,
            notes: Vec::new(),
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: LbpConfig,
    pub init: InitMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            config: LbpConfig::default(),
            init: InitMode::Zeros,
        }
    }
}

pub fn cmd_run(loaded: &LoadedModel, opts: &RunOptions) -> Result<Output> {
    let model = &loaded.model;
    let g = model.graph();
    let init = lbp::init_messages(model, opts.init)?;
    let run = lbp::run(model, init, &opts.config)?;
    let beliefs = lbp::beliefs(model, &run.messages)?;
    let fixed_point_residual = lbp::fixed_point_residual(model, &run.messages)?;
    let point = beliefs.point(model);
    let stationarity = bethe::stationarity_residual(model, &point).ok();
    let stability = if run.converged {
        let s = diagnostics::stability_classify(model, &run.messages)?;
        json!({
            "rho": s.rho,
            "locally_stable": s.locally_stable,
            "stable_with_damping": s.stable_with_damping,
            "local_min_certified": s.local_min_certified,
            "marginal": s.marginal,
        })
    } else {
        Value::Null
    };
    let vertices: Vec<Value> = (0..g.num_vertices())
        .map(|i| json!({"id": g.label(i), "eta": named_vertex_vector(model, i, &beliefs.vertex[i])}))
        .collect();
    let factors: Vec<Value> = (0..g.num_factors())
        .map(|a| json!({"id": loaded.factor_ids[a], "eta": named_factor_vector(model, a, &beliefs.factor[a])}))
        .collect();
    let doc = json!({
        "converged": run.converged,
        "iterations": run.iterations,
        "fixed_point_residual": fixed_point_residual,
        "stationarity_residual": stationarity,
        "stability": stability,
        "beliefs": {"vertices": vertices, "factors": factors},
    });
    Ok(Output::ok(pretty(&doc)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyKind {
    BetheZeta,
    IharaBass,
    Linearization,
    Stationarity,
}

impl VerifyKind {
    pub fn tolerance(self) -> f64 {
        match self {
            VerifyKind::BetheZeta => 1e-8,
            VerifyKind::IharaBass => 1e-9,
            VerifyKind::Linearization => 1e-5,
            VerifyKind::Stationarity => 1e-6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VerifyKind::BetheZeta => "bethe-zeta",
            VerifyKind::IharaBass => "ihara-bass",
            VerifyKind::Linearization => "linearization",
            VerifyKind::Stationarity => "stationarity",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub check: &'static str,
    pub tolerance: f64,
    pub samples: usize,
    pub max_residual: f64,
    pub passed: bool,
    pub residuals: Vec<f64>,
}

/// Fixed point from messages `init`: plain iteration, then damped, then Newton.
pub fn find_fixed_point(model: &ModelSpec, init: MessageSet) -> Result<MessageSet> {
    let cfg = LbpConfig {
        schedule: Schedule::Parallel,
        damping: 0.0,
        tol: 1e-12,
        max_iters: 5000,
    };
    let mut start = init.clone();
    if let Ok(r) = lbp::run(model, init.clone(), &cfg) {
        if r.converged {
            return Ok(r.messages);
        }
        start = r.messages;
    }
    polish(model, start)
        .or_else(|| polish(model, init))
        .ok_or_else(|| Error::OutsideDomain("no fixed point reached from this start".into()))
}

fn random_weights(model: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<EdgeWeights> {
    let g = model.graph();
    let dims: Vec<usize> = (0..g.num_vertices()).map(|i| model.family().r(i)).collect();
    EdgeWeights::from_fn(g, &dims, |a, x, y| {
        let (rx, ry) = (dims[g.factor(a)[x]], dims[g.factor(a)[y]]);
        DMatrix::from_fn(ry, rx, |_, _| rng.random_range(-0.4..0.4))
    })
}

fn sample_start(model: &ModelSpec, seed: u64) -> Result<MessageSet> {
    lbp::init_messages(model, InitMode::Random { seed, scale: 0.5 }).or_else(|_| lbp::init_messages(model, InitMode::Zeros))
}

pub fn verify_residuals(model: &ModelSpec, which: VerifyKind, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let r = match which {
            VerifyKind::BetheZeta => {
                let p = bethe::random_point(model, &mut rng)?;
                bethe::bethe_zeta(model, &p)?.residual
            }
            VerifyKind::IharaBass => {
                let w = random_weights(model, &mut rng)?;
                let direct = zeta::zeta_inverse(model.graph(), &w)?;
                let ib = zeta::ihara_bass_factorization(model.graph(), &w)?;
                let mut r = relative_diff(direct, ib.product);
                if model.graph().is_pairwise() {
                    r = r.max(relative_diff(direct, zeta::ihara_bass_graph(model.graph(), &w)?));
                }
                r
            }
            VerifyKind::Linearization => {
                let msgs = find_fixed_point(model, sample_start(model, seed.wrapping_add(k as u64))?)?;
                let lin = lbp::linearization(model, &msgs)?;
                let fd = lbp::finite_difference_jacobian(model, &msgs, 1e-6)?;
                max_abs_matrix(&(lin.matrix.into_matrix() - fd))
            }
            VerifyKind::Stationarity => {
                let msgs = find_fixed_point(model, sample_start(model, seed.wrapping_add(k as u64))?)?;
                let point = lbp::beliefs(model, &msgs)?.point(model);
                let grad = bethe::stationarity_residual(model, &point)?;
                let back = lbp::messages_from_point(model, &point)?;
                grad.max(back.distance(&msgs))
            }
        };
        out.push(r);
    }
    Ok(out)
}

pub fn cmd_verify(loaded: &LoadedModel, which: VerifyKind, samples: usize, seed: u64) -> Result<Output> {
    let residuals = verify_residuals(&loaded.model, which, samples, seed)?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let passed = residuals.iter().all(|r| *r < which.tolerance());
    let report = VerifyReport {
        check: which.name(),
        tolerance: which.tolerance(),
        samples,
        max_residual,
        passed,
        residuals,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    Ok(Output {
        document: s,
        outcome: if passed { Outcome::Success } else { Outcome::VerificationFailed },
        notes: vec![format!("{}: max residual {max_residual:e} (tolerance {:e})", which.name(), which.tolerance())],
    })
}

pub fn cmd_zeta(loaded: &LoadedModel, u: f64, max_cycle_len: usize) -> Result<Output> {
    let g = loaded.model.graph();
    let w = EdgeWeights::uniform(g, u);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in g.prime_cycles(max_cycle_len) {
        *counts.entry(c.len().to_string()).or_insert(0) += 1;
    }
    let m = zeta::unweighted_matrix(g);
    let eig = spectrum(&m)?;
    let kappa = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut poles: Vec<_> = eig.iter().filter(|z| z.norm() > 1e-12).map(|z| z.inv()).collect();
    poles.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    let poles: Vec<Value> = poles.iter().map(|z| json!([z.re, z.im])).collect();
    let (zeta_det, pole_at_u) = match zeta::zeta_determinant(g, &w) {
        Ok(z) => (Some(z), false),
        Err(Error::Pole(_)) => (None, true),
        Err(e) => return Err(e),
    };
    let ib = zeta::ihara_bass_factorization(g, &w)?;
    let euler = zeta::zeta_euler_truncated(g, &w, max_cycle_len)?;
    let tail = zeta::euler_tail_bound(g, &w, max_cycle_len);
    let (pf_min, pf_max) = g.pf_bounds();
    let hashimoto = match zeta::hashimoto_limit(g) {
        Ok(h) => json!({
            "u": h.u,
            "numeric": h.numeric,
            "predicted": h.predicted,
            "graph_numeric": h.graph.map(|x| x.0),
            "graph_predicted": h.graph.map(|x| x.1),
        }),
        Err(e) => json!({"skipped": e.to_string()}),
    };
    let doc = json!({
        "u": u,
        "vertices": g.num_vertices(),
        "factors": g.num_factors(),
        "directed_edges": g.num_edges(),
        "nullity": g.nullity(),
        "euler_number": g.euler_number(),
        "prime_cycles_by_length": counts,
        "max_cycle_len": max_cycle_len,
        "pole_at_u": pole_at_u,
        "zeta_determinant": zeta_det,
        "zeta_ihara_bass": if pole_at_u { None } else { Some(1.0 / ib.product) },
        "zeta_euler_truncated": euler,
        "euler_relative_tail_bound": tail,
        "kappa": kappa,
        "pf_bounds": [pf_min, pf_max],
        "poles": poles,
        "hashimoto": hashimoto,
    });
    Ok(Output::ok(pretty(&doc)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps < 2 {
            return Err(Error::Invalid("a sweep needs at least 2 steps".into()));
        }
        Ok(linspace(self.min, self.max, self.steps))
    }
}

pub const GRID_HEADER: [&str; 7] = ["K", "J", "converged", "rho_W", "rho_N", "certified_W", "certified_N"];

pub fn cmd_grid(k: SweepRange, j: SweepRange, protocol: &ProtocolConfig, opts: &WeightOptions) -> Result<Output> {
    let rows = experiments::grid_sweep(&k.values()?, &j.values()?, protocol, opts)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.k),
                fmt_f64(r.j),
                r.converged.to_string(),
                fmt_f64(r.rho_w),
                fmt_f64(r.rho_n),
                r.certified_w.to_string(),
                r.certified_n.to_string(),
            ]
        })
        .collect();
    Ok(Output::ok(csv_string(&GRID_HEADER, &table)?))
}

pub const WN_HEADER: [&str; 4] = ["K", "W", "N", "optimizer_ok"];

pub fn cmd_wn(k: SweepRange, opts: &WeightOptions) -> Result<Output> {
    let rows = experiments::wn_sweep(&k.values()?, opts)?;
    let mut notes = Vec::new();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            if !r.optimizer_ok {
                notes.push(format!("K = {}: no start met the optimizer tolerance", r.k));
            }
            vec![fmt_f64(r.k), fmt_f64(r.w), fmt_f64(r.n), r.optimizer_ok.to_string()]
        })
        .collect();
    Ok(Output {
        document: csv_string(&WN_HEADER, &table)?,
        outcome: Outcome::Success,
        notes,
    })
}

pub const TRAJECTORY_HEADER: [&str; 6] = [
    "t",
    "rho_Tprime",
    "min_eig_restricted_hessian",
    "stable",
    "instability_onset",
    "hessian_onset",
];

pub fn cmd_trajectory(template: &LoadedModel, tmax: f64, steps: usize, damping: f64) -> Result<Output> {
    if steps < 1 || !(tmax > 0.0) {
        return Err(Error::Invalid("trajectory needs tmax > 0 and at least one step".into()));
    }
    let opts = TrajectoryOptions {
        damping,
        ..TrajectoryOptions::default()
    };
    let tr = experiments::template_trajectory(&template.model, &t_grid(tmax, steps), &opts)?;
    let table: Vec<Vec<String>> = tr
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.rho_tprime),
                fmt_f64(r.min_eig_restricted_hessian),
                r.stable.to_string(),
                r.instability_onset.to_string(),
                r.hessian_onset.to_string(),
            ]
        })
        .collect();
    let mut notes = Vec::new();
    match tr.onset_interval {
        Some((a, b)) => notes.push(format!("instability onset in ({a}, {b}]")),
        None => notes.push("no instability onset on this grid".into()),
    }
    match tr.hessian_interval {
        Some((a, b)) => notes.push(format!("restricted Hessian sign change in ({a}, {b}]")),
        None => notes.push("no restricted Hessian sign change on this grid".into()),
    }
    let outcome = if let Some(why) = &tr.truncated {
        notes.push(format!("trajectory truncated: {why}"));
        Outcome::NumericalFailure
    } else {
        Outcome::Success
    };
    Ok(Output {
        document: csv_string(&TRAJECTORY_HEADER, &table)?,
        outcome,
        notes,
    })
}
