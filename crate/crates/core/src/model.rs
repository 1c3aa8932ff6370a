//! Graphical models: a factor graph, its families, and the compatibility parameters `θ̄_α`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{FamilySpec, VertexKind};
use crate::graph::FactorGraph;
use crate::linalg::sym_eigenvalues;

/// `p(x) ∝ Π_α exp⟨θ̄_α, φ_α(x_α)⟩`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    graph: FactorGraph,
    family: FamilySpec,
    theta: Vec<DVector<f64>>,
}

impl ModelSpec {
    pub fn new(graph: FactorGraph, kinds: Vec<VertexKind>, theta: Vec<DVector<f64>>) -> Result<Self> {
        let family = FamilySpec::new(&graph, kinds)?;
        Self::assemble(graph, family, theta)
    }

    fn assemble(graph: FactorGraph, family: FamilySpec, theta: Vec<DVector<f64>>) -> Result<Self> {
        if !family.is_discrete() && !family.is_gaussian() {
            return Err(Error::Unsupported("models must be all discrete or all Gaussian".into()));
        }
        if theta.len() != graph.num_factors() {
            return Err(Error::Shape(format!(
                "{} parameter vectors for {} factors",
                theta.len(),
                graph.num_factors()
            )));
        }
        for (a, t) in theta.iter().enumerate() {
            let want = family.factor(a).dim();
            if t.len() != want {
                return Err(Error::Shape(format!("factor {a}: {} parameters, expected {want}", t.len())));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("factor {a}: non-finite parameter")));
            }
        }
        let model = ModelSpec { graph, family, theta };
        if model.family.is_gaussian() {
            let (p, _) = model.gaussian_global();
            let lo = sym_eigenvalues(&p).first().copied().unwrap_or(1.0);
            if lo <= crate::family::DOMAIN_SLACK {
                return Err(Error::OutsideDomain(format!(
                    "global precision not positive definite (min eigenvalue {lo:e})"
                )));
            }
        }
        Ok(model)
    }

    /// All compatibility functions constant.
    pub fn zero(graph: FactorGraph, kinds: Vec<VertexKind>) -> Result<Self> {
        let family = FamilySpec::new(&graph, kinds)?;
        let theta = (0..graph.num_factors()).map(|a| DVector::zeros(family.factor(a).dim())).collect();
        if family.is_gaussian() {
            return Err(Error::OutsideDomain("constant Gaussian compatibilities are not normalizable".into()));
        }
        Self::assemble(graph, family, theta)
    }

    /// Parameters given per factor as `statistic name → value`; unlisted statistics are 0.
    pub fn from_named(graph: FactorGraph, kinds: Vec<VertexKind>, params: &[BTreeMap<String, f64>]) -> Result<Self> {
        let family = FamilySpec::new(&graph, kinds)?;
        if params.len() != graph.num_factors() {
            return Err(Error::Shape(format!(
                "{} parameter maps for {} factors",
                params.len(),
                graph.num_factors()
            )));
        }
        let mut theta = Vec::with_capacity(params.len());
        for (a, map) in params.iter().enumerate() {
            let names = family.stat_names(a);
            let mut t = DVector::zeros(names.len());
            for (key, value) in map {
                let k = names.iter().position(|n| n == key).ok_or_else(|| {
                    Error::Invalid(format!("factor {a} has no statistic `{key}` (known: {})", names.join(", ")))
                })?;
                t[k] = *value;
            }
            theta.push(t);
        }
        Self::assemble(graph, family, theta)
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn theta(&self, a: usize) -> &DVector<f64> {
        &self.theta[a]
    }

    pub fn thetas(&self) -> &[DVector<f64>] {
        &self.theta
    }

    pub fn with_thetas(&self, theta: Vec<DVector<f64>>) -> Result<Self> {
        Self::assemble(self.graph.clone(), self.family.clone(), theta)
    }

    /// Same model with every pure-factor parameter multiplied by `t`.
    pub fn scale_pure(&self, t: f64) -> Result<Self> {
        let theta = self
            .theta
            .iter()
            .enumerate()
            .map(|(a, th)| {
                let mut th = th.clone();
                let p = self.family.factor(a).pure_dim();
                th.rows_mut(0, p).scale_mut(t);
                th
            })
            .collect();
        self.with_thetas(theta)
    }

    /// Non-zero parameters of factor `a` keyed by statistic name.
    pub fn named_params(&self, a: usize) -> BTreeMap<String, f64> {
        self.family
            .stat_names(a)
            .iter()
            .zip(self.theta[a].iter())
            .filter(|(_, v)| **v != 0.0)
            .map(|(n, v)| (n.clone(), *v))
            .collect()
    }

    /// Precision and linear coefficient of the joint Gaussian (centred coordinates for
    /// fixed-mean vertices).
    pub fn gaussian_global(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.graph.num_vertices();
        let mut p = DMatrix::zeros(n, n);
        let mut h = DVector::zeros(n);
        for a in 0..self.graph.num_factors() {
            let fam = self.family.factor(a).as_gaussian().expect("Gaussian model");
            let (pa, ha) = fam.precision(&self.theta[a]);
            let members = self.graph.factor(a);
            for (x, &i) in members.iter().enumerate() {
                h[i] += ha[x];
                for (y, &j) in members.iter().enumerate() {
                    p[(i, j)] += pa[(x, y)];
                }
            }
        }
        (p, h)
    }

    /// Binary ±1 pairwise model `exp(Σ J_α x_i x_j + Σ h_i x_i)`. Each field is attached
    /// to the first factor containing its vertex.
    pub fn ising(graph: FactorGraph, couplings: &[f64], fields: &[f64]) -> Result<Self> {
        if !graph.is_pairwise() || couplings.len() != graph.num_factors() || fields.len() != graph.num_vertices() {
            return Err(Error::Shape("Ising model needs a pairwise graph, one coupling per factor, one field per vertex".into()));
        }
        let kinds = vec![VertexKind::Spin; graph.num_vertices()];
        let mut theta: Vec<DVector<f64>> = couplings.iter().map(|&j| DVector::from_row_slice(&[j, 0.0, 0.0])).collect();
        for (i, &h) in fields.iter().enumerate() {
            if let Some(&e) = graph.vertex_edges(i).first() {
                let ed = graph.edge(e);
                theta[ed.factor][1 + ed.slot] += h;
            }
        }
        Self::new(graph, kinds, theta)
    }

    /// Fixed-mean Gaussian pairwise model with precision `diag(q) − Σ_α c_α (e_i e_jᵀ + e_j e_iᵀ)`;
    /// vertex precision is split evenly across incident factors.
    pub fn fixed_mean_gaussian(graph: FactorGraph, couplings: &[f64], diag: &[f64], means: &[f64]) -> Result<Self> {
        if !graph.is_pairwise() || couplings.len() != graph.num_factors() || diag.len() != graph.num_vertices() {
            return Err(Error::Shape("fixed-mean Gaussian model needs a pairwise graph".into()));
        }
        let kinds = means.iter().map(|&mean| VertexKind::GaussianFixedMean { mean }).collect();
        let mut theta = Vec::with_capacity(couplings.len());
        for (a, &c) in couplings.iter().enumerate() {
            let f = graph.factor(a);
            let share = |i: usize| -0.5 * diag[i] / graph.vertex_degree(i) as f64;
            theta.push(DVector::from_row_slice(&[c, share(f[0]), share(f[1])]));
        }
        Self::new(graph, kinds, theta)
    }
}
