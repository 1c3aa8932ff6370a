//! Exponential families for vertices and factors.
//!
//! Every factor statistic vector is laid out as `φ_α = (φ̇_α, φ_{i_1}, …, φ_{i_d})`:
//! the pure-factor part first, then one block per member in member order.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FactorGraph;
use crate::linalg::{inv_sqrt_psd, log_abs_det, sym_eigenvalues};

/// Smallest admissible probability / eigenvalue when checking domain membership.
pub const DOMAIN_SLACK: f64 = 1e-12;
/// Largest joint alphabet of a single discrete factor.
pub const MAX_FACTOR_STATES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VertexKind {
    /// Binary variable in the ±1 encoding, statistic `x`.
    Spin,
    /// `states`-valued variable with indicator statistics `1{x = k}`, `k < states - 1`.
    Multinomial { states: usize },
    /// Real variable with statistics `(x, x²)`.
    Gaussian,
    /// Real variable with the single statistic `(x − mean)²`.
    GaussianFixedMean { mean: f64 },
}

impl VertexKind {
    pub fn dim(&self) -> usize {
        match self {
            VertexKind::Spin => 1,
            VertexKind::Multinomial { states } => states - 1,
            VertexKind::Gaussian => 2,
            VertexKind::GaussianFixedMean { .. } => 1,
        }
    }

    pub fn states(&self) -> Option<usize> {
        match self {
            VertexKind::Spin => Some(2),
            VertexKind::Multinomial { states } => Some(*states),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.states().is_some()
    }

    /// Spin state 0 is `x = +1`, state 1 is `x = −1`.
    pub fn spin_value(state: usize) -> f64 {
        if state == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn discrete_stats(&self, state: usize) -> Vec<f64> {
        match self {
            VertexKind::Spin => vec![Self::spin_value(state)],
            VertexKind::Multinomial { states } => (0..states - 1).map(|k| f64::from(u8::from(k == state))).collect(),
            _ => unreachable!("continuous vertex"),
        }
    }

    pub fn coordinate_names(&self, label: &str) -> Vec<String> {
        match self {
            VertexKind::Spin => vec![format!("x{label}")],
            VertexKind::Multinomial { states } => (0..states - 1).map(|k| format!("x{label}={k}")).collect(),
            VertexKind::Gaussian => vec![format!("x{label}"), format!("x{label}^2")],
            VertexKind::GaussianFixedMean { .. } => vec![format!("x{label}^2")],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            VertexKind::Multinomial { states } if *states < 2 => {
                Err(Error::Invalid(format!("multinomial vertex needs at least 2 states, got {states}")))
            }
            VertexKind::GaussianFixedMean { mean } if !mean.is_finite() => Err(Error::Invalid("non-finite mean".into())),
            _ => Ok(()),
        }
    }
}

/// Saturated exponential family on a finite product alphabet.
#[derive(Debug, Clone)]
pub struct DiscreteFamily {
    kinds: Vec<VertexKind>,
    radices: Vec<usize>,
    pure_terms: Vec<Vec<(usize, usize)>>,
    vertex_offsets: Vec<usize>,
    dim: usize,
    phi: DMatrix<f64>,
    design_inv: DMatrix<f64>,
}

impl DiscreteFamily {
    pub fn new(kinds: &[VertexKind]) -> Result<Self> {
        for k in kinds {
            k.validate()?;
            if !k.is_discrete() {
                return Err(Error::Unsupported("discrete factor with a continuous member".into()));
            }
        }
        let radices: Vec<usize> = kinds.iter().map(|k| k.states().unwrap()).collect();
        let total = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r)).unwrap_or(usize::MAX);
        if total > MAX_FACTOR_STATES {
            return Err(Error::TooLarge(total));
        }
        let d = kinds.len();
        let mut pure_terms: Vec<Vec<(usize, usize)>> = Vec::new();
        for size in 2..=d {
            for subset in subsets_of_size(d, size) {
                let mut coords = vec![0usize; size];
                loop {
                    pure_terms.push(subset.iter().copied().zip(coords.iter().copied()).collect());
                    let mut k = size;
                    let mut carried = true;
                    while carried && k > 0 {
                        k -= 1;
                        coords[k] += 1;
                        if coords[k] < kinds[subset[k]].dim() {
                            carried = false;
                        } else {
                            coords[k] = 0;
                        }
                    }
                    if carried {
                        break;
                    }
                }
            }
        }
        let mut vertex_offsets = Vec::with_capacity(d + 1);
        let mut off = pure_terms.len();
        for k in kinds {
            vertex_offsets.push(off);
            off += k.dim();
        }
        vertex_offsets.push(off);
        let dim = off;
        let mut phi = DMatrix::zeros(total, dim);
        let mut digits = vec![0usize; d];
        for s in 0..total {
            decode(s, &radices, &mut digits);
            let stats: Vec<Vec<f64>> = (0..d).map(|m| kinds[m].discrete_stats(digits[m])).collect();
            for (c, term) in pure_terms.iter().enumerate() {
                phi[(s, c)] = term.iter().map(|&(m, k)| stats[m][k]).product();
            }
            for m in 0..d {
                for (k, v) in stats[m].iter().enumerate() {
                    phi[(s, vertex_offsets[m] + k)] = *v;
                }
            }
        }
        let mut design = DMatrix::from_element(total, dim + 1, 1.0);
        design.view_mut((0, 1), (total, dim)).copy_from(&phi);
        let design_inv = design
            .try_inverse()
            .ok_or_else(|| Error::Singular("discrete design matrix".into()))?;
        Ok(DiscreteFamily {
            kinds: kinds.to_vec(),
            radices,
            pure_terms,
            vertex_offsets,
            dim,
            phi,
            design_inv,
        })
    }

    pub fn kinds(&self) -> &[VertexKind] {
        &self.kinds
    }

    pub fn num_states(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pure_dim(&self) -> usize {
        self.pure_terms.len()
    }

    pub fn vertex_range(&self, slot: usize) -> Range<usize> {
        self.vertex_offsets[slot]..self.vertex_offsets[slot + 1]
    }

    /// Pure statistics as products of `(member, coordinate)` pairs.
    pub fn pure_terms(&self) -> &[Vec<(usize, usize)>] {
        &self.pure_terms
    }

    /// Statistic table: row = joint state, column = statistic.
    pub fn stats(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Member states of joint state `s` (first member most significant).
    pub fn state_digits(&self, s: usize) -> Vec<usize> {
        let mut digits = vec![0; self.radices.len()];
        decode(s, &self.radices, &mut digits);
        digits
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Probabilities of all joint states and the log partition function.
    pub fn probs(&self, theta: &DVector<f64>) -> (DVector<f64>, f64) {
        let logits = &self.phi * theta;
        let max = logits.max();
        let mut p = logits.map(|l| (l - max).exp());
        let z: f64 = p.sum();
        p /= z;
        (p, max + z.ln())
    }

    pub fn log_partition(&self, theta: &DVector<f64>) -> f64 {
        self.probs(theta).1
    }

    pub fn mean_from_probs(&self, p: &DVector<f64>) -> DVector<f64> {
        self.phi.tr_mul(p)
    }

    pub fn covariance_from_probs(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mean = self.mean_from_probs(p);
        let mut weighted = self.phi.clone();
        for (s, mut row) in weighted.row_iter_mut().enumerate() {
            row *= p[s];
        }
        self.phi.tr_mul(&weighted) - &mean * mean.transpose()
    }

    /// Joint-state probabilities implied by an expectation vector.
    pub fn probs_from_eta(&self, eta: &DVector<f64>) -> Result<DVector<f64>> {
        let mut rhs = DVector::zeros(self.dim + 1);
        rhs[0] = 1.0;
        rhs.rows_mut(1, self.dim).copy_from(eta);
        let p = self.design_inv.tr_mul(&rhs);
        let lo = p.min();
        if !(lo >= DOMAIN_SLACK) {
            return Err(Error::OutsideDomain(format!(
                "expectation parameter implies probability {lo:e}"
            )));
        }
        Ok(p)
    }

    pub fn natural_from_probs(&self, p: &DVector<f64>) -> DVector<f64> {
        let logp = p.map(f64::ln);
        let coef = &self.design_inv * logp;
        coef.rows(1, self.dim).into_owned()
    }

    /// Re-expresses the log-density `⟨θ, φ⟩` in the statistics of `target`
    /// (same alphabets, possibly another encoding). Returns the new natural
    /// parameter and the constant offset that the change of basis produces.
    pub fn reencode(&self, theta: &DVector<f64>, target: &DiscreteFamily) -> Result<(DVector<f64>, f64)> {
        if self.radices != target.radices {
            return Err(Error::Shape("re-encoding needs identical alphabets".into()));
        }
        let log_table = &self.phi * theta;
        let coef = &target.design_inv * log_table;
        Ok((coef.rows(1, target.dim).into_owned(), coef[0]))
    }

    /// Exponent of 4 relating `det Var[φ]` in this encoding to the product of joint-state
    /// probabilities: every spin coordinate contributes a factor −2 to the basis change.
    pub fn spin_scale_exponent(&self) -> usize {
        let spin = |m: usize| usize::from(self.kinds[m] == VertexKind::Spin);
        let pure: usize = self.pure_terms.iter().map(|t| t.iter().map(|&(m, _)| spin(m)).sum::<usize>()).sum();
        let vert: usize = (0..self.kinds.len()).map(spin).sum();
        pure + vert
    }
}

fn decode(mut s: usize, radices: &[usize], digits: &mut [usize]) {
    for k in (0..radices.len()).rev() {
        digits[k] = s % radices[k];
        s /= radices[k];
    }
}

fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..n {
            cur.push(k);
            rec(k + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

/// Gaussian family on `n` real variables with all pairwise products as pure statistics.
#[derive(Debug, Clone)]
pub struct GaussianFamily {
    n: usize,
    fixed: bool,
    pairs: Vec<(usize, usize)>,
    dim: usize,
}

/// Statistic `xᵀ A x + bᵀ x` in centred coordinates.
struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl GaussianFamily {
    pub fn new(kinds: &[VertexKind]) -> Result<Self> {
        let n = kinds.len();
        let fixed = matches!(kinds.first(), Some(VertexKind::GaussianFixedMean { .. }));
        for k in kinds {
            k.validate()?;
            let same = match k {
                VertexKind::Gaussian => !fixed,
                VertexKind::GaussianFixedMean { .. } => fixed,
                _ => false,
            };
            if !same {
                return Err(Error::Unsupported(
                    "a Gaussian factor needs members of one Gaussian kind".into(),
                ));
            }
        }
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                pairs.push((a, b));
            }
        }
        let dim = pairs.len() + n * if fixed { 1 } else { 2 };
        Ok(GaussianFamily { n, fixed, pairs, dim })
    }

    pub fn members(&self) -> usize {
        self.n
    }

    pub fn fixed_mean(&self) -> bool {
        self.fixed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pure_dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn vertex_range(&self, slot: usize) -> Range<usize> {
        let r = if self.fixed { 1 } else { 2 };
        let start = self.pairs.len() + slot * r;
        start..start + r
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Precision matrix and linear coefficient of `exp⟨θ, φ(x)⟩`.
    pub fn precision(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut p = DMatrix::zeros(self.n, self.n);
        let mut h = DVector::zeros(self.n);
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            p[(a, b)] = -theta[k];
            p[(b, a)] = -theta[k];
        }
        for a in 0..self.n {
            let r = self.vertex_range(a);
            if self.fixed {
                p[(a, a)] = -2.0 * theta[r.start];
            } else {
                h[a] = theta[r.start];
                p[(a, a)] = -2.0 * theta[r.start + 1];
            }
        }
        (p, h)
    }

    fn check_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
        let lo = sym_eigenvalues(m).first().copied().unwrap_or(1.0);
        if lo > DOMAIN_SLACK {
            Ok(())
        } else {
            Err(Error::OutsideDomain(format!("{what} not positive definite (min eigenvalue {lo:e})")))
        }
    }

    /// Mean (centred for fixed-mean members) and covariance of the member density.
    pub fn moments_theta(&self, theta: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (p, h) = self.precision(theta);
        Self::check_pd(&p, "precision")?;
        let sigma = p.cholesky().expect("checked positive definite").inverse();
        let m = &sigma * h;
        Ok((m, sigma))
    }

    pub fn moments_eta(&self, eta: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut m = DVector::zeros(self.n);
        let mut sigma = DMatrix::zeros(self.n, self.n);
        for a in 0..self.n {
            let r = self.vertex_range(a);
            if self.fixed {
                sigma[(a, a)] = eta[r.start];
            } else {
                m[a] = eta[r.start];
                sigma[(a, a)] = eta[r.start + 1] - m[a] * m[a];
            }
        }
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            let c = eta[k] - m[a] * m[b];
            sigma[(a, b)] = c;
            sigma[(b, a)] = c;
        }
        Self::check_pd(&sigma, "covariance")?;
        Ok((m, sigma))
    }

    pub fn eta_from_moments(&self, m: &DVector<f64>, sigma: &DMatrix<f64>) -> DVector<f64> {
        let mut eta = DVector::zeros(self.dim);
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            eta[k] = sigma[(a, b)] + m[a] * m[b];
        }
        for a in 0..self.n {
            let r = self.vertex_range(a);
            if self.fixed {
                eta[r.start] = sigma[(a, a)];
            } else {
                eta[r.start] = m[a];
                eta[r.start + 1] = sigma[(a, a)] + m[a] * m[a];
            }
        }
        eta
    }

    pub fn theta_from_moments(&self, m: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::OutsideDomain("covariance not positive definite".into()))?
            .inverse();
        let h = &p * m;
        let mut theta = DVector::zeros(self.dim);
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            theta[k] = -p[(a, b)];
        }
        for a in 0..self.n {
            let r = self.vertex_range(a);
            if self.fixed {
                theta[r.start] = -0.5 * p[(a, a)];
            } else {
                theta[r.start] = h[a];
                theta[r.start + 1] = -0.5 * p[(a, a)];
            }
        }
        Ok(theta)
    }

    fn quadratics(&self) -> Vec<Quadratic> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.dim);
        for &(a, b) in &self.pairs {
            let mut q = DMatrix::zeros(n, n);
            q[(a, b)] = 0.5;
            q[(b, a)] = 0.5;
            out.push(Quadratic { a: q, b: DVector::zeros(n) });
        }
        for a in 0..n {
            if !self.fixed {
                let mut b = DVector::zeros(n);
                b[a] = 1.0;
                out.push(Quadratic { a: DMatrix::zeros(n, n), b });
            }
            let mut q = DMatrix::zeros(n, n);
            q[(a, a)] = 1.0;
            out.push(Quadratic { a: q, b: DVector::zeros(n) });
        }
        out
    }

    /// `Cov[q_k, q_l] = 2 tr(A_k Σ A_l Σ) + b̃_kᵀ Σ b̃_l` with `b̃ = b + 2 A m`.
    pub fn covariance_from_moments(&self, m: &DVector<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        let qs = self.quadratics();
        let shifted: Vec<DVector<f64>> = qs.iter().map(|q| &q.b + 2.0 * &q.a * m).collect();
        let a_sigma: Vec<DMatrix<f64>> = qs.iter().map(|q| &q.a * sigma).collect();
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            for l in k..self.dim {
                let tr = (&a_sigma[k] * &a_sigma[l]).trace();
                let lin = shifted[k].dot(&(sigma * &shifted[l]));
                let v = 2.0 * tr + lin;
                cov[(k, l)] = v;
                cov[(l, k)] = v;
            }
        }
        cov
    }
}

/// A vertex or factor family.
#[derive(Debug, Clone)]
pub enum ExpFamily {
    Discrete(DiscreteFamily),
    Gaussian(GaussianFamily),
}

impl ExpFamily {
    pub fn new(kinds: &[VertexKind]) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Invalid("family without members".into()));
        }
        if kinds.iter().all(VertexKind::is_discrete) {
            Ok(ExpFamily::Discrete(DiscreteFamily::new(kinds)?))
        } else if kinds.iter().any(VertexKind::is_discrete) {
            Err(Error::Unsupported("factor mixes discrete and continuous members".into()))
        } else {
            if kinds.len() > 2 {
                return Err(Error::Unsupported(
                    "Gaussian families are supported on ordinary graphs only".into(),
                ));
            }
            Ok(ExpFamily::Gaussian(GaussianFamily::new(kinds)?))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ExpFamily::Discrete(f) => f.dim(),
            ExpFamily::Gaussian(f) => f.dim(),
        }
    }

    pub fn pure_dim(&self) -> usize {
        match self {
            ExpFamily::Discrete(f) => f.pure_dim(),
            ExpFamily::Gaussian(f) => f.pure_dim(),
        }
    }

    pub fn vertex_range(&self, slot: usize) -> Range<usize> {
        match self {
            ExpFamily::Discrete(f) => f.vertex_range(slot),
            ExpFamily::Gaussian(f) => f.vertex_range(slot),
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteFamily> {
        match self {
            ExpFamily::Discrete(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianFamily> {
        match self {
            ExpFamily::Gaussian(f) => Some(f),
            _ => None,
        }
    }

    pub fn in_theta_domain(&self, theta: &DVector<f64>) -> bool {
        match self {
            ExpFamily::Discrete(_) => theta.iter().all(|x| x.is_finite()),
            ExpFamily::Gaussian(f) => f.moments_theta(theta).is_ok(),
        }
    }

    pub fn in_eta_domain(&self, eta: &DVector<f64>) -> bool {
        match self {
            ExpFamily::Discrete(f) => f.probs_from_eta(eta).is_ok(),
            ExpFamily::Gaussian(f) => f.moments_eta(eta).is_ok(),
        }
    }

    /// `ψ(θ)`.
    pub fn log_partition(&self, theta: &DVector<f64>) -> Result<f64> {
        match self {
            ExpFamily::Discrete(f) => Ok(f.log_partition(theta)),
            ExpFamily::Gaussian(f) => {
                let (m, sigma) = f.moments_theta(theta)?;
                let (_, h) = f.precision(theta);
                let (_, logdet) = log_abs_det(&sigma);
                let n = f.members() as f64;
                Ok(0.5 * h.dot(&m) + 0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * logdet)
            }
        }
    }

    /// `Λ(θ) = ∂ψ/∂θ`.
    pub fn to_expectation(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            ExpFamily::Discrete(f) => Ok(f.mean_from_probs(&f.probs(theta).0)),
            ExpFamily::Gaussian(f) => {
                let (m, s) = f.moments_theta(theta)?;
                Ok(f.eta_from_moments(&m, &s))
            }
        }
    }

    /// `Λ^{-1}(η)`.
    pub fn to_natural(&self, eta: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            ExpFamily::Discrete(f) => Ok(f.natural_from_probs(&f.probs_from_eta(eta)?)),
            ExpFamily::Gaussian(f) => {
                let (m, s) = f.moments_eta(eta)?;
                f.theta_from_moments(&m, &s)
            }
        }
    }

    /// Legendre transform of `ψ`, the negative entropy at `η`.
    pub fn legendre(&self, eta: &DVector<f64>) -> Result<f64> {
        match self {
            ExpFamily::Discrete(f) => {
                let p = f.probs_from_eta(eta)?;
                Ok(p.iter().map(|&x| x * x.ln()).sum())
            }
            ExpFamily::Gaussian(f) => {
                let (_, s) = f.moments_eta(eta)?;
                let (_, logdet) = log_abs_det(&s);
                let n = f.members() as f64;
                Ok(-0.5 * (n * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + logdet))
            }
        }
    }

    /// `Var[φ]` under the member with natural parameter `θ`.
    pub fn covariance_theta(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            ExpFamily::Discrete(f) => Ok(f.covariance_from_probs(&f.probs(theta).0)),
            ExpFamily::Gaussian(f) => {
                let (m, s) = f.moments_theta(theta)?;
                Ok(f.covariance_from_moments(&m, &s))
            }
        }
    }

    /// `Var[φ]` under the member with expectation parameter `η`.
    pub fn covariance_eta(&self, eta: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            ExpFamily::Discrete(f) => Ok(f.covariance_from_probs(&f.probs_from_eta(eta)?)),
            ExpFamily::Gaussian(f) => {
                let (m, s) = f.moments_eta(eta)?;
                Ok(f.covariance_from_moments(&m, &s))
            }
        }
    }

    /// Expectation of the `slot`-th member statistic under `θ_α`.
    pub fn marginalize(&self, theta: &DVector<f64>, slot: usize) -> Result<DVector<f64>> {
        let eta = self.to_expectation(theta)?;
        Ok(eta.rows_range(self.vertex_range(slot)).into_owned())
    }
}

/// `c_{a→b} = Var[φ_b]^{-1/2} Cov[φ_b, φ_a] Var[φ_a]^{-1/2}` from a full factor covariance.
pub fn correlation_block(fam: &ExpFamily, cov: &DMatrix<f64>, a: usize, b: usize) -> Result<DMatrix<f64>> {
    let ra = fam.vertex_range(a);
    let rb = fam.vertex_range(b);
    let var_a = cov.view((ra.start, ra.start), (ra.len(), ra.len())).into_owned();
    let var_b = cov.view((rb.start, rb.start), (rb.len(), rb.len())).into_owned();
    for (v, who) in [(&var_a, a), (&var_b, b)] {
        let ev = sym_eigenvalues(v);
        if ev.first().is_none_or(|&lo| lo <= 0.0 || ev.last().unwrap() / lo > crate::linalg::SINGULAR_CONDITION) {
            return Err(Error::SingularCovariance(format!("vertex variance of member {who}")));
        }
    }
    let cross = cov.view((rb.start, ra.start), (rb.len(), ra.len())).into_owned();
    Ok(inv_sqrt_psd(&var_b) * cross * inv_sqrt_psd(&var_a))
}

/// Vertex and factor families attached to a graph.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    kinds: Vec<VertexKind>,
    vertex: Vec<ExpFamily>,
    factor: Vec<ExpFamily>,
    names: Vec<Vec<String>>,
}

impl FamilySpec {
    pub fn new(graph: &FactorGraph, kinds: Vec<VertexKind>) -> Result<Self> {
        if kinds.len() != graph.num_vertices() {
            return Err(Error::Shape(format!(
                "{} vertex kinds for {} vertices",
                kinds.len(),
                graph.num_vertices()
            )));
        }
        let vertex = kinds
            .iter()
            .map(|k| ExpFamily::new(std::slice::from_ref(k)))
            .collect::<Result<Vec<_>>>()?;
        let mut factor = Vec::with_capacity(graph.num_factors());
        let mut names = Vec::with_capacity(graph.num_factors());
        for a in 0..graph.num_factors() {
            let members = graph.factor(a);
            let mk: Vec<VertexKind> = members.iter().map(|&i| kinds[i]).collect();
            let fam = ExpFamily::new(&mk)?;
            let coord: Vec<Vec<String>> = members.iter().map(|&i| kinds[i].coordinate_names(graph.label(i))).collect();
            let mut n = Vec::with_capacity(fam.dim());
            match &fam {
                ExpFamily::Discrete(f) => {
                    for term in f.pure_terms() {
                        n.push(term.iter().map(|&(m, k)| coord[m][k].clone()).collect::<Vec<_>>().join("*"));
                    }
                }
                ExpFamily::Gaussian(f) => {
                    for &(x, y) in f.pairs() {
                        n.push(format!("x{}*x{}", graph.label(members[x]), graph.label(members[y])));
                    }
                }
            }
            for c in coord {
                n.extend(c);
            }
            factor.push(fam);
            names.push(n);
        }
        Ok(FamilySpec {
            kinds,
            vertex,
            factor,
            names,
        })
    }

    pub fn kind(&self, i: usize) -> VertexKind {
        self.kinds[i]
    }

    pub fn kinds(&self) -> &[VertexKind] {
        &self.kinds
    }

    pub fn r(&self, i: usize) -> usize {
        self.kinds[i].dim()
    }

    pub fn vertex(&self, i: usize) -> &ExpFamily {
        &self.vertex[i]
    }

    pub fn factor(&self, a: usize) -> &ExpFamily {
        &self.factor[a]
    }

    /// Statistic names of factor `a`, in statistic order.
    pub fn stat_names(&self, a: usize) -> &[String] {
        &self.names[a]
    }

    pub fn is_discrete(&self) -> bool {
        self.kinds.iter().all(VertexKind::is_discrete)
    }

    pub fn is_gaussian(&self) -> bool {
        self.kinds.iter().all(|k| !k.is_discrete())
    }
}
