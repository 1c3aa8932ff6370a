//! Bethe free energy on the local polytope `L`, its Hessian, the Bethe–zeta identity,
//! the restricted free energy on `S(Ψ)`, and brute-force Gibbs quantities for small models.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::family::{correlation_block, ExpFamily, VertexKind};
use crate::linalg::{log_abs_det, relative_diff, spd_inverse, spectrum_distance, sym_eigenvalues, symmetrize};
use crate::model::ModelSpec;
use crate::zeta::{directed_edge_matrix, unweighted_matrix, EdgeWeights};

/// Largest joint state space handled by the brute-force routines.
pub const MAX_JOINT_STATES: usize = 1_000_000;
/// An eigenvalue `λ` of `M(u)` lies in `R_{≥1}` when `|Im λ| < BAND` and `Re λ ≥ 1 − BAND`.
pub const BAND: f64 = 1e-9;

/// Point of `L`: pure-factor expectations per factor and shared vertex expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudomarginalPoint {
    pub pure: Vec<DVector<f64>>,
    pub vertex: Vec<DVector<f64>>,
}

impl PseudomarginalPoint {
    /// `η_α = (η̇_α, (η_i)_{i∈α})`.
    pub fn factor_eta(&self, model: &ModelSpec, a: usize) -> DVector<f64> {
        let fam = model.family().factor(a);
        let mut eta = DVector::zeros(fam.dim());
        eta.rows_mut(0, fam.pure_dim()).copy_from(&self.pure[a]);
        for (slot, &i) in model.graph().factor(a).iter().enumerate() {
            let r = fam.vertex_range(slot);
            eta.rows_mut(r.start, r.len()).copy_from(&self.vertex[i]);
        }
        eta
    }

    /// Coordinates `(η̇_α by factor, then η_i by vertex)` as one vector.
    pub fn to_vector(&self) -> DVector<f64> {
        let parts: Vec<f64> = self.pure.iter().chain(self.vertex.iter()).flat_map(|v| v.iter().copied()).collect();
        DVector::from_vec(parts)
    }

    pub fn from_vector(model: &ModelSpec, v: &DVector<f64>) -> Self {
        let lay = Layout::new(model);
        let pure = (0..model.graph().num_factors())
            .map(|a| v.rows(lay.factor[a], lay.factor[a + 1] - lay.factor[a]).into_owned())
            .collect();
        let vertex = (0..model.graph().num_vertices())
            .map(|i| v.rows(lay.vertex[i], lay.vertex[i + 1] - lay.vertex[i]).into_owned())
            .collect();
        PseudomarginalPoint { pure, vertex }
    }

    pub fn in_domain(&self, model: &ModelSpec) -> bool {
        let fam = model.family();
        (0..self.vertex.len()).all(|i| fam.vertex(i).in_eta_domain(&self.vertex[i]))
            && (0..self.pure.len()).all(|a| fam.factor(a).in_eta_domain(&self.factor_eta(model, a)))
    }
}

/// Offsets of the Hessian coordinate blocks.
#[derive(Debug, Clone)]
pub struct Layout {
    pub factor: Vec<usize>,
    pub vertex: Vec<usize>,
}

impl Layout {
    pub fn new(model: &ModelSpec) -> Self {
        let mut factor = vec![0];
        let mut acc = 0;
        for a in 0..model.graph().num_factors() {
            acc += model.family().factor(a).pure_dim();
            factor.push(acc);
        }
        let mut vertex = vec![acc];
        for i in 0..model.graph().num_vertices() {
            acc += model.family().r(i);
            vertex.push(acc);
        }
        Layout { factor, vertex }
    }

    pub fn total(&self) -> usize {
        *self.vertex.last().unwrap()
    }

    pub fn pure_total(&self) -> usize {
        *self.factor.last().unwrap()
    }

    /// Global indices of the statistics of factor `a` (pure part, then members).
    fn factor_indices(&self, model: &ModelSpec, a: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (self.factor[a]..self.factor[a + 1]).collect();
        for &i in model.graph().factor(a) {
            idx.extend(self.vertex[i]..self.vertex[i + 1]);
        }
        idx
    }
}

/// `F(η) = −Σ_α ⟨θ̄_α, η_α⟩ + Σ_α φ_α(η_α) + Σ_i (1 − d_i) φ_i(η_i)`.
pub fn bethe_free_energy(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<f64> {
    let g = model.graph();
    let mut f = 0.0;
    for a in 0..g.num_factors() {
        let eta = point.factor_eta(model, a);
        f += model.family().factor(a).legendre(&eta)? - model.theta(a).dot(&eta);
    }
    for i in 0..g.num_vertices() {
        let d = g.vertex_degree(i) as f64;
        if d != 1.0 {
            f += (1.0 - d) * model.family().vertex(i).legendre(&point.vertex[i])?;
        }
    }
    Ok(f)
}

/// `∇F` in the Hessian coordinates.
pub fn gradient(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<DVector<f64>> {
    let g = model.graph();
    let lay = Layout::new(model);
    let mut grad = DVector::zeros(lay.total());
    for a in 0..g.num_factors() {
        let fam = model.family().factor(a);
        let theta = fam.to_natural(&point.factor_eta(model, a))?;
        let diff = theta - model.theta(a);
        for (k, gi) in lay.factor_indices(model, a).into_iter().enumerate() {
            grad[gi] += diff[k];
        }
    }
    for i in 0..g.num_vertices() {
        let d = g.vertex_degree(i) as f64;
        let th = model.family().vertex(i).to_natural(&point.vertex[i])?;
        for (k, gi) in (lay.vertex[i]..lay.vertex[i + 1]).enumerate() {
            grad[gi] += (1.0 - d) * th[k];
        }
    }
    Ok(grad)
}

/// `ℓ∞` norm of the stationarity conditions `θ̇_α = θ̄̇_α` and
/// `Σ_{α∋i}(θ^α_i − θ̄^α_i) + (1 − d_i) θ_i = 0`.
pub fn stationarity_residual(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<f64> {
    Ok(crate::linalg::max_abs(&gradient(model, point)?))
}

#[derive(Debug, Clone)]
pub struct HessianReport {
    pub matrix: DMatrix<f64>,
    /// ascending
    pub eigenvalues: Vec<f64>,
    pub positive_definite: bool,
    pub det_sign: f64,
    pub log_abs_det: f64,
    /// largest `|H_ij − H_ji|` before symmetrisation
    pub asymmetry: f64,
}

impl HessianReport {
    fn from_matrix(mut matrix: DMatrix<f64>) -> Self {
        let asymmetry = symmetrize(&mut matrix);
        let eigenvalues = sym_eigenvalues(&matrix);
        let (det_sign, log_abs_det) = log_abs_det(&matrix);
        HessianReport {
            positive_definite: eigenvalues.first().is_none_or(|&l| l > 0.0),
            eigenvalues,
            det_sign,
            log_abs_det,
            matrix,
            asymmetry,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.det_sign * self.log_abs_det.exp()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::INFINITY)
    }
}

/// Analytic `∇²F`: every factor contributes `Var_{b_α}[φ_α]^{-1}`, every vertex
/// `(1 − d_i) Var_{b_i}[φ_i]^{-1}`. Independent of `θ̄`.
pub fn hessian(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<HessianReport> {
    let g = model.graph();
    let fam = model.family();
    let fc = (0..g.num_factors())
        .map(|a| fam.factor(a).covariance_eta(&point.factor_eta(model, a)))
        .collect::<Result<Vec<_>>>()?;
    let vc = (0..g.num_vertices())
        .map(|i| fam.vertex(i).covariance_eta(&point.vertex[i]))
        .collect::<Result<Vec<_>>>()?;
    hessian_from_covariances(model, &fc, &vc)
}

/// Same Hessian from the natural parameters of the beliefs, which stays accurate when
/// some belief probabilities are tiny.
pub fn hessian_natural(model: &ModelSpec, factor_theta: &[DVector<f64>], vertex_theta: &[DVector<f64>]) -> Result<HessianReport> {
    let g = model.graph();
    let fam = model.family();
    let fc = (0..g.num_factors())
        .map(|a| fam.factor(a).covariance_theta(&factor_theta[a]))
        .collect::<Result<Vec<_>>>()?;
    let vc = (0..g.num_vertices())
        .map(|i| fam.vertex(i).covariance_theta(&vertex_theta[i]))
        .collect::<Result<Vec<_>>>()?;
    hessian_from_covariances(model, &fc, &vc)
}

fn hessian_from_covariances(model: &ModelSpec, factor_cov: &[DMatrix<f64>], vertex_cov: &[DMatrix<f64>]) -> Result<HessianReport> {
    let g = model.graph();
    let lay = Layout::new(model);
    let mut h = DMatrix::zeros(lay.total(), lay.total());
    for (a, cov) in factor_cov.iter().enumerate() {
        let inv = spd_inverse(cov, &format!("Var[phi] of factor {a}"))?;
        let idx = lay.factor_indices(model, a);
        for (x, &gx) in idx.iter().enumerate() {
            for (y, &gy) in idx.iter().enumerate() {
                h[(gx, gy)] += inv[(x, y)];
            }
        }
    }
    for (i, cov) in vertex_cov.iter().enumerate() {
        let d = g.vertex_degree(i) as f64;
        let inv = spd_inverse(cov, &format!("Var[phi] of vertex {i}"))?;
        let base = lay.vertex[i];
        for x in 0..inv.nrows() {
            for y in 0..inv.ncols() {
                h[(base + x, base + y)] += (1.0 - d) * inv[(x, y)];
            }
        }
    }
    Ok(HessianReport::from_matrix(h))
}

/// `u^α_{i→j} = Var_{b_j}[φ_j]^{-1} Cov_{b_α}[φ_j, φ_i]` at a point of `L`.
pub fn belief_weights(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<EdgeWeights> {
    weights_from_point(model, point, false)
}

/// `c^α_{i→j} = Var[φ_j]^{-1/2} Cov[φ_j, φ_i] Var[φ_i]^{-1/2}`.
pub fn correlation_weights(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<EdgeWeights> {
    weights_from_point(model, point, true)
}

fn weights_from_point(model: &ModelSpec, point: &PseudomarginalPoint, correlation: bool) -> Result<EdgeWeights> {
    let g = model.graph();
    let fam = model.family();
    let covs = (0..g.num_factors())
        .map(|a| fam.factor(a).covariance_eta(&point.factor_eta(model, a)))
        .collect::<Result<Vec<_>>>()?;
    let vinv = (0..g.num_vertices())
        .map(|i| spd_inverse(&fam.vertex(i).covariance_eta(&point.vertex[i])?, &format!("Var[phi] of vertex {i}")))
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<usize> = (0..g.num_vertices()).map(|i| fam.r(i)).collect();
    let mut err = None;
    let w = EdgeWeights::from_fn(g, &dims, |a, x, y| {
        let f = fam.factor(a);
        if correlation {
            correlation_block(f, &covs[a], x, y).unwrap_or_else(|e| {
                err = Some(e);
                DMatrix::zeros(dims[g.factor(a)[y]], dims[g.factor(a)[x]])
            })
        } else {
            let rx = f.vertex_range(x);
            let ry = f.vertex_range(y);
            let cross = covs[a].view((ry.start, rx.start), (ry.len(), rx.len()));
            &vinv[g.factor(a)[y]] * cross
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(w),
    }
}

#[derive(Debug, Clone)]
pub struct BetheZeta {
    /// `ζ(u)^{-1} = det(I − M(u))`
    pub lhs: f64,
    /// `det ∇²F · Π_α det Var_{b_α}[φ_α] · Π_i det Var_{b_i}[φ_i]^{1−d_i}`
    pub rhs: f64,
    pub residual: f64,
}

pub fn bethe_zeta(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<BetheZeta> {
    let g = model.graph();
    let fam = model.family();
    let w = belief_weights(model, point)?;
    let m = directed_edge_matrix(g, &w)?.into_matrix();
    let n = m.nrows();
    let lhs = (DMatrix::identity(n, n) - m).determinant();
    let h = hessian(model, point)?;
    let mut log = h.log_abs_det;
    for a in 0..g.num_factors() {
        let cov = fam.factor(a).covariance_eta(&point.factor_eta(model, a))?;
        log += log_abs_det(&cov).1;
    }
    for i in 0..g.num_vertices() {
        let d = g.vertex_degree(i) as f64;
        let cov = fam.vertex(i).covariance_eta(&point.vertex[i])?;
        log += (1.0 - d) * log_abs_det(&cov).1;
    }
    let rhs = h.det_sign * log.exp();
    Ok(BetheZeta {
        lhs,
        rhs,
        residual: relative_diff(lhs, rhs),
    })
}

/// Right-hand side in closed form: products of belief values for discrete models, and
/// `2^{|V|} Π η_ii^{2(1−d_i)} Π (η_ii η_jj − η_ij²)³` for pairwise fixed-mean Gaussian models.
/// `None` for free-mean Gaussian models.
pub fn bethe_zeta_closed_form(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<Option<f64>> {
    let g = model.graph();
    let fam = model.family();
    let h = hessian(model, point)?;
    let mut log = h.log_abs_det;
    if fam.is_discrete() {
        let ln4 = 4f64.ln();
        for a in 0..g.num_factors() {
            let f = fam.factor(a).as_discrete().unwrap();
            let p = f.probs_from_eta(&point.factor_eta(model, a))?;
            log += p.iter().map(|x| x.ln()).sum::<f64>() + ln4 * f.spin_scale_exponent() as f64;
        }
        for i in 0..g.num_vertices() {
            let d = g.vertex_degree(i) as f64;
            let f = fam.vertex(i).as_discrete().unwrap();
            let p = f.probs_from_eta(&point.vertex[i])?;
            log += (1.0 - d) * (p.iter().map(|x| x.ln()).sum::<f64>() + ln4 * f.spin_scale_exponent() as f64);
        }
        return Ok(Some(h.det_sign * log.exp()));
    }
    let fixed = fam.kinds().iter().all(|k| matches!(k, VertexKind::GaussianFixedMean { .. }));
    if !fixed || !g.is_pairwise() {
        return Ok(None);
    }
    for i in 0..g.num_vertices() {
        let d = g.vertex_degree(i) as f64;
        log += 2.0 * (1.0 - d) * point.vertex[i][0].ln();
    }
    for a in 0..g.num_factors() {
        let f = g.factor(a);
        let (vi, vj) = (point.vertex[f[0]][0], point.vertex[f[1]][0]);
        let c = point.pure[a][0];
        log += 3.0 * (vi * vj - c * c).ln();
    }
    log += g.num_vertices() as f64 * 2f64.ln();
    Ok(Some(h.det_sign * log.exp()))
}

/// Membership in `L_{κ^{-1}}`: every correlation norm below `1/ρ(𝓜)`.
#[derive(Debug, Clone)]
pub struct PdRegion {
    pub kappa: f64,
    pub max_correlation: f64,
    pub member: bool,
}

pub fn pd_region_member(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<PdRegion> {
    let g = model.graph();
    let kappa = crate::linalg::spectral_radius(&unweighted_matrix(g))?;
    let c = correlation_weights(model, point)?;
    let mut max_correlation: f64 = 0.0;
    for a in 0..g.num_factors() {
        let d = g.factor_degree(a);
        for x in 0..d {
            for y in 0..d {
                if x != y {
                    max_correlation = max_correlation.max(crate::linalg::operator_norm(c.get(a, x, y)));
                }
            }
        }
    }
    let member = kappa < 1e-12 || max_correlation < 1.0 / kappa;
    Ok(PdRegion {
        kappa,
        max_correlation,
        member,
    })
}

#[derive(Debug, Clone)]
pub struct PdCertificate {
    pub spectrum: Vec<Complex<f64>>,
    /// no eigenvalue of `M(u)` in the band around `[1, ∞)`
    pub certified: bool,
    /// worst mismatch between the spectra of `M(u)` and `M(c)`
    pub correlation_spectrum_gap: f64,
    pub hessian_pd: bool,
    pub hessian_min_eigenvalue: f64,
}

pub fn in_real_ray(z: &Complex<f64>) -> bool {
    z.im.abs() < BAND && z.re >= 1.0 - BAND
}

pub fn positive_definiteness_certificate(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<PdCertificate> {
    let g = model.graph();
    let mu = directed_edge_matrix(g, &belief_weights(model, point)?)?;
    let mc = directed_edge_matrix(g, &correlation_weights(model, point)?)?;
    let spectrum = mu.spectrum()?;
    let sc = mc.spectrum()?;
    let h = hessian(model, point)?;
    Ok(PdCertificate {
        certified: !spectrum.iter().any(in_real_ray),
        correlation_spectrum_gap: spectrum_distance(&spectrum, &sc),
        spectrum,
        hessian_pd: h.positive_definite,
        hessian_min_eigenvalue: h.min_eigenvalue(),
    })
}

/// Natural parameter `θ_α` whose pure part is `pure` and whose member marginals have the
/// expectations `targets` (damped Newton on the member coordinates, started from the
/// product of the target marginals).
pub fn lift_factor(
    fam: &ExpFamily,
    vertex_fams: &[&ExpFamily],
    pure: &DVector<f64>,
    targets: &[&DVector<f64>],
) -> std::result::Result<DVector<f64>, String> {
    let d = targets.len();
    let mut theta = DVector::zeros(fam.dim());
    theta.rows_mut(0, fam.pure_dim()).copy_from(pure);
    let mut target = DVector::zeros(fam.dim() - fam.pure_dim());
    let p0 = fam.pure_dim();
    for k in 0..d {
        let r = fam.vertex_range(k);
        let start = vertex_fams[k].to_natural(targets[k]).map_err(|e| e.to_string())?;
        theta.rows_mut(r.start, r.len()).copy_from(&start);
        target.rows_mut(r.start - p0, r.len()).copy_from(targets[k]);
    }
    let n = target.len();
    let objective = |th: &DVector<f64>| -> Option<f64> {
        let psi = fam.log_partition(th).ok()?;
        Some(psi - th.rows(p0, n).dot(&target))
    };
    let mut value = objective(&theta).ok_or("initial point outside the domain")?;
    for _ in 0..100 {
        let eta = fam.to_expectation(&theta).map_err(|e| e.to_string())?;
        let grad = eta.rows(p0, n) - &target;
        if crate::linalg::max_abs(&grad) < 1e-10 {
            return Ok(theta);
        }
        let cov = fam.covariance_theta(&theta).map_err(|e| e.to_string())?;
        let hv = cov.view((p0, p0), (n, n)).into_owned();
        let step = hv.lu().solve(&grad).ok_or("singular member covariance")?;
        let mut t = 1.0;
        loop {
            let mut trial = theta.clone();
            let mut tail = trial.rows_mut(p0, n);
            tail -= t * &step;
            if let Some(v) = objective(&trial) {
                if v <= value + 1e-14 * value.abs().max(1.0) {
                    theta = trial;
                    value = v;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err("line search failed".into());
            }
        }
    }
    let eta = fam.to_expectation(&theta).map_err(|e| e.to_string())?;
    if crate::linalg::max_abs(&(eta.rows(p0, n) - &target)) < 1e-8 {
        Ok(theta)
    } else {
        Err("Newton iteration did not converge".into())
    }
}

/// Point of `S(Ψ)` with the given vertex expectations.
pub fn lift_to_s(model: &ModelSpec, vertex: &[DVector<f64>]) -> Result<PseudomarginalPoint> {
    lift_with_pure(model, vertex, |a| {
        model.theta(a).rows(0, model.family().factor(a).pure_dim()).into_owned()
    })
}

fn lift_with_pure<F: Fn(usize) -> DVector<f64>>(
    model: &ModelSpec,
    vertex: &[DVector<f64>],
    pure_theta: F,
) -> Result<PseudomarginalPoint> {
    let g = model.graph();
    let fam = model.family();
    let mut pure = Vec::with_capacity(g.num_factors());
    for a in 0..g.num_factors() {
        let f = fam.factor(a);
        let members = g.factor(a);
        let vf: Vec<&ExpFamily> = members.iter().map(|&i| fam.vertex(i)).collect();
        let tg: Vec<&DVector<f64>> = members.iter().map(|&i| &vertex[i]).collect();
        let theta = lift_factor(f, &vf, &pure_theta(a), &tg).map_err(|reason| Error::Lift { factor: a, reason })?;
        let eta = f.to_expectation(&theta)?;
        pure.push(eta.rows(0, f.pure_dim()).into_owned());
    }
    Ok(PseudomarginalPoint {
        pure,
        vertex: vertex.to_vec(),
    })
}

/// `∇F̂` at the lift of the vertex expectations.
pub fn restricted_gradient(model: &ModelSpec, vertex: &[DVector<f64>]) -> Result<DVector<f64>> {
    let point = lift_to_s(model, vertex)?;
    let lay = Layout::new(model);
    let grad = gradient(model, &point)?;
    Ok(grad.rows(lay.pure_total(), lay.total() - lay.pure_total()).into_owned())
}

/// `∇²F̂` at a point of `S(Ψ)`. The pure coordinates of different factors never mix, so the
/// Schur complement `X_VV − X_VF X_FF^{-1} X_FV` splits by factor into the inverse of the member
/// block of `Var_{b_α}[φ_α]`, plus `(1 − d_i) Var_{b_i}[φ_i]^{-1}` per vertex.
pub fn restricted_hessian(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<HessianReport> {
    let g = model.graph();
    let fam = model.family();
    let fc = (0..g.num_factors())
        .map(|a| fam.factor(a).covariance_eta(&point.factor_eta(model, a)))
        .collect::<Result<Vec<_>>>()?;
    let vc = (0..g.num_vertices())
        .map(|i| fam.vertex(i).covariance_eta(&point.vertex[i]))
        .collect::<Result<Vec<_>>>()?;
    restricted_from_covariances(model, &fc, &vc)
}

/// `∇²F̂` from the natural parameters of the beliefs.
pub fn restricted_hessian_natural(
    model: &ModelSpec,
    factor_theta: &[DVector<f64>],
    vertex_theta: &[DVector<f64>],
) -> Result<HessianReport> {
    let g = model.graph();
    let fam = model.family();
    let fc = (0..g.num_factors())
        .map(|a| fam.factor(a).covariance_theta(&factor_theta[a]))
        .collect::<Result<Vec<_>>>()?;
    let vc = (0..g.num_vertices())
        .map(|i| fam.vertex(i).covariance_theta(&vertex_theta[i]))
        .collect::<Result<Vec<_>>>()?;
    restricted_from_covariances(model, &fc, &vc)
}

fn restricted_from_covariances(
    model: &ModelSpec,
    factor_cov: &[DMatrix<f64>],
    vertex_cov: &[DMatrix<f64>],
) -> Result<HessianReport> {
    let g = model.graph();
    let lay = Layout::new(model);
    let p = lay.pure_total();
    let n = lay.total() - p;
    let mut h = DMatrix::zeros(n, n);
    for (a, cov) in factor_cov.iter().enumerate() {
        let pd = model.family().factor(a).pure_dim();
        let m = cov.nrows() - pd;
        let block = cov.view((pd, pd), (m, m)).into_owned();
        let inv = spd_inverse(&block, &format!("member covariance of factor {a}"))?;
        let idx: Vec<usize> = g
            .factor(a)
            .iter()
            .flat_map(|&i| lay.vertex[i] - p..lay.vertex[i + 1] - p)
            .collect();
        for (x, &gx) in idx.iter().enumerate() {
            for (y, &gy) in idx.iter().enumerate() {
                h[(gx, gy)] += inv[(x, y)];
            }
        }
    }
    for (i, cov) in vertex_cov.iter().enumerate() {
        let d = g.vertex_degree(i) as f64;
        let inv = spd_inverse(cov, &format!("Var[phi] of vertex {i}"))?;
        let base = lay.vertex[i] - p;
        for x in 0..inv.nrows() {
            for y in 0..inv.ncols() {
                h[(base + x, base + y)] += (1.0 - d) * inv[(x, y)];
            }
        }
    }
    Ok(HessianReport::from_matrix(h))
}

/// Schur complement of the pure-factor block of a full Hessian.
pub fn restrict(model: &ModelSpec, h: &HessianReport) -> Result<HessianReport> {
    let lay = Layout::new(model);
    let p = lay.pure_total();
    let v = lay.total() - p;
    let xff = h.matrix.view((0, 0), (p, p)).into_owned();
    let xfv = h.matrix.view((0, p), (p, v)).into_owned();
    let xvv = h.matrix.view((p, p), (v, v)).into_owned();
    if p == 0 {
        return Ok(HessianReport::from_matrix(xvv));
    }
    let sol = xff
        .lu()
        .solve(&xfv)
        .ok_or_else(|| Error::Singular("(F,F) block of the Hessian".into()))?;
    Ok(HessianReport::from_matrix(xvv - xfv.transpose() * sol))
}

/// Random interior point of `L`.
pub fn random_point<R: Rng>(model: &ModelSpec, rng: &mut R) -> Result<PseudomarginalPoint> {
    let g = model.graph();
    let fam = model.family();
    let mut vertex = Vec::with_capacity(g.num_vertices());
    for i in 0..g.num_vertices() {
        let eta = match (fam.kind(i), fam.vertex(i)) {
            (_, ExpFamily::Discrete(f)) => {
                let mut p = DVector::from_fn(f.num_states(), |_, _| rng.random_range(0.2..1.0));
                p /= p.sum();
                f.mean_from_probs(&p)
            }
            (VertexKind::GaussianFixedMean { .. }, _) => DVector::from_element(1, rng.random_range(0.5..2.0)),
            _ => {
                let m: f64 = rng.random_range(-1.0..1.0);
                let v: f64 = rng.random_range(0.5..2.0);
                DVector::from_row_slice(&[m, v + m * m])
            }
        };
        vertex.push(eta);
    }
    if fam.is_discrete() {
        let draws: Vec<DVector<f64>> = (0..g.num_factors())
            .map(|a| DVector::from_fn(fam.factor(a).pure_dim(), |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        return lift_with_pure(model, &vertex, |a| draws[a].clone());
    }
    let mut pure = Vec::with_capacity(g.num_factors());
    for a in 0..g.num_factors() {
        let f = fam.factor(a).as_gaussian().unwrap();
        let members = g.factor(a);
        let mut eta = DVector::zeros(f.pure_dim());
        for (k, &(x, y)) in f.pairs().iter().enumerate() {
            let (i, j) = (members[x], members[y]);
            let rho: f64 = rng.random_range(-0.8..0.8);
            eta[k] = if f.fixed_mean() {
                rho * (vertex[i][0] * vertex[j][0]).sqrt()
            } else {
                let (mi, mj) = (vertex[i][0], vertex[j][0]);
                let si = (vertex[i][1] - mi * mi).sqrt();
                let sj = (vertex[j][1] - mj * mj).sqrt();
                rho * si * sj + mi * mj
            };
        }
        pure.push(eta);
    }
    Ok(PseudomarginalPoint { pure, vertex })
}

/// Joint log-potential `Σ_α ⟨θ̄_α, φ_α(x_α)⟩` over all joint states of a discrete model.
#[derive(Debug, Clone)]
pub struct JointTable {
    pub radices: Vec<usize>,
    pub log_psi: Vec<f64>,
}

impl JointTable {
    pub fn len(&self) -> usize {
        self.log_psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_psi.is_empty()
    }

    /// Vertex states of joint state `s` (vertex 0 most significant).
    pub fn digits(&self, s: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        let mut s = s;
        for k in (0..self.radices.len()).rev() {
            out[k] = s % self.radices[k];
            s /= self.radices[k];
        }
        out
    }
}

fn factor_state(model: &ModelSpec, a: usize, digits: &[usize]) -> usize {
    let f = model.family().factor(a).as_discrete().unwrap();
    let mut s = 0;
    for (k, &i) in model.graph().factor(a).iter().enumerate() {
        s = s * f.radices()[k] + digits[i];
    }
    s
}

pub fn joint_table(model: &ModelSpec) -> Result<JointTable> {
    let fam = model.family();
    if !fam.is_discrete() {
        return Err(Error::Unsupported("brute-force tables need a discrete model".into()));
    }
    let radices: Vec<usize> = fam.kinds().iter().map(|k| k.states().unwrap()).collect();
    let total = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r)).unwrap_or(usize::MAX);
    if total > MAX_JOINT_STATES {
        return Err(Error::TooLarge(total));
    }
    let logs: Vec<DVector<f64>> = (0..model.graph().num_factors())
        .map(|a| fam.factor(a).as_discrete().unwrap().stats() * model.theta(a))
        .collect();
    let mut table = JointTable {
        radices,
        log_psi: vec![0.0; total],
    };
    for s in 0..total {
        let digits = table.digits(s);
        table.log_psi[s] = (0..logs.len()).map(|a| logs[a][factor_state(model, a, &digits)]).sum();
    }
    Ok(table)
}

/// `log Z` by summation over all joint states.
pub fn log_partition_bruteforce(model: &ModelSpec) -> Result<f64> {
    let t = joint_table(model)?;
    let max = t.log_psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + t.log_psi.iter().map(|l| (l - max).exp()).sum::<f64>().ln())
}

/// `F_Gibbs(p̂) = Σ_x p̂(x) log(p̂(x) / Π_α Ψ_α(x_α))`.
pub fn gibbs_free_energy_bruteforce(model: &ModelSpec, p: &[f64]) -> Result<f64> {
    let t = joint_table(model)?;
    if p.len() != t.len() {
        return Err(Error::Shape("density table size".into()));
    }
    Ok(p.iter()
        .zip(&t.log_psi)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, l)| q * (q.ln() - l))
        .sum())
}

/// `Π(b)(x) = Π_α b_α(x_α) Π_i b_i(x_i)^{1−d_i}` over all joint states (not renormalised).
pub fn tree_factorization(model: &ModelSpec, point: &PseudomarginalPoint) -> Result<Vec<f64>> {
    let g = model.graph();
    let fam = model.family();
    let t = joint_table(model)?;
    let fb = (0..g.num_factors())
        .map(|a| fam.factor(a).as_discrete().unwrap().probs_from_eta(&point.factor_eta(model, a)))
        .collect::<Result<Vec<_>>>()?;
    let vb = (0..g.num_vertices())
        .map(|i| fam.vertex(i).as_discrete().unwrap().probs_from_eta(&point.vertex[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; t.len()];
    for (s, o) in out.iter_mut().enumerate() {
        let digits = t.digits(s);
        let mut v = 1.0;
        for (a, b) in fb.iter().enumerate() {
            v *= b[factor_state(model, a, &digits)];
        }
        for (i, b) in vb.iter().enumerate() {
            v *= b[digits[i]].powf(1.0 - g.vertex_degree(i) as f64);
        }
        *o = v;
    }
    Ok(out)
}

/// Exact marginals of a discrete model as a point of `L`.
pub fn exact_point(model: &ModelSpec) -> Result<PseudomarginalPoint> {
    let g = model.graph();
    let fam = model.family();
    let t = joint_table(model)?;
    let max = t.log_psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = t.log_psi.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut fp: Vec<DVector<f64>> = (0..g.num_factors())
        .map(|a| DVector::zeros(fam.factor(a).as_discrete().unwrap().num_states()))
        .collect();
    let mut vp: Vec<DVector<f64>> = (0..g.num_vertices())
        .map(|i| DVector::zeros(fam.kind(i).states().unwrap()))
        .collect();
    for (s, ws) in w.iter().enumerate() {
        let digits = t.digits(s);
        for (a, p) in fp.iter_mut().enumerate() {
            p[factor_state(model, a, &digits)] += ws / z;
        }
        for (i, p) in vp.iter_mut().enumerate() {
            p[digits[i]] += ws / z;
        }
    }
    let pure = (0..g.num_factors())
        .map(|a| {
            let f = fam.factor(a).as_discrete().unwrap();
            f.mean_from_probs(&fp[a]).rows(0, f.pure_dim()).into_owned()
        })
        .collect();
    let vertex = (0..g.num_vertices())
        .map(|i| fam.vertex(i).as_discrete().unwrap().mean_from_probs(&vp[i]))
        .collect();
    Ok(PseudomarginalPoint { pure, vertex })
}

#[derive(Debug, Clone)]
pub enum ConvexityVerdict {
    /// `n(H) ≤ 1`, so `κ ≤ 1` and the Hessian is positive definite on all of `L`.
    Convex,
    /// Point where the Hessian has a negative eigenvalue.
    NonConvex {
        t: f64,
        min_eigenvalue: f64,
        point: PseudomarginalPoint,
    },
    Unknown(String),
}

/// Witness scan parameters `t = 1 − 10^{-k}`, `k = 1..=6`.
pub fn witness_schedule() -> Vec<f64> {
    (1..=6).map(|k| 1.0 - 10f64.powi(-k)).collect()
}

/// Convexity of `F` on `L` from the cycle rank, with an explicit witness when `n(H) ≥ 2`.
pub fn convexity_classify(model: &ModelSpec) -> Result<ConvexityVerdict> {
    let g = model.graph();
    let k = g.connected_components();
    if k != 1 {
        return Err(Error::Disconnected { components: k });
    }
    if g.nullity() <= 1 {
        return Ok(ConvexityVerdict::Convex);
    }
    for t in witness_schedule() {
        let point = match witness_point(model, t)? {
            Some(p) => p,
            None => return Ok(ConvexityVerdict::Unknown("no witness construction for this family".into())),
        };
        let h = hessian(model, &point)?;
        if h.min_eigenvalue() < -1e-8 {
            return Ok(ConvexityVerdict::NonConvex {
                t,
                min_eigenvalue: h.min_eigenvalue(),
                point,
            });
        }
    }
    Ok(ConvexityVerdict::Unknown("scan reached t = 1 - 1e-6 without a negative eigenvalue".into()))
}

/// Discrete: `b_α = (1 − t)·uniform + t·uniform over the constant configurations`,
/// uniform vertex marginals (all vertices must share one alphabet).
/// Fixed-mean Gaussian: `η_ii = 1`, `η_ij = t`.
pub fn witness_point(model: &ModelSpec, t: f64) -> Result<Option<PseudomarginalPoint>> {
    let g = model.graph();
    let fam = model.family();
    if fam.is_discrete() {
        let n = fam.kind(0).states().unwrap();
        if fam.kinds().iter().any(|k| k.states() != Some(n)) {
            return Ok(None);
        }
        let mut pure = Vec::with_capacity(g.num_factors());
        for a in 0..g.num_factors() {
            let f = fam.factor(a).as_discrete().unwrap();
            let states = f.num_states();
            let p = DVector::from_fn(states, |s, _| {
                let digits = f.state_digits(s);
                let constant = digits.iter().all(|&d| d == digits[0]);
                (1.0 - t) / states as f64 + if constant { t / n as f64 } else { 0.0 }
            });
            pure.push(f.mean_from_probs(&p).rows(0, f.pure_dim()).into_owned());
        }
        let vertex = (0..g.num_vertices())
            .map(|i| {
                let f = fam.vertex(i).as_discrete().unwrap();
                f.mean_from_probs(&DVector::from_element(n, 1.0 / n as f64))
            })
            .collect();
        return Ok(Some(PseudomarginalPoint { pure, vertex }));
    }
    let fixed = fam.kinds().iter().all(|k| matches!(k, VertexKind::GaussianFixedMean { .. }));
    if !fixed || !g.is_pairwise() {
        return Ok(None);
    }
    Ok(Some(PseudomarginalPoint {
        pure: vec![DVector::from_element(1, t); g.num_factors()],
        vertex: vec![DVector::from_element(1, 1.0); g.num_vertices()],
    }))
}
