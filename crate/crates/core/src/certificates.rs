//! Verifiers for the optimality and uniqueness conditions of the nonsmooth
//! estimators: the subgradient certificate for the scalar l1 problem (via the
//! minimum-inf-norm program over zero-residual columns), the cardinality
//! condition for affine models, the multivariable max-column-norm analogue,
//! and the stationarity/uniqueness checks for the regularized problem.
//!
//! The certificate program `min ||alpha||_inf s.t. X_0 alpha = z` is solved
//! exactly through its dual: `1 / min { sum_t |x_t^T eta| : z^T eta = 1 }`,
//! which is a small least-absolute-deviation problem handled by the vertex
//! solver. A primal witness is then rebuilt from complementary slackness.

use crate::datamodel::{partition_indices, Dataset, IndexPartition, MultiDataset, DEFAULT_PARTITION_TOL};
use crate::error::{Error, Result};
use crate::linalg::{default_rank, max_abs, pivoted_columns, select_columns, Lu};
use crate::scalar::Scalar;
use crate::solvers::RegularizedSolution;
use ndarray::{Array1, Array2};
use serde::Serialize;

/// Default strictness margin for certificate verdicts.
pub const DEFAULT_CERT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct RankEvidence<F> {
    /// Rank of the zero-residual column block.
    pub rank_i0: usize,
    /// Optimal value of the uniqueness program, when evaluated.
    pub s2prime_lp_value: Option<F>,
}

/// Optimality/uniqueness verdict for a candidate parameter.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct Certificate<F> {
    /// Optimal value of the certificate program (infinite when infeasible).
    pub s3_value: F,
    /// Subgradient coefficients indexed like `partition.zero`.
    pub lambda_coeffs: Vec<F>,
    pub optimal: bool,
    /// `None` means not evaluated or numerically borderline.
    pub unique: Option<bool>,
    pub rank_evidence: RankEvidence<F>,
    pub partition: IndexPartition<F>,
}

/// Uniqueness decision with its evidence.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct Uniqueness<F> {
    pub unique: Option<bool>,
    pub rank_i0: usize,
    pub s2prime_lp_value: Option<F>,
    /// Diagnostic set {t in I0 : |lambda_t| < 1 - tol} from the exhibited witness.
    pub s1prime_set: Vec<usize>,
}

/// Outcome of `min ||alpha||_inf s.t. A alpha = z`.
pub(crate) struct MinInfNormOutcome<F> {
    pub value: F,
    pub alpha: Array1<F>,
    /// `min { sum |a_t^T eta| : z^T eta = 1 }`; None when z = 0 or infeasible.
    pub dual_lp: Option<F>,
    /// Minimizer of the dual program, scaled so z^T eta = 1.
    pub eta: Option<Array1<F>>,
}

/// Modified Gram-Schmidt orthonormal basis of the column space.
pub(crate) fn column_space_basis<F: Scalar>(a: &Array2<F>) -> Array2<F> {
    let n = a.nrows();
    let piv = pivoted_columns(a, n.min(a.ncols()));
    let mut basis: Vec<Array1<F>> = Vec::new();
    let scale = max_abs(a) + F::one();
    for &j in &piv {
        let mut v = a.column(j).to_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v = v - &q.mapv(|e| e * c);
            }
        }
        let norm = v.iter().map(|&e| e * e).sum::<F>().sqrt();
        if norm > scale * F::epsilon() * F::real(64.0) {
            basis.push(v.mapv(|e| e / norm));
        }
    }
    let mut out = Array2::zeros((n, basis.len()));
    for (j, q) in basis.iter().enumerate() {
        out.column_mut(j).assign(q);
    }
    out
}

/// Orthonormal completion of z/||z||: columns span the null space of z^T.
fn null_space_of<F: Scalar>(z: &Array1<F>) -> Array2<F> {
    let n = z.len();
    let norm = z.iter().map(|&e| e * e).sum::<F>().sqrt();
    let e = z.mapv(|v| v / norm);
    // Householder matrix with first column parallel to e
    let sigma = if e[0] >= F::zero() { F::one() } else { -F::one() };
    let mut v = e;
    v[0] = v[0] + sigma;
    let vn2: F = v.iter().map(|&x| x * x).sum();
    let mut out = Array2::zeros((n, n - 1));
    for col in 1..n {
        for row in 0..n {
            let id = if row == col { F::one() } else { F::zero() };
            out[[row, col - 1]] = id - F::real(2.0) * v[row] * v[col] / vn2;
        }
    }
    out
}

/// `min { sum_t |a_t^T eta| : z^T eta = 1 }` by reduction to a vertex LAD
/// solve inside the affine slice; returns the value and a minimizing eta.
fn dual_lad<F: Scalar>(a: &Array2<F>, z: &Array1<F>, max_iter: usize) -> Result<(F, Array1<F>)> {
    let n = a.nrows();
    let z2: F = z.iter().map(|&v| v * v).sum();
    let eta0 = z.mapv(|v| v / z2);
    let b = a.t().dot(&eta0);
    if n == 1 {
        return Ok((b.iter().map(|v| v.abs()).sum(), eta0));
    }
    let v = null_space_of(z);
    let m = v.t().dot(a); // (n-1) x p
    let q = column_space_basis(&m);
    if q.ncols() == 0 {
        return Ok((b.iter().map(|v| v.abs()).sum(), eta0));
    }
    let mt = q.t().dot(&m); // full row rank by construction
    let (w, _) = crate::solvers::lad_vertex(&mt, &b, max_iter)?;
    let value: F = (0..a.ncols()).map(|t| (b[t] - mt.column(t).dot(&w)).abs()).sum();
    let eta = &eta0 - &v.dot(&q.dot(&w));
    Ok((value, eta))
}

/// Solves `min ||alpha||_inf s.t. A alpha = z` exactly; `z_scale` calibrates
/// the zero/feasibility thresholds (a magnitude typical of the summands of z).
pub(crate) fn min_inf_norm_program<F: Scalar>(
    a: &Array2<F>,
    z: &Array1<F>,
    z_scale: F,
    max_iter: usize,
) -> Result<MinInfNormOutcome<F>> {
    let p = a.ncols();
    let z_tol = F::epsilon() * F::real(128.0) * (z_scale + F::one());
    let z_norm = z.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    if z_norm <= z_tol {
        return Ok(MinInfNormOutcome {
            value: F::zero(),
            alpha: Array1::zeros(p),
            dual_lp: None,
            eta: None,
        });
    }
    if p == 0 {
        return Ok(MinInfNormOutcome {
            value: F::infinity(),
            alpha: Array1::zeros(0),
            dual_lp: None,
            eta: None,
        });
    }
    // feasibility: z must lie in the column space of A
    let q = column_space_basis(a);
    let proj = q.dot(&q.t().dot(z));
    let resid = (z - &proj).iter().fold(F::zero(), |m, v| m.max(v.abs()));
    if resid > F::real(1e-9) * (z_norm + z_scale) {
        return Ok(MinInfNormOutcome {
            value: F::infinity(),
            alpha: Array1::zeros(p),
            dual_lp: None,
            eta: None,
        });
    }
    let (u, eta) = dual_lad(a, z, max_iter)?;
    if !(u > F::epsilon() * F::real(16.0)) {
        return Ok(MinInfNormOutcome {
            value: F::infinity(),
            alpha: Array1::zeros(p),
            dual_lp: None,
            eta: None,
        });
    }
    let value = F::one() / u;
    let alpha = recover_primal(a, z, max_iter, 64)?;
    Ok(MinInfNormOutcome { value, alpha, dual_lp: Some(u), eta: Some(eta) })
}

/// Rebuilds a minimizer of `min ||alpha||_inf s.t. A alpha = z` from the dual
/// witness: where |a_t^T eta| is active the sign is forced, the rest recurses.
fn recover_primal<F: Scalar>(
    a: &Array2<F>,
    z: &Array1<F>,
    max_iter: usize,
    depth: usize,
) -> Result<Array1<F>> {
    let p = a.ncols();
    let col_scale = max_abs(a) + F::one();
    let z_norm = z.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    if z_norm <= F::epsilon() * F::real(128.0) * col_scale || p == 0 {
        return Ok(Array1::zeros(p));
    }
    if depth == 0 {
        return Ok(min_two_norm_solution(a, z));
    }
    let (u, eta) = dual_lad(a, z, max_iter)?;
    if !(u > F::epsilon() * F::real(16.0)) {
        return Ok(min_two_norm_solution(a, z));
    }
    let value = F::one() / u;
    let corr = a.t().dot(&eta);
    let cmax = corr.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    let active_tol = cmax * F::real(1e-9);
    let mut alpha = Array1::zeros(p);
    let mut rest_idx = Vec::new();
    let mut zz = z.clone();
    for t in 0..p {
        if corr[t].abs() > active_tol {
            let s = if corr[t] > F::zero() { value } else { -value };
            alpha[t] = s;
            zz = zz - &a.column(t).mapv(|v| v * s);
        } else {
            rest_idx.push(t);
        }
    }
    if rest_idx.len() == p {
        // dual witness did not separate anything; fall back
        return Ok(min_two_norm_solution(a, z));
    }
    if !rest_idx.is_empty() {
        let sub = select_columns(a, &rest_idx);
        let alpha_rest = recover_primal(&sub, &zz, max_iter, depth - 1)?;
        for (j, &t) in rest_idx.iter().enumerate() {
            alpha[t] = alpha_rest[j];
        }
    }
    Ok(alpha)
}

/// Least-2-norm solution of `A alpha = z`, via an orthonormal row-space basis.
fn min_two_norm_solution<F: Scalar>(a: &Array2<F>, z: &Array1<F>) -> Array1<F> {
    let q = column_space_basis(a);
    if q.ncols() == 0 {
        return Array1::zeros(a.ncols());
    }
    let at = q.t().dot(a); // q x p, full row rank
    let g = at.dot(&at.t().to_owned());
    let zt = q.t().dot(z);
    match Lu::new(&g, "min_two_norm") {
        Ok(lu) => at.t().dot(&lu.solve_vec(&zt)),
        Err(_) => Array1::zeros(a.ncols()),
    }
}

struct S3Outcome<F> {
    value: F,
    lambda: Array1<F>,
    dual_lp: Option<F>,
    eta: Option<Array1<F>>,
    partition: IndexPartition<F>,
}

fn s3_outcome<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>, tol: F) -> Result<S3Outcome<F>> {
    let n = dataset.dim();
    let rank = default_rank(&dataset.regressors);
    if rank < n {
        return Err(Error::RankDeficient { rank, rows: n });
    }
    let partition = partition_indices(dataset, theta, tol)?;
    let mut z: Array1<F> = Array1::zeros(n);
    let mut z_scale = F::zero();
    for &t in &partition.plus {
        z = z + &dataset.regressors.column(t);
        z_scale = z_scale + dataset.regressors.column(t).iter().fold(F::zero(), |m, v| m.max(v.abs()));
    }
    for &t in &partition.minus {
        z = z - &dataset.regressors.column(t);
        z_scale = z_scale + dataset.regressors.column(t).iter().fold(F::zero(), |m, v| m.max(v.abs()));
    }
    let x0 = select_columns(&dataset.regressors, &partition.zero);
    let out = min_inf_norm_program(&x0, &z, z_scale, lp_iterations(dataset.len()))?;
    Ok(S3Outcome { value: out.value, lambda: out.alpha, dual_lp: out.dual_lp, eta: out.eta, partition })
}

fn lp_iterations(n_samples: usize) -> usize {
    50 * n_samples + 500
}

/// Value of the certificate program at `theta` plus the subgradient witness;
/// a value of at most 1 certifies optimality for the l1 problem.
pub fn s3_value<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>, tol: F) -> Result<(F, Array1<F>)> {
    let out = s3_outcome(dataset, theta, tol)?;
    Ok((out.value, out.lambda))
}

/// Full optimality certificate; uniqueness is left unevaluated.
pub fn check_optimal<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>, tol: F) -> Result<Certificate<F>> {
    let out = s3_outcome(dataset, theta, tol)?;
    let x0 = select_columns(&dataset.regressors, &out.partition.zero);
    let rank_i0 = default_rank(&x0);
    Ok(Certificate {
        optimal: out.value <= F::one() + tol,
        s3_value: out.value,
        lambda_coeffs: out.lambda.to_vec(),
        unique: None,
        rank_evidence: RankEvidence { rank_i0, s2prime_lp_value: None },
        partition: out.partition,
    })
}

/// Uniqueness decision for an optimal `theta`. Requires a full-rank zero
/// block and a strictly-greater-than-one uniqueness program; at the boundary
/// a second minimizer is searched for along the dual witness direction, and
/// only a confirmed one yields `Some(false)` (otherwise `None`).
pub fn check_unique<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>, tol: F) -> Result<Uniqueness<F>> {
    let out = s3_outcome(dataset, theta, tol)?;
    if !(out.value <= F::one() + tol) {
        return Err(Error::NotOptimal(format!(
            "certificate value {} exceeds 1",
            out.value.as_f64()
        )));
    }
    let x0 = select_columns(&dataset.regressors, &out.partition.zero);
    let rank_i0 = default_rank(&x0);
    let n = dataset.dim();
    let unique = if rank_i0 < n {
        Some(false)
    } else {
        match out.dual_lp {
            None => Some(true), // z = 0: the rank test alone decides
            Some(u) => {
                if u > F::one() + tol {
                    Some(true)
                } else if let Some(eta) = &out.eta {
                    confirm_second_minimizer(dataset, theta, eta)
                } else {
                    None
                }
            }
        }
    };
    let s1prime_set: Vec<usize> = out
        .partition
        .zero
        .iter()
        .enumerate()
        .filter(|(i, _)| out.lambda[*i].abs() < F::one() - tol)
        .map(|(_, &t)| t)
        .collect();
    Ok(Uniqueness { unique, rank_i0, s2prime_lp_value: out.dual_lp, s1prime_set })
}

/// Steps along the flat direction suggested by the dual witness; an equal
/// objective at a distinct parameter confirms non-uniqueness.
fn confirm_second_minimizer<F: Scalar>(
    dataset: &Dataset<F>,
    theta: &Array1<F>,
    eta: &Array1<F>,
) -> Option<bool> {
    let d = eta.mapv(|v| -v);
    let phi = dataset.residuals(theta);
    let u = dataset.regressors.t().dot(&d);
    let mut alpha = F::infinity();
    for t in 0..dataset.len() {
        let thr = F::real(DEFAULT_PARTITION_TOL) * (F::one() + dataset.outputs[t].abs());
        if phi[t].abs() <= thr || u[t].abs() <= F::epsilon() {
            continue;
        }
        let a = phi[t] / u[t];
        if a > F::zero() {
            alpha = alpha.min(a);
        }
    }
    if !alpha.is_finite() {
        alpha = F::one();
    }
    let step = alpha / F::real(2.0);
    let d_norm = d.iter().map(|&v| v * v).sum::<F>().sqrt();
    if step * d_norm <= F::epsilon() * F::real(64.0) {
        return None;
    }
    let theta2 = theta + &d.mapv(|v| v * step);
    let obj: F = phi.iter().map(|r| r.abs()).sum();
    let obj2: F = dataset.residuals(&theta2).iter().map(|r| r.abs()).sum();
    if (obj2 - obj).abs() <= F::real(1e-11) * (F::one() + obj) {
        Some(false)
    } else {
        None
    }
}

/// One-call certificate: optimality plus, when optimal, the uniqueness verdict.
pub fn certify<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>, tol: F) -> Result<Certificate<F>> {
    let mut cert = check_optimal(dataset, theta, tol)?;
    if cert.optimal {
        let u = check_unique(dataset, theta, tol)?;
        cert.unique = u.unique;
        cert.rank_evidence.s2prime_lp_value = u.s2prime_lp_value;
    }
    Ok(cert)
}

/// Necessary optimality condition for affine models:
/// | |I+| - |I-| | <= |I0|. `false` certifies non-optimality.
pub fn affine_necessary<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>) -> Result<bool> {
    let n = dataset.dim();
    let last = dataset.regressors.row(n - 1);
    if last.iter().any(|v| (*v - F::one()).abs() > F::real(1e-9)) {
        return Err(Error::NotAffine);
    }
    let p = partition_indices(dataset, theta, F::real(DEFAULT_PARTITION_TOL))?;
    let diff = (p.plus.len() as i64 - p.minus.len() as i64).unsigned_abs() as usize;
    Ok(diff <= p.zero.len())
}

/// Weighted optimality value used by the solvers to set `status`: the same
/// certificate program with weight-scaled columns and sums.
pub(crate) fn weighted_optimality_value<F: Scalar>(
    dataset: &Dataset<F>,
    theta: &Array1<F>,
    weights: &Array1<F>,
    class_tol: F,
) -> Result<F> {
    let n = dataset.dim();
    let partition = partition_indices(dataset, theta, class_tol)?;
    let mut z: Array1<F> = Array1::zeros(n);
    let mut z_scale = F::zero();
    for &t in &partition.plus {
        let col = dataset.regressors.column(t);
        z = z + &col.mapv(|v| v * weights[t]);
        z_scale = z_scale + weights[t] * col.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    }
    for &t in &partition.minus {
        let col = dataset.regressors.column(t);
        z = z - &col.mapv(|v| v * weights[t]);
        z_scale = z_scale + weights[t] * col.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    }
    let kept: Vec<usize> = partition.zero.iter().copied().filter(|&t| weights[t] > F::zero()).collect();
    let mut x0 = select_columns(&dataset.regressors, &kept);
    for (j, &t) in kept.iter().enumerate() {
        let w = weights[t];
        x0.column_mut(j).mapv_inplace(|v| v * w);
    }
    let out = min_inf_norm_program(&x0, &z, z_scale, lp_iterations(dataset.len()))?;
    Ok(out.value)
}

// ---------------------------------------------------------------------------
// Multivariable certificate (T-type conditions).
// ---------------------------------------------------------------------------

struct T3Problem<F> {
    /// Reduced zero-block: q x p with full row rank.
    x_reduced: Array2<F>,
    /// Right-hand side expressed in the reduced basis (m x q).
    g_reduced: Array2<F>,
    lu: Lu<F>,
    p: usize,
    feasible: bool,
    trivial: Option<F>,
}

fn t3_setup<F: Scalar>(md: &MultiDataset<F>, a: &Array2<F>, tol: F) -> Result<T3Problem<F>> {
    let (m, n) = (md.output_dim(), md.dim());
    if a.nrows() != m || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "t3 candidate matrix",
            expected: m * n,
            actual: a.nrows() * a.ncols(),
        });
    }
    let resid = md.residual_matrix(a);
    let mut zero = Vec::new();
    let mut nonzero = Vec::new();
    for t in 0..md.len() {
        let rn = resid.column(t).iter().map(|&v| v * v).sum::<F>().sqrt();
        let yn = md.outputs.column(t).iter().map(|&v| v * v).sum::<F>().sqrt();
        if rn <= tol * (F::one() + yn) {
            zero.push(t);
        } else {
            nonzero.push(t);
        }
    }
    // G = V* X_{I^c}^T with unit residual directions v_t
    let mut g: Array2<F> = Array2::zeros((m, n));
    let mut g_scale = F::one();
    for &t in &nonzero {
        let col = resid.column(t).to_owned();
        let rn = col.iter().map(|&v| v * v).sum::<F>().sqrt();
        let x_col = md.regressors.column(t);
        for i in 0..m {
            for j in 0..n {
                g[[i, j]] = g[[i, j]] + col[i] / rn * x_col[j];
            }
        }
        g_scale = g_scale + x_col.iter().fold(F::zero(), |mx, v| mx.max(v.abs()));
    }
    let p = zero.len();
    let g_zero = max_abs(&g) <= F::epsilon() * F::real(128.0) * g_scale;
    if p == 0 || g_zero {
        return Ok(T3Problem {
            x_reduced: Array2::zeros((0, 0)),
            g_reduced: Array2::zeros((m, 0)),
            lu: Lu::new(&Array2::eye(1), "t3 trivial")?,
            p,
            feasible: g_zero,
            trivial: Some(if g_zero { F::zero() } else { F::infinity() }),
        });
    }
    let x0 = select_columns(&md.regressors, &zero);
    let q = column_space_basis(&x0);
    // feasibility: every g_i must lie in the column space of X_0
    let mut feasible = true;
    for i in 0..m {
        let gi = g.row(i).to_owned();
        let proj = q.dot(&q.t().dot(&gi));
        let r = (&gi - &proj).iter().fold(F::zero(), |mx, v| mx.max(v.abs()));
        let gn = gi.iter().fold(F::zero(), |mx, v| mx.max(v.abs()));
        if r > F::real(1e-9) * (gn + g_scale) {
            feasible = false;
        }
    }
    let x_reduced = q.t().dot(&x0);
    let g_reduced = g.dot(&q);
    let lu = Lu::new(&x_reduced.dot(&x_reduced.t().to_owned()), "t3 reduced gram")?;
    Ok(T3Problem { x_reduced, g_reduced, lu, p, feasible, trivial: None })
}

impl<F: Scalar> T3Problem<F> {
    /// Projects Z (m x p) onto the affine set { Z : Z X_0^T = G }, row-wise.
    fn project_affine(&self, z: &Array2<F>) -> Array2<F> {
        let mut out = z.clone();
        for i in 0..z.nrows() {
            let zi = z.row(i).to_owned();
            let defect = self.x_reduced.dot(&zi) - &self.g_reduced.row(i);
            let corr = self.x_reduced.t().dot(&self.lu.solve_vec(&defect));
            let fixed = &zi - &corr;
            out.row_mut(i).assign(&fixed);
        }
        out
    }

    fn max_col_norm(z: &Array2<F>) -> F {
        (0..z.ncols()).fold(F::zero(), |mx, t| {
            mx.max(z.column(t).iter().map(|&v| v * v).sum::<F>().sqrt())
        })
    }

    fn least_norm(&self) -> Array2<F> {
        let m = self.g_reduced.nrows();
        self.project_affine(&Array2::zeros((m, self.p)))
    }

    /// Proximal map of `step * (max column 2-norm)` via Moreau: subtract the
    /// projection onto the dual ball (column norms summing to at most step).
    fn prox_max_col_norm(z: &Array2<F>, step: F) -> Array2<F> {
        let p = z.ncols();
        let norms: Vec<F> =
            (0..p).map(|t| z.column(t).iter().map(|&v| v * v).sum::<F>().sqrt()).collect();
        let total: F = norms.iter().copied().sum();
        if total <= step {
            return Array2::zeros(z.raw_dim());
        }
        // water-filling threshold: project the norm vector onto the l1 ball
        let mut sorted = norms.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cum = F::zero();
        let mut tau = F::zero();
        for (k, &v) in sorted.iter().enumerate() {
            cum = cum + v;
            let cand = (cum - step) / F::real((k + 1) as f64);
            if k + 1 == sorted.len() || cand >= sorted[k + 1] {
                tau = cand;
                break;
            }
        }
        let mut out = z.clone();
        for t in 0..p {
            let ball = (norms[t] - tau).max(F::zero()).min(norms[t]);
            let keep = if norms[t] > F::zero() { F::one() - ball / norms[t] } else { F::zero() };
            out.column_mut(t).mapv_inplace(|v| v * keep);
        }
        out
    }

    /// Douglas-Rachford on `min max_j ||Z_j||_2 + indicator(affine set)`.
    fn minimize(&self, max_rounds: usize) -> F {
        let z_ls = self.least_norm();
        let hi = Self::max_col_norm(&z_ls);
        if hi <= F::epsilon() {
            return F::zero();
        }
        let step = hi / F::real(2.0);
        let mut v = z_ls.clone();
        let mut best = hi;
        let mut stable = 0usize;
        for round in 0..max_rounds {
            let w = Self::prox_max_col_norm(&v, step);
            let reflected = &w.mapv(|e| e * F::real(2.0)) - &v;
            let u = self.project_affine(&reflected);
            v = &v + &u - &w;
            if round % 10 == 9 {
                // u is affine-feasible, so its max column norm bounds the value
                let val = Self::max_col_norm(&u);
                if val < best - F::real(1e-12) * (F::one() + best) {
                    best = val.min(best);
                    stable = 0;
                } else {
                    best = best.min(val);
                    stable += 1;
                    if stable >= 40 {
                        break;
                    }
                }
            }
        }
        best
    }
}

/// Optimal value of the multivariable certificate program
/// `min ||Z||_{2,inf} s.t. Z X_0^T = V* X_{I^c}^T` (max column 2-norm);
/// at most 1 iff the candidate solves the sum-of-norms problem.
pub fn t3_value<F: Scalar>(md: &MultiDataset<F>, a: &Array2<F>, tol: F) -> Result<F> {
    let prob = t3_setup(md, a, tol)?;
    if let Some(v) = prob.trivial {
        return Ok(v);
    }
    if !prob.feasible {
        return Ok(F::infinity());
    }
    Ok(prob.minimize(60_000))
}

/// Cheap certificate check used by the sum-of-norms solver: is the program
/// value at most `bound`?
pub(crate) fn t3_feasible_at<F: Scalar>(
    md: &MultiDataset<F>,
    a: &Array2<F>,
    tol: F,
    bound: F,
) -> Result<bool> {
    let prob = t3_setup(md, a, tol)?;
    if let Some(v) = prob.trivial {
        return Ok(v <= bound);
    }
    if !prob.feasible {
        return Ok(false);
    }
    let z_ls = prob.least_norm();
    if T3Problem::max_col_norm(&z_ls) <= bound {
        return Ok(true);
    }
    Ok(prob.minimize(20_000) <= bound)
}

// ---------------------------------------------------------------------------
// Regularized-problem checks.
// ---------------------------------------------------------------------------

/// Verifies both stationarity equations of the regularized problem with a
/// valid subgradient, each to `tol * (1 + ||y||_inf)`, plus the implied
/// identity `X s = 0`.
pub fn check_regularized_kkt<F: Scalar>(
    dataset: &Dataset<F>,
    lambda: F,
    solution: &RegularizedSolution<F>,
    tol: F,
) -> Result<bool> {
    if !(lambda > F::zero()) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let x = &dataset.regressors;
    let y = &dataset.outputs;
    let theta = &solution.theta;
    let phi = &solution.phi;
    if theta.len() != dataset.dim() || phi.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            context: "check_regularized_kkt solution",
            expected: dataset.len(),
            actual: phi.len(),
        });
    }
    let scale = tol * (F::one() + y.iter().fold(F::zero(), |m, v| m.max(v.abs())));
    let y_minus_phi = y - phi;
    let r1 = x.dot(&x.t().dot(theta)) - &x.dot(&y_minus_phi);
    let r1_norm = r1.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    if r1_norm > scale {
        return Ok(false);
    }
    // best valid subgradient: sign on the support, clamped elsewhere
    let g = &y_minus_phi - &x.t().dot(theta);
    let mut s: Array1<F> = Array1::zeros(dataset.len());
    for t in 0..dataset.len() {
        s[t] = if phi[t] != F::zero() {
            if phi[t] > F::zero() {
                F::one()
            } else {
                -F::one()
            }
        } else {
            (g[t] / lambda).max(-F::one()).min(F::one())
        };
    }
    let r2 = x.t().dot(theta) - &y_minus_phi + &s.mapv(|v| v * lambda);
    let r2_norm = r2.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    if r2_norm > scale {
        return Ok(false);
    }
    // implied identity X s = 0, at the tolerance the two equations induce
    let xs = x.dot(&s);
    let xs_norm = xs.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    let induced = (crate::linalg::op_inf_norm(x) * scale + scale) / lambda;
    Ok(xs_norm <= induced + scale)
}

/// Uniqueness of the regularized solution: rank(X) = n and the support
/// columns of the residual projector are linearly independent.
pub fn check_regularized_unique<F: Scalar>(
    dataset: &Dataset<F>,
    solution: &RegularizedSolution<F>,
    _tol: F,
) -> Result<bool> {
    let n = dataset.dim();
    if default_rank(&dataset.regressors) < n {
        return Ok(false);
    }
    let support = &solution.support;
    if support.is_empty() {
        return Ok(true);
    }
    if support.len() > dataset.len() - n {
        return Ok(false); // Psi has rank N - n
    }
    let psi = crate::linalg::residual_projector(&dataset.regressors)?;
    let cols = select_columns(&psi, support);
    Ok(default_rank(&cols) == support.len())
}
