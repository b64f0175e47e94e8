//! Genericity measures and recovery thresholds computed from the regressor
//! matrix alone: the n-genericity index, the projection-entry bound r(X) and
//! its normalized variant, the mutual-coherence bound, the partition
//! enumerators v1/v2 with their thresholds k1/k2, the error-bound constants
//! K1/K2, and the brute-force l0 oracle.
//!
//! Exact enumeration is capped (the quantities are combinatorial); beyond the
//! caps the sampled modes return certified lower bounds carrying flags.

use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{
    default_rank, gram, max_abs, op_inf_norm, row_space_projection, select_columns, spectral_norm,
    Lu,
};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::Serialize;

/// How a reported quantity was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    SampledLowerBound,
    Absent,
}

/// Enumeration caps and sampling budget.
#[derive(Debug, Clone)]
pub struct BoundsOptions {
    /// Cap on N for the exact genericity index.
    pub nu_cap: usize,
    /// Cap on N for the exact partition enumerators k1/k2.
    pub partition_cap: usize,
    /// Cap on N for the exact error-bound constants.
    pub subset_cap: usize,
    /// Cap on N for the brute-force l0 solver.
    pub l0_cap: usize,
    /// Trials per size in the sampled modes.
    pub sample_trials: usize,
    pub sample_seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            nu_cap: 25,
            partition_cap: 15,
            subset_cap: 15,
            l0_cap: 20,
            sample_trials: 200,
            sample_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactnessFlags {
    pub nu_n: Exactness,
    pub k1: Exactness,
    pub k2: Exactness,
    pub coherence_bound: Exactness,
}

/// Summary of every bound computable from a regressor matrix.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct BoundsReport<F> {
    pub nu_n: usize,
    pub r: F,
    pub r_n: F,
    pub coherence_bound: Option<F>,
    /// N - 1/(2 r): more zero residuals than this certifies unique recovery.
    pub threshold_r: F,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub exactness: ExactnessFlags,
}

#[derive(Debug, Clone, Copy)]
pub enum GenericityMode {
    Exact,
    Sampled { trials: usize, seed: u64 },
}

/// Lexicographic k-subsets of {0..n-1} with early exit.
pub(crate) struct Combinations {
    idx: Vec<usize>,
    n: usize,
    k: usize,
    started: bool,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self { idx: (0..k).collect(), n, k, started: false, done: k > n }
    }

    pub(crate) fn next_subset(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.idx);
        }
        let k = self.k;
        if k == 0 {
            self.done = true;
            return None;
        }
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                return None;
            }
            i -= 1;
            if self.idx[i] != i + self.n - k {
                break;
            }
        }
        self.idx[i] += 1;
        for j in i + 1..k {
            self.idx[j] = self.idx[j - 1] + 1;
        }
        Some(&self.idx)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn require_full_rank<F: Scalar>(x: &Array2<F>) -> Result<()> {
    let n = x.nrows();
    let r = default_rank(x);
    if r < n {
        return Err(Error::RankDeficient { rank: r, rows: n });
    }
    Ok(())
}

/// Smallest m such that every n-by-m submatrix has rank n. Exact mode scans m
/// upward looking for a rank-deficient subset of each size; sampled mode
/// returns a certified lower bound.
pub fn genericity_index<F: Scalar>(
    x: &Array2<F>,
    mode: GenericityMode,
    cap: usize,
) -> Result<(usize, Exactness)> {
    require_full_rank(x)?;
    let (n, n_samples) = (x.nrows(), x.ncols());
    match mode {
        GenericityMode::Exact => {
            if n_samples > cap {
                return Err(Error::CapExceeded(format!(
                    "genericity_index exact mode allows N <= {cap}, got {n_samples}"
                )));
            }
            for m in n..=n_samples {
                let mut deficient = false;
                let mut combos = Combinations::new(n_samples, m);
                while let Some(s) = combos.next_subset() {
                    if default_rank(&select_columns(x, s)) < n {
                        deficient = true;
                        break;
                    }
                }
                if !deficient {
                    return Ok((m, Exactness::Exact));
                }
            }
            Ok((n_samples, Exactness::Exact))
        }
        GenericityMode::Sampled { trials, seed } => {
            let mut rng = substream(seed, Stream::SystemCoefficients);
            for m in n..n_samples {
                let mut deficient = false;
                for _ in 0..trials {
                    let subset = sample_subset(&mut rng, n_samples, m);
                    if default_rank(&select_columns(x, &subset)) < n {
                        deficient = true;
                        break;
                    }
                }
                if !deficient {
                    return Ok((m, Exactness::SampledLowerBound));
                }
            }
            Ok((n_samples, Exactness::SampledLowerBound))
        }
    }
}

fn sample_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.gen_range(0..n - i);
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

/// Largest-magnitude entry of the row-space projection `X^T (X X^T)^{-1} X`.
pub fn r_value<F: Scalar>(x: &Array2<F>) -> Result<F> {
    require_full_rank(x)?;
    let p = row_space_projection(x)?;
    Ok(max_abs(&p))
}

/// r of the matrix whose columns are normalized to unit Sigma_X-norm
/// (`||x||^2 = x^T (X X^T)^{-1} x`); the bound for the correspondingly
/// weighted objective.
pub fn rn_value<F: Scalar>(x: &Array2<F>) -> Result<F> {
    require_full_rank(x)?;
    let p = row_space_projection(x)?;
    let n_samples = x.ncols();
    let mut xn = x.clone();
    for t in 0..n_samples {
        let d = p[[t, t]];
        if d <= F::zero() {
            return Err(Error::ZeroProjectionColumn(t));
        }
        let s = F::one() / d.sqrt();
        xn.column_mut(t).mapv_inplace(|v| v * s);
    }
    let pn = row_space_projection(&xn)?;
    Ok(max_abs(&pn))
}

/// Mutual-coherence bound `(1 + 1/mu(P_X)) / 2` on the number of correctable
/// gross errors, with `P_X = I - X^T (X X^T)^{-1} X`.
pub fn coherence_bound<F: Scalar>(x: &Array2<F>) -> Result<F> {
    require_full_rank(x)?;
    let (n, n_samples) = (x.nrows(), x.ncols());
    if n_samples <= n {
        return Err(Error::ZeroProjectionColumn(0));
    }
    let psi = crate::linalg::residual_projector(x)?;
    // Psi is an orthogonal projector: column inner products are its entries
    let mut mu = F::zero();
    for i in 0..n_samples {
        if psi[[i, i]] <= F::real(1e-12) {
            return Err(Error::ZeroProjectionColumn(i));
        }
    }
    for i in 0..n_samples {
        for j in i + 1..n_samples {
            let c = psi[[i, j]].abs() / (psi[[i, i]] * psi[[j, j]]).sqrt();
            mu = mu.max(c);
        }
    }
    if mu == F::zero() {
        return Ok(F::infinity());
    }
    Ok((F::one() + F::one() / mu) / F::real(2.0))
}

/// `max over |I| = k of ||X_I^T (X_I X_I^T)^{-1} X_{I^c}||_inf`; partitions
/// with singular `X_I X_I^T` contribute +infinity.
pub fn v1_value<F: Scalar>(x: &Array2<F>, k: usize, opts: &BoundsOptions) -> Result<F> {
    require_full_rank(x)?;
    let n_samples = x.ncols();
    check_partition_cap(n_samples, opts)?;
    if k > n_samples {
        return Err(Error::InvalidArgument("subset size exceeds N".into()));
    }
    let mut best = F::zero();
    let mut combos = Combinations::new(n_samples, k);
    while let Some(s) = combos.next_subset() {
        let xi = select_columns(x, s);
        let comp = complement(n_samples, s);
        match Lu::new(&gram(&xi), "v1 subset gram") {
            Ok(lu) => {
                if comp.is_empty() {
                    continue;
                }
                let xc = select_columns(x, &comp);
                let m = xi.t().dot(&lu.solve_mat(&xc));
                best = best.max(op_inf_norm(&m));
            }
            Err(_) => return Ok(F::infinity()),
        }
    }
    Ok(best)
}

/// `max over |I| = k of ||X_{I^c}^T (X X^T)^{-1} X||_1`.
pub fn v2_value<F: Scalar>(x: &Array2<F>, k: usize, opts: &BoundsOptions) -> Result<F> {
    require_full_rank(x)?;
    let n_samples = x.ncols();
    check_partition_cap(n_samples, opts)?;
    if k > n_samples {
        return Err(Error::InvalidArgument("subset size exceeds N".into()));
    }
    let p = row_space_projection(x)?;
    let mut best = F::zero();
    let mut combos = Combinations::new(n_samples, k);
    while let Some(s) = combos.next_subset() {
        let comp = complement(n_samples, s);
        if comp.is_empty() {
            continue;
        }
        // rows of X_{I^c}^T (XX^T)^{-1} X are rows of P indexed by I^c
        let mut col_max = F::zero();
        for t in 0..n_samples {
            let sum: F = comp.iter().map(|&i| p[[i, t]].abs()).sum();
            col_max = col_max.max(sum);
        }
        best = best.max(col_max);
    }
    Ok(best)
}

/// Smallest k >= nu_n with v1(k) <= 1.
pub fn k1_value<F: Scalar>(x: &Array2<F>, opts: &BoundsOptions) -> Result<usize> {
    let n_samples = x.ncols();
    check_partition_cap(n_samples, opts)?;
    let (nu, _) = genericity_index(x, GenericityMode::Exact, opts.nu_cap.max(opts.partition_cap))?;
    for k in nu..=n_samples {
        if v1_value(x, k, opts)? <= F::one() {
            return Ok(k);
        }
    }
    Ok(n_samples)
}

/// Smallest k with v2(k) <= 1/2.
pub fn k2_value<F: Scalar>(x: &Array2<F>, opts: &BoundsOptions) -> Result<usize> {
    let n_samples = x.ncols();
    check_partition_cap(n_samples, opts)?;
    for k in 1..=n_samples {
        if v2_value(x, k, opts)? <= F::real(0.5) {
            return Ok(k);
        }
    }
    Ok(n_samples)
}

fn check_partition_cap(n_samples: usize, opts: &BoundsOptions) -> Result<()> {
    if n_samples > opts.partition_cap {
        return Err(Error::CapExceeded(format!(
            "partition enumeration allows N <= {}, got {n_samples}",
            opts.partition_cap
        )));
    }
    Ok(())
}

fn complement(n: usize, subset: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &i in subset {
        mask[i] = true;
    }
    (0..n).filter(|&i| !mask[i]).collect()
}

/// Threshold on |I0|: any parameter with strictly more zero residuals than
/// `N - 1/(2 r(X))` is the unique l1 minimizer.
pub fn sufficient_threshold_r<F: Scalar>(x: &Array2<F>) -> Result<F> {
    let r = r_value(x)?;
    Ok(F::real(x.ncols() as f64) - F::one() / (F::real(2.0) * r))
}

#[derive(Debug, Clone, Copy)]
pub enum ErrorBoundMode {
    Exact,
    Sampled { trials: usize, seed: u64 },
}

/// Constants of the estimation-error bound and the maximizing subset of K1.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct ErrorBoundConstants<F> {
    pub k1: F,
    pub k2: F,
    pub j_set: Vec<usize>,
    pub exactness: Exactness,
}

/// K1 and K2: maxima over subsets J with |J| >= nu_n(X) of
/// `sqrt(|J|) ||(XX^T)^{-1}(I + E_J + 2 E_J^2 + E_J^3) X_J||_2` and
/// `sqrt(|J|) ||(X_J X_J^T)^{-1} X_J||_2`, where
/// `E_J = (X_{J^c} X_{J^c}^T)(X_J X_J^T)^{-1}`.
pub fn error_bound_constants<F: Scalar>(
    x: &Array2<F>,
    mode: ErrorBoundMode,
    opts: &BoundsOptions,
) -> Result<ErrorBoundConstants<F>> {
    require_full_rank(x)?;
    let n_samples = x.ncols();
    let (nu, _) = genericity_index(x, GenericityMode::Exact, opts.nu_cap.max(opts.subset_cap))?;
    match mode {
        ErrorBoundMode::Exact => {
            if n_samples > opts.subset_cap {
                return Err(Error::CapExceeded(format!(
                    "error-bound enumeration allows N <= {}, got {n_samples}",
                    opts.subset_cap
                )));
            }
            let mut best = ErrorBoundConstants {
                k1: F::neg_infinity(),
                k2: F::neg_infinity(),
                j_set: vec![],
                exactness: Exactness::Exact,
            };
            for m in nu..=n_samples {
                let mut combos = Combinations::new(n_samples, m);
                while let Some(s) = combos.next_subset() {
                    if let Some((c1, c2)) = subset_constants(x, s) {
                        if c1 > best.k1 {
                            best.k1 = c1;
                            best.j_set = s.to_vec();
                        }
                        best.k2 = best.k2.max(c2);
                    }
                }
            }
            Ok(best)
        }
        ErrorBoundMode::Sampled { trials, seed } => {
            let mut rng = substream(seed, Stream::SystemCoefficients);
            let mut best = ErrorBoundConstants {
                k1: F::neg_infinity(),
                k2: F::neg_infinity(),
                j_set: vec![],
                exactness: Exactness::SampledLowerBound,
            };
            for _ in 0..trials {
                let m = rng.gen_range(nu..=n_samples);
                let subset = sample_subset(&mut rng, n_samples, m);
                if let Some((c1, c2)) = subset_constants(x, &subset) {
                    if c1 > best.k1 {
                        best.k1 = c1;
                        best.j_set = subset;
                    }
                    best.k2 = best.k2.max(c2);
                }
            }
            Ok(best)
        }
    }
}

fn subset_constants<F: Scalar>(x: &Array2<F>, j: &[usize]) -> Option<(F, F)> {
    let n = x.nrows();
    let xj = select_columns(x, j);
    let lu_j = Lu::new(&gram(&xj), "error-bound subset gram").ok()?;
    let comp = complement(x.ncols(), j);
    let e = if comp.is_empty() {
        Array2::zeros((n, n))
    } else {
        let xc = select_columns(x, &comp);
        // E_J = (X_{J^c} X_{J^c}^T) (X_J X_J^T)^{-1}
        lu_j.solve_mat(&gram(&xc)).t().to_owned()
    };
    let e2 = e.dot(&e);
    let e3 = e2.dot(&e);
    let mut m = Array2::eye(n);
    m = m + &e + &e2.mapv(|v| v * F::real(2.0)) + &e3;
    let lu_full = Lu::new(&gram(x), "error-bound full gram").ok()?;
    let a1 = lu_full.solve_mat(&m.dot(&xj));
    let a2 = lu_j.solve_mat(&xj);
    let root = F::real(j.len() as f64).sqrt();
    Some((root * spectral_norm(&a1), root * spectral_norm(&a2)))
}

/// Evaluates the error bound
/// `K1 eps + lambda K2 + K1 M sqrt(|J ∩ outliers| / |J|)`.
pub fn evaluate_error_bound<F: Scalar>(
    constants: &ErrorBoundConstants<F>,
    eps: F,
    m_max: F,
    lambda: F,
    outlier_set: &[usize],
) -> F {
    let j = &constants.j_set;
    let overlap = j.iter().filter(|t| outlier_set.contains(t)).count();
    let ratio = if j.is_empty() { F::zero() } else { F::real(overlap as f64 / j.len() as f64) };
    constants.k1 * eps + lambda * constants.k2 + constants.k1 * m_max * ratio.sqrt()
}

/// All l0 minimizers found by exhaustive interpolation over rank-n column
/// subsets, with the minimum nonzero-residual count.
#[derive(Debug, Clone)]
pub struct L0Result<F> {
    pub minimizers: Vec<Array1<F>>,
    pub objective: usize,
}

/// Brute-force l0 solver (noiseless intent): enumerates all size-n rank-n
/// column subsets, interpolates, counts zero residuals at 1e-9 relative and
/// returns all minimizers deduplicated at 1e-8.
pub fn l0_brute_force<F: Scalar>(dataset: &Dataset<F>, opts: &BoundsOptions) -> Result<L0Result<F>> {
    let x = &dataset.regressors;
    let y = &dataset.outputs;
    require_full_rank(x)?;
    let (n, n_samples) = (x.nrows(), x.ncols());
    if n_samples > opts.l0_cap {
        return Err(Error::CapExceeded(format!(
            "l0 brute force allows N <= {}, got {n_samples}",
            opts.l0_cap
        )));
    }
    if binomial(n_samples, n) > 5_000_000 {
        return Err(Error::CapExceeded("l0 brute force subset count too large".into()));
    }
    let ztol = F::real(1e-9);
    let mut best = usize::MAX;
    let mut minimizers: Vec<Array1<F>> = Vec::new();
    let mut combos = Combinations::new(n_samples, n);
    while let Some(s) = combos.next_subset() {
        let xs = select_columns(x, s);
        let lu = match Lu::new(&xs.t().to_owned(), "l0 interpolation") {
            Ok(lu) => lu,
            Err(_) => continue,
        };
        let ys = Array1::from_iter(s.iter().map(|&t| y[t]));
        let theta = lu.solve_vec(&ys);
        let mut nonzeros = 0usize;
        for t in 0..n_samples {
            let r = x.column(t).dot(&theta) - y[t];
            if r.abs() > ztol * (F::one() + y[t].abs()) {
                nonzeros += 1;
            }
        }
        if nonzeros > best {
            continue;
        }
        if nonzeros < best {
            best = nonzeros;
            minimizers.clear();
        }
        let dup = minimizers.iter().any(|m| {
            let d: F = (&theta - m).iter().map(|&v| v * v).sum::<F>().sqrt();
            d <= F::real(1e-8)
        });
        if !dup {
            minimizers.push(theta);
        }
    }
    if minimizers.is_empty() {
        return Err(Error::RankDeficient { rank: 0, rows: n });
    }
    Ok(L0Result { minimizers, objective: best })
}

/// Assembles the full report with per-field exactness flags; quantities whose
/// caps are exceeded are reported absent rather than guessed.
pub fn bounds_report<F: Scalar>(x: &Array2<F>, opts: &BoundsOptions) -> Result<BoundsReport<F>> {
    require_full_rank(x)?;
    let n_samples = x.ncols();
    let (nu_n, nu_flag) = if n_samples <= opts.nu_cap {
        genericity_index(x, GenericityMode::Exact, opts.nu_cap)?
    } else {
        genericity_index(
            x,
            GenericityMode::Sampled { trials: opts.sample_trials, seed: opts.sample_seed },
            opts.nu_cap,
        )?
    };
    let r = r_value(x)?;
    let r_n = rn_value(x)?;
    let (coherence, coh_flag) = match coherence_bound(x) {
        Ok(v) => (Some(v), Exactness::Exact),
        Err(_) => (None, Exactness::Absent),
    };
    let threshold_r = sufficient_threshold_r(x)?;
    let (k1, k2, k_flag) = if n_samples <= opts.partition_cap {
        (Some(k1_value(x, opts)?), Some(k2_value(x, opts)?), Exactness::Exact)
    } else {
        (None, None, Exactness::Absent)
    };
    Ok(BoundsReport {
        nu_n,
        r,
        r_n,
        coherence_bound: coherence,
        threshold_r,
        k1,
        k2,
        exactness: ExactnessFlags { nu_n: nu_flag, k1: k_flag, k2: k_flag, coherence_bound: coh_flag },
    })
}

/// Scales every column to unit 2-norm (bound-comparison preprocessing).
pub fn normalize_columns<F: Scalar>(x: &Array2<F>) -> Array2<F> {
    let mut out = x.clone();
    for t in 0..x.ncols() {
        let nrm = out.column(t).iter().map(|&v| v * v).sum::<F>().sqrt();
        if nrm > F::zero() {
            out.column_mut(t).mapv_inplace(|v| v / nrm);
        }
    }
    out
}
