//! Estimators: plain, weighted and iteratively reweighted l1 regression, the
//! noise-aware regularized variant, the multivariable sum-of-norms estimator,
//! the geometric median and the inlier-oracle least squares baseline.

mod first_order;
mod lad;
mod median;
mod regularized;

pub use median::{geometric_median, median_subgradient_gap};
pub use regularized::{regularized_closed_form, regularized_objective, solve_regularized, RegularizedSolution};

use crate::certificates;
use crate::datamodel::{Dataset, MultiDataset, DEFAULT_PARTITION_TOL};
use crate::error::{Error, Result};
use crate::linalg::{default_rank, lstsq, select_columns, select_entries};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Algorithm selector for the l1 path: `ExactLp` is the vertex (simplex-type)
/// solver, `FirstOrder` the operator-splitting fallback for large N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactLp,
    FirstOrder,
}

#[derive(Debug, Clone)]
pub struct SolverOptions<F> {
    /// Duality-gap / certificate tolerance.
    pub opt_tol: F,
    pub max_iter: usize,
    pub method: Method,
}

impl<F: Scalar> Default for SolverOptions<F> {
    fn default() -> Self {
        Self { opt_tol: F::real(1e-9), max_iter: 100_000, method: Method::ExactLp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
    InfeasibleInput,
}

/// Parameter estimate plus the residual vector phi(theta) = y - X^T theta.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct Estimate<F> {
    pub theta: Array1<F>,
    pub residuals: Array1<F>,
    pub objective: F,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Reweighted solve: the final estimate plus the iterate trace
/// (`trace[0]` is the plain uniformly-weighted solution).
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct ReweightedEstimate<F> {
    pub estimate: Estimate<F>,
    pub trace: Vec<Estimate<F>>,
}

/// Multivariable estimate for the sum-of-norms problem.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct MatrixEstimate<F> {
    pub a: Array2<F>,
    pub objective: F,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Crate-internal hook for the certificate module: plain LAD on an arbitrary
/// full-row-rank system, returning the vertex minimizer.
pub(crate) fn lad_vertex<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    max_iter: usize,
) -> Result<(Array1<F>, usize)> {
    let w = Array1::from_elem(x.ncols(), F::one());
    let sol = lad::solve_lad_vertex(x, y, &w, max_iter)?;
    Ok((sol.theta, sol.iterations))
}

fn check_inputs<F: Scalar>(dataset: &Dataset<F>) -> Result<()> {
    if dataset.regressors.iter().any(|v| !v.is_finite())
        || dataset.outputs.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("dataset"));
    }
    let r = default_rank(&dataset.regressors);
    if r < dataset.dim() {
        return Err(Error::RankDeficient { rank: r, rows: dataset.dim() });
    }
    Ok(())
}

/// Minimizes `sum_t |y_t - theta^T x_t|`; `status` is `Optimal` only when the
/// returned point passes the optimality certificate at `opts.opt_tol`.
pub fn solve_l1<F: Scalar>(dataset: &Dataset<F>, opts: &SolverOptions<F>) -> Result<Estimate<F>> {
    let weights = Array1::from_elem(dataset.len(), F::one());
    solve_weighted_inner(dataset, &weights, opts, false)
}

/// Weighted variant `sum_t w_t |y_t - theta^T x_t|` with nonnegative weights.
pub fn solve_weighted_l1<F: Scalar>(
    dataset: &Dataset<F>,
    weights: &Array1<F>,
    opts: &SolverOptions<F>,
) -> Result<Estimate<F>> {
    if weights.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            context: "solve_weighted_l1 weights",
            expected: dataset.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < F::zero()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if weights.iter().all(|w| *w == F::zero()) {
        return Err(Error::InvalidArgument("weights must not all be zero".into()));
    }
    solve_weighted_inner(dataset, weights, opts, true)
}

fn solve_weighted_inner<F: Scalar>(
    dataset: &Dataset<F>,
    weights: &Array1<F>,
    opts: &SolverOptions<F>,
    weighted_objective: bool,
) -> Result<Estimate<F>> {
    check_inputs(dataset)?;
    let x = &dataset.regressors;
    let y = &dataset.outputs;
    let (theta, iterations, converged) = match opts.method {
        Method::ExactLp => {
            let sol = lad::solve_lad_vertex(x, y, weights, opts.max_iter)?;
            (sol.theta, sol.iterations, sol.converged)
        }
        Method::FirstOrder => {
            let sol = first_order::solve_weighted_l1_admm(x, y, weights, opts.opt_tol, opts.max_iter)?;
            (sol.theta, sol.iterations, sol.converged)
        }
    };
    let residuals = dataset.residuals(&theta);
    let objective = if weighted_objective {
        residuals.iter().zip(weights.iter()).map(|(&r, &w)| w * r.abs()).sum()
    } else {
        residuals.iter().map(|r| r.abs()).sum()
    };
    let status = if !converged {
        SolveStatus::IterationLimit
    } else {
        let value = certificates::weighted_optimality_value(
            dataset,
            &theta,
            weights,
            F::real(DEFAULT_PARTITION_TOL),
        )?;
        if value <= F::one() + opts.opt_tol {
            SolveStatus::Optimal
        } else {
            SolveStatus::IterationLimit
        }
    };
    Ok(Estimate { theta, residuals, objective, status, iterations })
}

/// Normalized reweighting weights `w_t = xi_t / sum xi`, with
/// `xi_t = 1 / (|residual_t| + delta)`.
pub fn reweight_weights<F: Scalar>(residuals: &Array1<F>, delta: F) -> Array1<F> {
    let xi = residuals.mapv(|r| F::one() / (r.abs() + delta));
    let total: F = xi.iter().copied().sum();
    xi.mapv(|v| v / total)
}

/// Default smoothing constant: `1e-4 * (1 + median |y|)`.
pub fn default_reweight_delta<F: Scalar>(dataset: &Dataset<F>) -> F {
    let mut mags: Vec<F> = dataset.outputs.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = mags[mags.len() / 2];
    F::real(1e-4) * (F::one() + med)
}

/// Iteratively reweighted l1: `r_max + 1` weighted solves starting from
/// uniform weights. Objectives in the trace are plain (unweighted) l1 norms so
/// the rounds are comparable.
pub fn solve_reweighted_l1<F: Scalar>(
    dataset: &Dataset<F>,
    r_max: usize,
    delta: F,
    opts: &SolverOptions<F>,
) -> Result<ReweightedEstimate<F>> {
    if !(delta > F::zero()) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let n_samples = dataset.len();
    let mut weights = Array1::from_elem(n_samples, F::one() / F::real(n_samples as f64));
    let mut trace = Vec::with_capacity(r_max + 1);
    for _round in 0..=r_max {
        let mut est = solve_weighted_inner(dataset, &weights, opts, true)?;
        est.objective = est.residuals.iter().map(|r| r.abs()).sum();
        weights = reweight_weights(&est.residuals, delta);
        trace.push(est);
    }
    let estimate = trace.last().expect("at least one round").clone();
    Ok(ReweightedEstimate { estimate, trace })
}

/// Sum-of-norms estimator `min_A sum_t ||y_t - A x_t||_2`. For m = 1 the
/// problem reduces to the scalar l1 solver; otherwise ADMM with block
/// soft-thresholding. `status` is `Optimal` only when the T-type certificate
/// accepts the point at `opts.opt_tol`.
pub fn solve_sum_of_norms<F: Scalar>(
    mdataset: &MultiDataset<F>,
    opts: &SolverOptions<F>,
) -> Result<MatrixEstimate<F>> {
    let x = &mdataset.regressors;
    let y = &mdataset.outputs;
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mdataset"));
    }
    let n = mdataset.dim();
    let r = default_rank(x);
    if r < n {
        return Err(Error::RankDeficient { rank: r, rows: n });
    }
    let m = mdataset.output_dim();
    if m == 1 {
        let scalar = Dataset::without_truth(x.clone(), y.row(0).to_owned())?;
        let est = solve_l1(&scalar, opts)?;
        let mut a = Array2::zeros((1, n));
        a.row_mut(0).assign(&est.theta);
        return Ok(MatrixEstimate { a, objective: est.objective, status: est.status, iterations: est.iterations });
    }
    let sol = first_order::solve_sum_of_norms_admm(x, y, opts.opt_tol, opts.max_iter)?;
    let resid = mdataset.residual_matrix(&sol.a);
    let objective: F = (0..mdataset.len())
        .map(|t| resid.column(t).iter().map(|&v| v * v).sum::<F>().sqrt())
        .sum();
    let status = if !sol.converged {
        SolveStatus::IterationLimit
    } else if certificates::t3_feasible_at(
        mdataset,
        &sol.a,
        F::real(DEFAULT_PARTITION_TOL),
        F::one() + opts.opt_tol,
    )? {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterationLimit
    };
    Ok(MatrixEstimate { a: sol.a, objective, status, iterations: sol.iterations })
}

/// Ordinary least squares restricted to the given inlier columns; the
/// objective is the 2-norm of the inlier residuals.
pub fn least_squares_oracle<F: Scalar>(dataset: &Dataset<F>, inliers: &[usize]) -> Result<Estimate<F>> {
    let n = dataset.dim();
    let n_samples = dataset.len();
    let mut seen = vec![false; n_samples];
    for &t in inliers {
        if t >= n_samples || seen[t] {
            return Err(Error::InvalidArgument("inlier indices must be unique and in range".into()));
        }
        seen[t] = true;
    }
    let xi = select_columns(&dataset.regressors, inliers);
    let rank = default_rank(&xi);
    if rank < n {
        return Err(Error::RankDeficient { rank, rows: n });
    }
    let yi = select_entries(&dataset.outputs, inliers);
    let theta = lstsq(&xi.t().to_owned(), &yi)?;
    let residuals = dataset.residuals(&theta);
    let objective = inliers.iter().map(|&t| residuals[t] * residuals[t]).sum::<F>().sqrt();
    Ok(Estimate { theta, residuals, objective, status: SolveStatus::Optimal, iterations: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{generate, generate_multi, GenSpec, SignMode};
    use ndarray::array;

    fn opts() -> SolverOptions<f64> {
        SolverOptions::default()
    }

    fn location_dataset() -> Dataset<f64> {
        Dataset::without_truth(array![[1.0, 1.0, 1.0]], array![1.0, 2.0, 9.0]).unwrap()
    }

    #[test]
    fn l1_location_is_median() {
        let est = solve_l1(&location_dataset(), &opts()).unwrap();
        assert_eq!(est.theta[0], 2.0);
        assert_eq!(est.status, SolveStatus::Optimal);
        assert!((est.objective - 8.0).abs() < 1e-12);
    }

    #[test]
    fn l1_clean_data_recovers_exactly() {
        let spec = GenSpec::gaussian(4, 40, 21);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let est = solve_l1(&ds, &opts()).unwrap();
        let theta0 = &ds.truth.as_ref().unwrap().theta0;
        let err: f64 = (&est.theta - theta0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err < 1e-10, "error {err}");
        assert_eq!(est.status, SolveStatus::Optimal);
    }

    #[test]
    fn l1_recovers_under_heavy_outliers() {
        let mut spec = GenSpec::gaussian(4, 500, 33);
        spec.outlier_fraction = 0.6;
        spec.outlier_mean = 100.0;
        spec.outlier_std = 1000f64.sqrt();
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let est = solve_l1(&ds, &opts()).unwrap();
        let theta0 = &ds.truth.as_ref().unwrap().theta0;
        let err: f64 = (&est.theta - theta0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-5, "error {err}");
    }

    #[test]
    fn l1_rejects_rank_deficient() {
        let ds = Dataset::without_truth(array![[1.0, 2.0], [2.0, 4.0]], array![1.0, 2.0]).unwrap();
        assert!(matches!(solve_l1(&ds, &opts()), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn weighted_uniform_matches_plain() {
        let mut spec = GenSpec::gaussian(3, 30, 5);
        spec.outlier_fraction = 0.2;
        spec.outlier_std = 20.0;
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let plain = solve_l1(&ds, &opts()).unwrap();
        let w = Array1::from_elem(30, 1.0 / 30.0);
        let weighted = solve_weighted_l1(&ds, &w, &opts()).unwrap();
        let d: f64 = (&plain.theta - &weighted.theta).iter().map(|v| v.abs()).sum();
        assert!(d < 1e-9);
    }

    #[test]
    fn weighted_median_example() {
        let ds = Dataset::without_truth(array![[1.0, 1.0, 1.0]], array![0.0, 10.0, 20.0]).unwrap();
        let est = solve_weighted_l1(&ds, &array![10.0, 1.0, 1.0], &opts()).unwrap();
        assert_eq!(est.theta[0], 0.0);
    }

    #[test]
    fn weighted_rejects_bad_weights() {
        let ds = location_dataset();
        assert!(solve_weighted_l1(&ds, &array![1.0, -1.0, 1.0], &opts()).is_err());
        assert!(solve_weighted_l1(&ds, &array![0.0, 0.0, 0.0], &opts()).is_err());
    }

    #[test]
    fn reweighted_round_zero_is_plain_l1() {
        let mut spec = GenSpec::gaussian(3, 40, 6);
        spec.outlier_fraction = 0.3;
        spec.outlier_std = 30.0;
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let plain = solve_l1(&ds, &opts()).unwrap();
        let rw = solve_reweighted_l1(&ds, 0, default_reweight_delta(&ds), &opts()).unwrap();
        assert_eq!(rw.trace.len(), 1);
        let d: f64 = (&plain.theta - &rw.estimate.theta).iter().map(|v| v.abs()).sum();
        assert!(d < 1e-9);
    }

    #[test]
    fn reweight_weights_are_normalized_and_positive() {
        let r: Array1<f64> = array![0.0, -3.0, 10.0, 0.5];
        let w = reweight_weights(&r, 1e-4);
        assert!(w.iter().all(|v| *v > 0.0));
        assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_order_matches_exact_lp() {
        let mut spec = GenSpec::gaussian(3, 60, 12);
        spec.outlier_fraction = 0.25;
        spec.outlier_mean = 40.0;
        spec.outlier_std = 10.0;
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let exact = solve_l1(&ds, &opts()).unwrap();
        let mut fo = opts();
        fo.method = Method::FirstOrder;
        fo.opt_tol = 1e-10;
        let approx = solve_l1(&ds, &fo).unwrap();
        assert!((exact.objective - approx.objective).abs() <= 1e-6 * (1.0 + exact.objective));
    }

    #[test]
    fn sum_of_norms_m1_equals_l1() {
        let mut spec = GenSpec::gaussian(3, 30, 9);
        spec.outlier_fraction = 0.3;
        spec.outlier_mean = 50.0;
        spec.outlier_std = 5.0;
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let md: crate::datamodel::MultiDataset<f64> = generate_multi(&spec, 1).unwrap();
        let e1 = solve_l1(&ds, &opts()).unwrap();
        let e2 = solve_sum_of_norms(&md, &opts()).unwrap();
        for j in 0..3 {
            assert_eq!(e1.theta[j], e2.a[[0, j]]);
        }
    }

    #[test]
    fn sum_of_norms_clean_recovers_a0() {
        let spec = GenSpec::gaussian(3, 40, 14);
        let md: crate::datamodel::MultiDataset<f64> = generate_multi(&spec, 2).unwrap();
        let est = solve_sum_of_norms(&md, &opts()).unwrap();
        let a0 = &md.truth.as_ref().unwrap().a0;
        let err: f64 = (&est.a - a0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err < 1e-6, "error {err}");
        assert_eq!(est.status, SolveStatus::Optimal);
    }

    #[test]
    fn sum_of_norms_column_reduction_to_geometric_median() {
        // n = 1, x_t = 1: the estimate column is the geometric median
        let x = Array2::from_elem((1, 7), 1.0);
        let mut y = Array2::zeros((2, 7));
        for t in 0..4 {
            y[[0, t]] = 2.0;
            y[[1, t]] = -1.0;
        }
        y[[0, 4]] = 10.0;
        y[[1, 5]] = -7.0;
        y[[0, 6]] = 3.0;
        y[[1, 6]] = 8.0;
        let md = MultiDataset::new(x, y.clone(), None).unwrap();
        let est = solve_sum_of_norms(&md, &opts()).unwrap();
        let gm = geometric_median(&y, &opts()).unwrap();
        for i in 0..2 {
            assert!((est.a[[i, 0]] - gm[i]).abs() < 1e-6);
        }
        // majority of coincident points pins the median
        assert!((gm[0] - 2.0).abs() < 1e-9);
        assert!((gm[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn geometric_median_examples() {
        // collinear points: the middle one
        let pts = array![[0.0, 1.0, 9.0], [0.0, 0.0, 0.0]];
        let gm = geometric_median(&pts, &opts()).unwrap();
        assert!((gm[0] - 1.0).abs() < 1e-9);
        assert!(gm[1].abs() < 1e-9);

        // equilateral triangle: the centroid
        let h = 3f64.sqrt() / 2.0;
        let pts = array![[0.0, 1.0, 0.5], [0.0, 0.0, h]];
        let gm = geometric_median(&pts, &opts()).unwrap();
        assert!((gm[0] - 0.5).abs() < 1e-7);
        assert!((gm[1] - h / 3.0).abs() < 1e-7);

        // strict majority at a single point returns that point
        let mut pts = Array2::zeros((2, 9));
        for t in 0..5 {
            pts[[0, t]] = 4.0;
            pts[[1, t]] = -2.0;
        }
        for t in 5..9 {
            pts[[0, t]] = (t - 5) as f64 * 13.0;
            pts[[1, t]] = 100.0 - t as f64;
        }
        let gm = geometric_median(&pts, &opts()).unwrap();
        assert_eq!(gm[0], 4.0);
        assert_eq!(gm[1], -2.0);
    }

    #[test]
    fn oracle_least_squares_properties() {
        let spec = GenSpec::gaussian(3, 25, 30);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let all: Vec<usize> = (0..25).collect();
        let est = least_squares_oracle(&ds, &all).unwrap();
        let theta0 = &ds.truth.as_ref().unwrap().theta0;
        let err: f64 = (&est.theta - theta0).iter().map(|v| v.abs()).sum();
        assert!(err < 1e-10);

        // exactly n independent clean samples interpolate
        let est = least_squares_oracle(&ds, &[0, 1, 2]).unwrap();
        let err: f64 = (&est.theta - theta0).iter().map(|v| v.abs()).sum();
        assert!(err < 1e-8);
    }

    #[test]
    fn oracle_orthogonality_on_noisy_subset() {
        let mut spec = GenSpec::gaussian(3, 60, 31);
        spec.noise_snr_db = Some(15.0);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let inliers: Vec<usize> = (0..40).collect();
        let est = least_squares_oracle(&ds, &inliers).unwrap();
        let xi = select_columns(&ds.regressors, &inliers);
        let ri = select_entries(&est.residuals, &inliers);
        let g = xi.dot(&ri);
        let scale: f64 = ds.outputs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(g.iter().all(|v| v.abs() <= 1e-10 * (1.0 + scale)));
    }

    #[test]
    fn solver_objective_no_worse_than_truth_and_ls() {
        for seed in 0..5u64 {
            let mut spec = GenSpec::gaussian(3, 40, 100 + seed);
            spec.outlier_fraction = 0.3;
            spec.outlier_mean = 10.0;
            spec.outlier_std = 30.0;
            spec.noise_snr_db = Some(20.0);
            spec.sign_mode = if seed % 2 == 0 { SignMode::TwoSided } else { SignMode::PositiveOnly };
            let ds: Dataset<f64> = generate(&spec).unwrap();
            let est = solve_l1(&ds, &opts()).unwrap();
            let theta0 = &ds.truth.as_ref().unwrap().theta0;
            let obj_truth: f64 = ds.residuals(theta0).iter().map(|r| r.abs()).sum();
            let all: Vec<usize> = (0..40).collect();
            let ls = least_squares_oracle(&ds, &all).unwrap();
            let obj_ls: f64 = ds.residuals(&ls.theta).iter().map(|r| r.abs()).sum();
            assert!(est.objective <= obj_truth + 1e-9 * (1.0 + obj_truth));
            assert!(est.objective <= obj_ls + 1e-9 * (1.0 + obj_ls));
        }
    }
}
