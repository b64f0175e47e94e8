//! Operator-splitting solvers: the over-relaxed ADMM fallback for the scalar
//! weighted l1 problem (duality-gap stopping) and the block soft-thresholding
//! ADMM for the multivariable sum-of-norms problem.

use crate::error::{Error, Result};
use crate::linalg::{gram, Lu};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};

const RELAXATION: f64 = 1.8;

pub(crate) fn soft<F: Scalar>(v: F, k: F) -> F {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        F::zero()
    }
}

pub(crate) struct FirstOrderSolution<F> {
    pub theta: Array1<F>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted l1 regression by ADMM on the split `r = y - X^T theta`; stops when
/// a feasible dual point certifies a duality gap below `tol` (relative).
pub(crate) fn solve_weighted_l1_admm<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    w: &Array1<F>,
    tol: F,
    max_iter: usize,
) -> Result<FirstOrderSolution<F>> {
    let n_samples = x.ncols();
    let lu = Lu::new(&gram(x), "l1 admm gram")?;
    let alpha = F::real(RELAXATION);
    let mut rho = F::one();
    let mut theta = lu.solve_vec(&x.dot(y));
    let mut r = y - &x.t().dot(&theta);
    let mut u: Array1<F> = Array1::zeros(n_samples);
    let mut iterations = 0;

    while iterations < max_iter {
        theta = lu.solve_vec(&x.dot(&(y - &r - &u)));
        let ax = x.t().dot(&theta);
        let h = ax.mapv(|v| v * alpha) + (y - &r).mapv(|v| v * (F::one() - alpha));
        let r_old = r.clone();
        for t in 0..n_samples {
            r[t] = soft(y[t] - h[t] - u[t], w[t] / rho);
        }
        u = u + &h + &r - y;
        iterations += 1;

        if iterations % 25 == 0 {
            let objective: F = (0..n_samples).map(|t| w[t] * (y[t] - x.column(t).dot(&theta)).abs()).sum();
            // dual candidate: project rho*u onto null(X), then shrink into the
            // box; the feasible set is symmetric so |y^T nu| is a valid bound
            let nu = u.mapv(|v| v * rho);
            let correction = x.t().dot(&lu.solve_vec(&x.dot(&nu)));
            let nu_feas = &nu - &correction;
            let mut scale = F::one();
            for t in 0..n_samples {
                if nu_feas[t].abs() > w[t] {
                    scale = scale.min(w[t] / nu_feas[t].abs());
                }
            }
            let lower: F = (0..n_samples).map(|t| y[t] * nu_feas[t] * scale).sum::<F>().abs();
            let gap = objective - lower;
            if gap <= tol * (F::one() + objective.abs()) {
                return Ok(FirstOrderSolution { theta, iterations, converged: true });
            }
            // residual balancing
            let pri: F = (0..n_samples)
                .map(|t| {
                    let v = x.column(t).dot(&theta) + r[t] - y[t];
                    v * v
                })
                .sum::<F>()
                .sqrt();
            let dvec = x.dot(&(&r - &r_old));
            let dual = rho * dvec.iter().map(|&v| v * v).sum::<F>().sqrt();
            if pri > F::real(10.0) * dual {
                rho = rho * F::real(2.0);
                u = u.mapv(|v| v / F::real(2.0));
            } else if dual > F::real(10.0) * pri {
                rho = rho / F::real(2.0);
                u = u.mapv(|v| v * F::real(2.0));
            }
        }
    }
    Ok(FirstOrderSolution { theta, iterations, converged: false })
}

pub(crate) struct SumOfNormsSolution<F> {
    pub a: Array2<F>,
    pub iterations: usize,
    pub converged: bool,
}

/// Sum-of-norms regression `min sum_t ||y_t - A x_t||_2` by ADMM with the
/// column-wise 2-norm proximal map; stops on primal/dual residuals.
pub(crate) fn solve_sum_of_norms_admm<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    tol: F,
    max_iter: usize,
) -> Result<SumOfNormsSolution<F>> {
    let (m, n_samples) = (y.nrows(), y.ncols());
    if x.ncols() != n_samples {
        return Err(Error::DimensionMismatch {
            context: "sum_of_norms outputs",
            expected: x.ncols(),
            actual: n_samples,
        });
    }
    let lu = Lu::new(&gram(x), "sum_of_norms gram")?;
    let alpha = F::real(RELAXATION);
    let mut rho = F::one();
    let mut e: Array2<F> = Array2::zeros((m, n_samples));
    let mut u: Array2<F> = Array2::zeros((m, n_samples));
    let mut a: Array2<F> = Array2::zeros((m, x.nrows()));
    let scale_y = y.iter().map(|&v| v * v).sum::<F>().sqrt() + F::one();
    let mut iterations = 0;

    while iterations < max_iter {
        // A = (Y - E - U) X^T (X X^T)^{-1}
        let rhs = x.dot(&(y - &e - &u).t().to_owned());
        a = lu.solve_mat(&rhs).t().to_owned();
        let ax = a.dot(x);
        let h = ax.mapv(|v| v * alpha) + (y - &e).mapv(|v| v * (F::one() - alpha));
        let e_old = e.clone();
        let kappa = F::one() / rho;
        for t in 0..n_samples {
            let mut col = Array1::from_iter((0..m).map(|i| y[[i, t]] - h[[i, t]] - u[[i, t]]));
            let norm = col.iter().map(|&v| v * v).sum::<F>().sqrt();
            let shrink = if norm > kappa { (norm - kappa) / norm } else { F::zero() };
            col = col.mapv(|v| v * shrink);
            for i in 0..m {
                e[[i, t]] = col[i];
            }
        }
        u = u + &h + &e - y;
        iterations += 1;

        if iterations % 10 == 0 {
            let pri_mat = &a.dot(x) + &e - y;
            let pri = pri_mat.iter().map(|&v| v * v).sum::<F>().sqrt();
            let dmat = (&e - &e_old).dot(&x.t().to_owned());
            let dual = rho * dmat.iter().map(|&v| v * v).sum::<F>().sqrt();
            if pri <= tol * scale_y && dual <= tol * scale_y {
                return Ok(SumOfNormsSolution { a, iterations, converged: true });
            }
            if pri > F::real(10.0) * dual {
                rho = rho * F::real(2.0);
                u = u.mapv(|v| v / F::real(2.0));
            } else if dual > F::real(10.0) * pri {
                rho = rho / F::real(2.0);
                u = u.mapv(|v| v * F::real(2.0));
            }
        }
    }
    Ok(SumOfNormsSolution { a, iterations, converged: false })
}
