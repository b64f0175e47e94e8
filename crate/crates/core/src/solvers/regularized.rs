//! Noise-aware regularized estimator: minimizes
//! `0.5 ||y - X^T theta - phi||_2^2 + lambda ||phi||_1` by accelerated
//! proximal gradient on the reduced objective in phi (the theta block is
//! eliminated through the residual projector), plus the literal closed-form
//! evaluation on a prescribed support/sign pattern.

use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{default_rank, gram, residual_projector, singular_values, Lu, RANK_RTOL};
use crate::scalar::Scalar;
use crate::solvers::first_order::soft;
use crate::solvers::SolverOptions;
use ndarray::{Array1, Array2};
use serde::Serialize;

/// Solution of the regularized problem: the estimate, the gross-error
/// estimate phi, its support and a subgradient of the l1 term.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Serialize")]
pub struct RegularizedSolution<F> {
    pub theta: Array1<F>,
    pub phi: Array1<F>,
    pub lambda: F,
    pub support: Vec<usize>,
    pub signs: Array1<F>,
}

pub fn solve_regularized<F: Scalar>(
    dataset: &Dataset<F>,
    lambda: F,
    opts: &SolverOptions<F>,
) -> Result<RegularizedSolution<F>> {
    if !(lambda > F::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be positive and finite".into()));
    }
    let x = &dataset.regressors;
    let y = &dataset.outputs;
    let n = dataset.dim();
    let n_samples = dataset.len();
    let r = default_rank(x);
    if r < n {
        return Err(Error::RankDeficient { rank: r, rows: n });
    }
    let psi = residual_projector(x)?;
    let psi_y = psi.dot(y);
    let lu = Lu::new(&gram(x), "solve_regularized gram")?;
    let y_scale = y.iter().fold(F::zero(), |m, v| m.max(v.abs())) + F::one();

    // FISTA with adaptive restart; step size 1 since Psi is a projector
    let mut phi: Array1<F> = Array1::zeros(n_samples);
    let mut phi_prev = phi.clone();
    let mut tk = F::one();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let tk_next = (F::one() + (F::one() + F::real(4.0) * tk * tk).sqrt()) / F::real(2.0);
        let beta = (tk - F::one()) / tk_next;
        let v = &phi + &(&phi - &phi_prev).mapv(|d| d * beta);
        let grad = psi.dot(&v) - &psi_y;
        let next = (&v - &grad).mapv(|z| soft(z, lambda));
        // restart when momentum points uphill
        let uphill: F = (&v - &next)
            .iter()
            .zip((&next - &phi).iter())
            .map(|(&a, &b)| a * b)
            .sum();
        phi_prev = phi;
        phi = next;
        tk = if uphill > F::zero() { F::one() } else { tk_next };
        iterations += 1;

        if iterations % 10 == 0 || iterations == opts.max_iter {
            let theta = lu.solve_vec(&x.dot(&(y - &phi)));
            let g = y - &phi - &x.t().dot(&theta);
            let mut viol = F::zero();
            for t in 0..n_samples {
                let vt = if phi[t] != F::zero() {
                    (lambda * sign(phi[t]) - g[t]).abs()
                } else {
                    (g[t].abs() - lambda).max(F::zero())
                };
                viol = viol.max(vt);
            }
            if viol <= opts.opt_tol * y_scale {
                return Ok(assemble(theta, phi, lambda, &g));
            }
        }
    }
    Err(Error::ConvergenceFailure("solve_regularized proximal gradient"))
}

/// Literal evaluation of the closed-form solution induced by a support and a
/// sign pattern on it; does not verify global optimality.
pub fn regularized_closed_form<F: Scalar>(
    dataset: &Dataset<F>,
    lambda: F,
    support: &[usize],
    support_signs: &[F],
) -> Result<RegularizedSolution<F>> {
    if !(lambda > F::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be positive and finite".into()));
    }
    if support.len() != support_signs.len() {
        return Err(Error::DimensionMismatch {
            context: "regularized_closed_form signs",
            expected: support.len(),
            actual: support_signs.len(),
        });
    }
    let n_samples = dataset.len();
    let mut seen = vec![false; n_samples];
    for &t in support {
        if t >= n_samples || seen[t] {
            return Err(Error::InvalidArgument("support indices must be unique and in range".into()));
        }
        seen[t] = true;
    }
    if support_signs.iter().any(|s| s.abs() != F::one()) {
        return Err(Error::InvalidArgument("support signs must be +1 or -1".into()));
    }
    let x = &dataset.regressors;
    let y = &dataset.outputs;
    let psi = residual_projector(x)?;
    let mut phi: Array1<F> = Array1::zeros(n_samples);
    if !support.is_empty() {
        // rank(Psi_{S^c}) = |S^c| precondition
        let mut cols = Array2::zeros((n_samples, support.len()));
        for (j, &t) in support.iter().enumerate() {
            cols.column_mut(j).assign(&psi.column(t));
        }
        let sv = singular_values(&cols);
        let ok = sv[0] > F::zero()
            && sv.len() >= support.len()
            && sv[support.len() - 1] / sv[0] >= F::real(RANK_RTOL);
        if !ok {
            return Err(Error::Singular("regularized_closed_form: Psi_{S^c} is column rank deficient"));
        }
        // Psi_{S^c}^T Psi_{S^c} = Psi[S^c, S^c] because Psi is an orthogonal projector
        let mut g = Array2::zeros((support.len(), support.len()));
        for (i, &ti) in support.iter().enumerate() {
            for (j, &tj) in support.iter().enumerate() {
                g[[i, j]] = psi[[ti, tj]];
            }
        }
        let psi_y = psi.dot(y);
        let rhs = Array1::from_iter(
            support.iter().zip(support_signs.iter()).map(|(&t, &s)| psi_y[t] - lambda * s),
        );
        let phi_sc = Lu::new(&g, "regularized_closed_form support gram")?.solve_vec(&rhs);
        for (j, &t) in support.iter().enumerate() {
            phi[t] = phi_sc[j];
        }
    }
    let lu = Lu::new(&gram(x), "regularized_closed_form gram")?;
    let theta = lu.solve_vec(&x.dot(&(y - &phi)));
    let g = y - &phi - &x.t().dot(&theta);
    let mut sol = assemble(theta, phi, lambda, &g);
    // keep the caller's support/sign declaration
    sol.support = support.to_vec();
    for (j, &t) in support.iter().enumerate() {
        sol.signs[t] = support_signs[j];
    }
    Ok(sol)
}

fn assemble<F: Scalar>(theta: Array1<F>, phi: Array1<F>, lambda: F, g: &Array1<F>) -> RegularizedSolution<F> {
    let support: Vec<usize> = (0..phi.len()).filter(|&t| phi[t] != F::zero()).collect();
    let signs = Array1::from_iter((0..phi.len()).map(|t| {
        if phi[t] != F::zero() {
            sign(phi[t])
        } else {
            clamp_unit(g[t] / lambda)
        }
    }));
    RegularizedSolution { theta, phi, lambda, support, signs }
}

fn sign<F: Scalar>(v: F) -> F {
    if v > F::zero() {
        F::one()
    } else if v < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

fn clamp_unit<F: Scalar>(v: F) -> F {
    v.max(-F::one()).min(F::one())
}

/// Objective of the regularized problem at a candidate pair.
pub fn regularized_objective<F: Scalar>(dataset: &Dataset<F>, theta: &Array1<F>, phi: &Array1<F>, lambda: F) -> F {
    let fit = &dataset.outputs - &dataset.regressors.t().dot(theta) - phi;
    let quad: F = fit.iter().map(|&v| v * v).sum();
    let l1: F = phi.iter().map(|v| v.abs()).sum();
    quad / F::real(2.0) + lambda * l1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::check_regularized_kkt;
    use crate::datamodel::{generate, GenSpec};
    use crate::linalg::op_inf_norm;
    use ndarray::array;

    fn opts() -> SolverOptions<f64> {
        let mut o = SolverOptions::default();
        o.opt_tol = 1e-10;
        o
    }

    #[test]
    fn large_lambda_gives_least_squares() {
        let mut spec = GenSpec::gaussian(2, 12, 19);
        spec.outlier_fraction = 0.25;
        spec.outlier_mean = 10.0;
        spec.outlier_std = 3.0;
        spec.noise_snr_db = Some(20.0);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let psi = residual_projector(&ds.regressors).unwrap();
        let lam = op_inf_norm(&psi.dot(&ds.outputs).insert_axis(ndarray::Axis(0)).to_owned()) * 1.001;
        let sol = solve_regularized(&ds, lam, &opts()).unwrap();
        assert!(sol.phi.iter().all(|v| *v == 0.0), "phi must vanish for large lambda");
        // theta is then the plain least squares estimate
        let all: Vec<usize> = (0..12).collect();
        let ls = crate::solvers::least_squares_oracle(&ds, &all).unwrap();
        let d: f64 = (&sol.theta - &ls.theta).iter().map(|v| v.abs()).sum();
        assert!(d < 1e-8, "difference {d}");
        // independent KKT evaluation confirms phi = 0 is optimal
        assert!(check_regularized_kkt(&ds, lam, &sol, 1e-7).unwrap());
    }

    #[test]
    fn clean_data_gives_truth_for_any_lambda() {
        let spec = GenSpec::gaussian(3, 15, 23);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let theta0 = ds.truth.as_ref().unwrap().theta0.clone();
        for lam in [0.05, 0.5, 5.0] {
            let sol = solve_regularized(&ds, lam, &opts()).unwrap();
            assert!(sol.phi.iter().all(|v| *v == 0.0));
            let d: f64 = (&sol.theta - &theta0).iter().map(|v| v.abs()).sum();
            assert!(d < 1e-9);
        }
    }

    #[test]
    fn matches_exhaustive_support_enumeration() {
        // n = 1, N = 3: every support/sign pattern evaluated literally
        let ds = Dataset::without_truth(
            array![[1.0, 0.8, 1.3]],
            array![1.1, 4.0, 1.6],
        )
        .unwrap();
        let lam = 0.35;
        let sol = solve_regularized(&ds, lam, &opts()).unwrap();
        let obj = regularized_objective(&ds, &sol.theta, &sol.phi, lam);
        let best = best_closed_form_objective(&ds, lam);
        assert!(obj <= best + 1e-9, "solver {obj} vs enumeration {best}");
        assert!(obj >= best - 1e-9, "enumeration found better: {best} vs {obj}");
    }

    fn best_closed_form_objective(ds: &Dataset<f64>, lam: f64) -> f64 {
        let n_samples = ds.len();
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << n_samples) {
            let support: Vec<usize> = (0..n_samples).filter(|t| mask & (1 << t) != 0).collect();
            let k = support.len();
            for signs_mask in 0..(1u32 << k) {
                let signs: Vec<f64> = (0..k)
                    .map(|i| if signs_mask & (1 << i) != 0 { 1.0 } else { -1.0 })
                    .collect();
                if let Ok(sol) = regularized_closed_form(ds, lam, &support, &signs) {
                    let obj = regularized_objective(ds, &sol.theta, &sol.phi, lam);
                    best = best.min(obj);
                }
            }
        }
        best
    }

    #[test]
    fn closed_form_empty_support_is_least_squares() {
        let spec = GenSpec::gaussian(2, 9, 31);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let sol = regularized_closed_form(&ds, 0.4, &[], &[]).unwrap();
        assert!(sol.phi.iter().all(|v| *v == 0.0));
        let all: Vec<usize> = (0..9).collect();
        let ls = crate::solvers::least_squares_oracle(&ds, &all).unwrap();
        let d: f64 = (&sol.theta - &ls.theta).iter().map(|v| v.abs()).sum();
        assert!(d < 1e-10);
    }

    #[test]
    fn closed_form_round_trips_through_kkt() {
        let mut spec = GenSpec::gaussian(2, 8, 37);
        spec.outlier_fraction = 0.25;
        spec.outlier_mean = 20.0;
        spec.outlier_std = 2.0;
        spec.noise_snr_db = Some(25.0);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let lam = 0.4;
        let sol = solve_regularized(&ds, lam, &opts()).unwrap();
        if !sol.support.is_empty() {
            let signs: Vec<f64> = sol.support.iter().map(|&t| sol.signs[t]).collect();
            let rebuilt = regularized_closed_form(&ds, lam, &sol.support, &signs).unwrap();
            assert!(check_regularized_kkt(&ds, lam, &rebuilt, 1e-7).unwrap());
            let d: f64 = (&rebuilt.theta - &sol.theta).iter().map(|v| v.abs()).sum();
            assert!(d < 1e-7, "difference {d}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let ds = Dataset::without_truth(array![[1.0, 1.0, 1.0]], array![1.0, 2.0, 3.0]).unwrap();
        assert!(solve_regularized(&ds, 0.0, &opts()).is_err());
        assert!(regularized_closed_form(&ds, 0.5, &[0], &[0.5]).is_err());
        assert!(regularized_closed_form(&ds, 0.5, &[0, 0], &[1.0, 1.0]).is_err());
    }
}
