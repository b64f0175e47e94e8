//! Exact weighted least-absolute-deviation solver.
//!
//! Works on the vertices of the piecewise-linear objective: a vertex is a
//! parameter interpolating n samples (the basis). Each iteration tests the
//! subgradient optimality condition along the n basis-exchange directions
//! and, if violated, performs an exact line search (a weighted-median step)
//! along the steepest one. At degenerate vertices (more zero residuals than
//! n) the direction test is only necessary, so the full subgradient
//! certificate program is solved there; when it fails, its dual witness is a
//! strict descent direction. The objective strictly decreases at every move,
//! so the method terminates at an exact minimizer.

use crate::error::{Error, Result};
use crate::linalg::{default_rank, pivoted_columns, select_columns, Lu};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};

pub(crate) struct LadSolution<F> {
    pub theta: Array1<F>,
    pub iterations: usize,
    pub converged: bool,
}

struct Workspace<F> {
    phi: Array1<F>,
    is_zero: Vec<bool>,
}

fn residual_state<F: Scalar>(x: &Array2<F>, y: &Array1<F>, theta: &Array1<F>, zero_eps: F) -> Workspace<F> {
    let phi = y - &x.t().dot(theta);
    let is_zero = (0..x.ncols())
        .map(|t| phi[t].abs() <= zero_eps * (F::one() + y[t].abs()))
        .collect();
    Workspace { phi, is_zero }
}

/// Minimizes `sum_t w_t |y_t - x_t^T theta|`. Requires rank(X) = n (checked by
/// callers); weights are nonnegative, not all zero.
pub(crate) fn solve_lad_vertex<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    w: &Array1<F>,
    max_iter: usize,
) -> Result<LadSolution<F>> {
    let (n, n_samples) = (x.nrows(), x.ncols());
    let mut basis = pivoted_columns(x, n);
    if basis.len() < n {
        return Err(Error::RankDeficient { rank: basis.len(), rows: n });
    }

    let zero_eps = F::epsilon() * F::real(256.0);
    let opt_eps = F::epsilon() * F::real(128.0);
    let lp_margin = F::real(1e-9);

    let mut theta = solve_basis(x, y, &basis)?;
    let mut snapped = true;
    let mut iterations = 0usize;

    while iterations < max_iter {
        let mut ws = residual_state(x, y, &theta, zero_eps);

        if snapped {
            // basis-exchange test; sufficient when the positive-weight zeros
            // are exactly the basis
            let xb = select_columns(x, &basis);
            let lu = Lu::new(&xb.t().to_owned(), "lad basis")?;
            theta = lu.solve_vec(&Array1::from_iter(basis.iter().map(|&t| y[t])));
            ws = residual_state(x, y, &theta, zero_eps);
            let d = lu.solve_mat(&Array2::eye(n));

            let mut best_j = usize::MAX;
            let mut best_excess = F::zero();
            let mut best_dir = F::one();
            let mut best_col: Array1<F> = Array1::zeros(n_samples);
            for j in 0..n {
                let dj = d.column(j).to_owned();
                let u = x.t().dot(&dj);
                let own = w[basis[j]];
                let mut signed = F::zero();
                let mut one_sided = F::zero();
                let mut scale = own;
                for t in 0..n_samples {
                    if t == basis[j] || w[t] == F::zero() {
                        continue;
                    }
                    let m = w[t] * u[t];
                    scale = scale + m.abs();
                    if ws.is_zero[t] {
                        one_sided = one_sided + m.abs();
                    } else if ws.phi[t] > F::zero() {
                        signed = signed + m;
                    } else {
                        signed = signed - m;
                    }
                }
                let excess = signed.abs() - (one_sided + own) - opt_eps * (scale + F::one());
                if excess > best_excess {
                    best_excess = excess;
                    best_j = j;
                    best_dir = if signed > F::zero() { F::one() } else { -F::one() };
                    best_col = u;
                }
            }
            if best_j != usize::MAX {
                let dir: Array1<F> = d.column(best_j).mapv(|v| v * best_dir);
                let u_all = best_col.mapv(|v| v * best_dir);
                if let Some(enter) = line_search(&ws, w, &u_all, n_samples)? {
                    basis[best_j] = enter;
                    iterations += 1;
                    continue;
                }
                let _ = dir;
                // numerically flat to the horizon; treat as converged
                return Ok(LadSolution { theta, iterations, converged: true });
            }
            // every positive-weight zero inside the basis: the exchange test
            // is the full subgradient condition
            let extra = (0..n_samples)
                .any(|t| ws.is_zero[t] && w[t] > F::zero() && !basis.contains(&t));
            if !extra {
                return Ok(LadSolution { theta, iterations, converged: true });
            }
        }

        // degenerate or non-vertex point: solve the certificate program on
        // the full zero set
        let zero_idx: Vec<usize> =
            (0..n_samples).filter(|&t| ws.is_zero[t] && w[t] > F::zero()).collect();
        let mut z_w: Array1<F> = Array1::zeros(n);
        let mut z_scale = F::one();
        for t in 0..n_samples {
            if ws.is_zero[t] || w[t] == F::zero() {
                continue;
            }
            let s = if ws.phi[t] > F::zero() { -F::one() } else { F::one() };
            let col = x.column(t);
            z_w = z_w + &col.mapv(|v| v * (w[t] * s));
            z_scale = z_scale + w[t] * col.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        }
        let mut a = select_columns(x, &zero_idx);
        for (j, &t) in zero_idx.iter().enumerate() {
            let wt = w[t];
            a.column_mut(j).mapv_inplace(|v| v * wt);
        }
        let lp = crate::certificates::min_inf_norm_program(&a, &z_w, z_scale, max_iter)?;
        if lp.value <= F::one() + lp_margin {
            return Ok(LadSolution { theta, iterations, converged: true });
        }
        let dir = match &lp.eta {
            Some(eta) => eta.mapv(|v| -v),
            None => {
                // infeasible program: z_w has a component outside the span of
                // the zero columns, which is itself a descent direction
                let q = crate::certificates::column_space_basis(&a);
                let proj = if q.ncols() == 0 { Array1::zeros(n) } else { q.dot(&q.t().dot(&z_w)) };
                (&proj - &z_w).mapv(|v| v)
            }
        };
        let u_all = x.t().dot(&dir);
        match line_search_full(&ws, w, &u_all, n_samples)? {
            Some(alpha) => {
                theta = &theta + &dir.mapv(|v| v * alpha);
                iterations += 1;
                // try to re-snap onto a vertex basis among the new zeros
                let ws2 = residual_state(x, y, &theta, zero_eps);
                let zeros2: Vec<usize> = (0..n_samples).filter(|&t| ws2.is_zero[t]).collect();
                let xz = select_columns(x, &zeros2);
                if default_rank(&xz) == n {
                    let piv = pivoted_columns(&xz, n);
                    basis = piv.into_iter().map(|j| zeros2[j]).collect();
                    snapped = true;
                } else {
                    snapped = false;
                }
            }
            None => {
                return Ok(LadSolution { theta, iterations, converged: true });
            }
        }
    }

    Ok(LadSolution { theta, iterations, converged: false })
}

/// Walks the positive breakpoints of `alpha -> sum w |phi - alpha u|` until
/// the subderivative turns nonnegative; returns the entering sample.
fn line_search<F: Scalar>(
    ws: &Workspace<F>,
    w: &Array1<F>,
    u: &Array1<F>,
    n_samples: usize,
) -> Result<Option<usize>> {
    Ok(walk_breakpoints(ws, w, u, n_samples)?.map(|(_, t)| t))
}

/// Same walk, returning the step length.
fn line_search_full<F: Scalar>(
    ws: &Workspace<F>,
    w: &Array1<F>,
    u: &Array1<F>,
    n_samples: usize,
) -> Result<Option<F>> {
    Ok(walk_breakpoints(ws, w, u, n_samples)?.map(|(alpha, _)| alpha))
}

fn walk_breakpoints<F: Scalar>(
    ws: &Workspace<F>,
    w: &Array1<F>,
    u: &Array1<F>,
    n_samples: usize,
) -> Result<Option<(F, usize)>> {
    // slope at 0+ of the piecewise-linear restriction
    let mut slope = F::zero();
    for t in 0..n_samples {
        if w[t] == F::zero() {
            continue;
        }
        let m = w[t] * u[t];
        if ws.is_zero[t] {
            slope = slope + m.abs();
        } else if ws.phi[t] > F::zero() {
            slope = slope - m;
        } else {
            slope = slope + m;
        }
    }
    if slope >= F::zero() {
        return Ok(None);
    }
    let mut breaks: Vec<(F, F, usize)> = Vec::new();
    for t in 0..n_samples {
        if ws.is_zero[t] || w[t] == F::zero() {
            continue;
        }
        if u[t].abs() <= F::epsilon() * (F::one() + u[t].abs()) {
            continue;
        }
        let alpha = ws.phi[t] / u[t];
        if alpha > F::zero() {
            breaks.push((alpha, F::real(2.0) * w[t] * u[t].abs(), t));
        }
    }
    breaks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (alpha, jump, t) in breaks {
        slope = slope + jump;
        if slope >= F::zero() {
            return Ok(Some((alpha, t)));
        }
    }
    Ok(None)
}

fn solve_basis<F: Scalar>(x: &Array2<F>, y: &Array1<F>, basis: &[usize]) -> Result<Array1<F>> {
    let xb = select_columns(x, basis);
    let lu = Lu::new(&xb.t().to_owned(), "lad basis")?;
    Ok(lu.solve_vec(&Array1::from_iter(basis.iter().map(|&t| y[t]))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ones(n: usize) -> Array1<f64> {
        Array1::from_elem(n, 1.0)
    }

    #[test]
    fn location_problem_returns_median() {
        let x: Array2<f64> = array![[1.0, 1.0, 1.0]];
        let y = array![1.0, 2.0, 9.0];
        let sol = solve_lad_vertex(&x, &y, &ones(3), 1000).unwrap();
        assert_eq!(sol.theta[0], 2.0);
        assert!(sol.converged);
    }

    #[test]
    fn weighted_median() {
        let x: Array2<f64> = array![[1.0, 1.0, 1.0]];
        let y = array![0.0, 10.0, 20.0];
        let w = array![10.0, 1.0, 1.0];
        let sol = solve_lad_vertex(&x, &y, &w, 1000).unwrap();
        assert_eq!(sol.theta[0], 0.0);
    }

    #[test]
    fn interpolates_consistent_weighted_support() {
        // weight on two rank-sufficient samples only
        let x: Array2<f64> = array![[1.0, 0.0, 1.0, 2.0], [0.0, 1.0, 1.0, 1.0]];
        let y = array![1.0, 2.0, 100.0, -50.0];
        let w = array![1.0, 1.0, 0.0, 0.0];
        let sol = solve_lad_vertex(&x, &y, &w, 1000).unwrap();
        assert!((sol.theta[0] - 1.0).abs() < 1e-12);
        assert!((sol.theta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_from_majority_clean_samples() {
        let x: Array2<f64> = array![
            [1.0, 0.0, 1.0, 2.0, -1.0, 0.5, 1.5],
            [0.0, 1.0, 1.0, -1.0, 2.0, 1.0, -0.5]
        ];
        let theta0 = array![3.0, -2.0];
        let mut y = x.t().dot(&theta0);
        y[2] += 100.0; // single gross error
        let sol = solve_lad_vertex(&x, &y, &ones(7), 1000).unwrap();
        assert!((sol.theta[0] - 3.0).abs() < 1e-10);
        assert!((sol.theta[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn escapes_degenerate_nonoptimal_vertex() {
        // many exact zeros at theta0 but theta0 is not the l1 minimizer:
        // one-sided gross errors on a majority of affine-ish samples
        let n_samples = 25;
        let mut x: Array2<f64> = Array2::zeros((2, n_samples));
        let mut rng_state = 88172645463325252u64;
        let mut next = || {
            // xorshift for a deterministic spread
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for t in 0..n_samples {
            x[[0, t]] = next();
            x[[1, t]] = 1.0;
        }
        let theta0 = array![1.0, -2.0];
        let mut y = x.t().dot(&theta0);
        for t in 0..15 {
            y[t] += 50.0 + t as f64; // 60% positive gross errors
        }
        let sol = solve_lad_vertex(&x, &y, &ones(n_samples), 10_000).unwrap();
        assert!(sol.converged);
        let obj_sol: f64 = (0..n_samples)
            .map(|t| (y[t] - x.column(t).dot(&sol.theta)).abs())
            .sum();
        let obj_truth: f64 = (0..n_samples)
            .map(|t| (y[t] - x.column(t).dot(&theta0)).abs())
            .sum();
        assert!(obj_sol < obj_truth - 1e-9, "sol {obj_sol} truth {obj_truth}");
    }
}
