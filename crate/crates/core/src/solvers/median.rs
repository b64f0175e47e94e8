//! Geometric median by damped fixed-point iteration with the standard guard
//! when an iterate lands on (or should stop at) a data point.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solvers::SolverOptions;
use ndarray::{Array1, Array2};

/// Minimizes `sum_t ||y_t - a||_2` over `a`; `points` holds one point per
/// column. Convergence is measured by the subgradient condition: the summed
/// unit directions from non-coincident points must have norm at most the
/// number of coincident points (plus `opt_tol`).
pub fn geometric_median<F: Scalar>(points: &Array2<F>, opts: &SolverOptions<F>) -> Result<Array1<F>> {
    let (m, n_pts) = (points.nrows(), points.ncols());
    if n_pts == 0 || m == 0 {
        return Err(Error::InvalidArgument("geometric_median needs at least one point".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("geometric_median points"));
    }
    let scale = points.iter().fold(F::zero(), |mx, v| mx.max(v.abs())) + F::one();
    let coincide_tol = F::epsilon() * F::real(64.0) * scale;

    let mut a = points.mean_axis(ndarray::Axis(1)).unwrap();
    for _ in 0..opts.max_iter {
        let (gap, _, nearest) = subgradient_state(points, &a, coincide_tol);
        if gap <= opts.opt_tol {
            return Ok(a);
        }
        // when hovering near a data point, test that point's own optimality
        if let Some(t) = nearest {
            let cand = points.column(t).to_owned();
            let (gap_c, _, _) = subgradient_state(points, &cand, coincide_tol);
            if gap_c <= opts.opt_tol {
                return Ok(cand);
            }
        }
        a = step(points, &a, coincide_tol);
    }
    Ok(a)
}

/// Max(0, ||R|| - k) where R sums unit directions over non-coincident points
/// and k counts coincident ones; also the index of a nearby data point, if any.
pub fn median_subgradient_gap<F: Scalar>(points: &Array2<F>, a: &Array1<F>) -> (F, usize) {
    let scale = points.iter().fold(F::zero(), |mx, v| mx.max(v.abs())) + F::one();
    let (gap, k, _) = subgradient_state(points, a, F::epsilon() * F::real(64.0) * scale);
    (gap, k)
}

fn subgradient_state<F: Scalar>(
    points: &Array2<F>,
    a: &Array1<F>,
    coincide_tol: F,
) -> (F, usize, Option<usize>) {
    let (m, n_pts) = (points.nrows(), points.ncols());
    let mut r: Array1<F> = Array1::zeros(m);
    let mut coincident = 0usize;
    let mut nearest = None;
    let mut nearest_d = F::infinity();
    for t in 0..n_pts {
        let diff = &points.column(t).to_owned() - a;
        let d = diff.iter().map(|&v| v * v).sum::<F>().sqrt();
        if d <= coincide_tol {
            coincident += 1;
        } else {
            r = r + &diff.mapv(|v| v / d);
            if d < nearest_d {
                nearest_d = d;
                nearest = Some(t);
            }
        }
    }
    let rn = r.iter().map(|&v| v * v).sum::<F>().sqrt();
    let gap = (rn - F::real(coincident as f64)).max(F::zero());
    (gap, coincident, nearest)
}

fn step<F: Scalar>(points: &Array2<F>, a: &Array1<F>, coincide_tol: F) -> Array1<F> {
    let (m, n_pts) = (points.nrows(), points.ncols());
    let mut num: Array1<F> = Array1::zeros(m);
    let mut den = F::zero();
    let mut r: Array1<F> = Array1::zeros(m);
    let mut coincident = 0usize;
    for t in 0..n_pts {
        let col = points.column(t).to_owned();
        let diff = &col - a;
        let d = diff.iter().map(|&v| v * v).sum::<F>().sqrt();
        if d <= coincide_tol {
            coincident += 1;
            continue;
        }
        num = num + &col.mapv(|v| v / d);
        den = den + F::one() / d;
        r = r + &diff.mapv(|v| v / d);
    }
    if den == F::zero() {
        return a.clone();
    }
    let target = num.mapv(|v| v / den);
    if coincident == 0 {
        return target;
    }
    // damped step away from a visited data point
    let rn = r.iter().map(|&v| v * v).sum::<F>().sqrt();
    if rn <= F::real(coincident as f64) {
        return a.clone();
    }
    let damp = (F::one() - F::real(coincident as f64) / rn).max(F::zero());
    a + &(&target - a).mapv(|v| v * damp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand_distr::{Distribution, Normal};

    #[test]
    fn subgradient_condition_holds_at_returned_point() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = substream(33, Stream::SystemCoefficients);
        let opts = SolverOptions::default();
        for m in 2..4usize {
            for n_pts in [3usize, 7, 20, 51] {
                let mut pts = Array2::zeros((m, n_pts));
                for t in 0..n_pts {
                    for i in 0..m {
                        pts[[i, t]] = normal.sample(&mut rng) * 5.0;
                    }
                }
                let med = geometric_median(&pts, &opts).unwrap();
                let (gap, _) = median_subgradient_gap(&pts, &med);
                assert!(gap <= opts.opt_tol * 10.0, "m={m} N={n_pts}: gap {gap}");
            }
        }
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let opts = SolverOptions::default();
        let empty: Array2<f64> = Array2::zeros((2, 0));
        assert!(geometric_median(&empty, &opts).is_err());
        let bad = Array2::from_elem((2, 3), f64::NAN);
        assert!(geometric_median(&bad, &opts).is_err());
    }

    #[test]
    fn single_point_is_its_own_median() {
        let pts = Array2::from_shape_vec((3, 1), vec![1.0, -2.0, 0.5]).unwrap();
        let med = geometric_median(&pts, &SolverOptions::default()).unwrap();
        assert_eq!(med.to_vec(), vec![1.0, -2.0, 0.5]);
    }
}
