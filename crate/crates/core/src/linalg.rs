//! Dense linear algebra kernels: LU solves, Householder least squares,
//! one-sided Jacobi singular values, rank decisions and the projection
//! matrices used by the estimators and bounds.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{s, Array1, Array2};

/// Relative singular-value threshold declaring full rank.
pub const RANK_RTOL: f64 = 1e-10;

/// LU factorization with partial pivoting of a square matrix.
pub struct Lu<F> {
    lu: Array2<F>,
    perm: Vec<usize>,
}

impl<F: Scalar> Lu<F> {
    pub fn new(a: &Array2<F>, context: &'static str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                actual: a.ncols(),
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let amax = lu.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        let tiny = amax * F::epsilon() * F::real(n.max(4) as f64);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[[k, k]].abs();
            for i in k + 1..n {
                let v = lu[[i, k]].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(Error::Singular(context));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[[k, j]];
                    lu[[k, j]] = lu[[p, j]];
                    lu[[p, j]] = t;
                }
            }
            let piv = lu[[k, k]];
            for i in k + 1..n {
                let m = lu[[i, k]] / piv;
                lu[[i, k]] = m;
                for j in k + 1..n {
                    let v = lu[[k, j]];
                    lu[[i, j]] = lu[[i, j]] - m * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &Array1<F>) -> Array1<F> {
        let n = self.perm.len();
        let mut x = Array1::zeros(n);
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[[i, j]] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[[i, j]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        x
    }

    pub fn solve_mat(&self, b: &Array2<F>) -> Array2<F> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            let x = self.solve_vec(&col.to_owned());
            out.column_mut(j).assign(&x);
        }
        out
    }
}

pub fn solve<F: Scalar>(a: &Array2<F>, b: &Array1<F>, context: &'static str) -> Result<Array1<F>> {
    Ok(Lu::new(a, context)?.solve_vec(b))
}

pub fn inverse<F: Scalar>(a: &Array2<F>, context: &'static str) -> Result<Array2<F>> {
    let lu = Lu::new(a, context)?;
    Ok(lu.solve_mat(&Array2::eye(a.nrows())))
}

/// Least squares `min ||a x - b||_2` by Householder QR; `a` is m-by-k with m >= k
/// and numerically full column rank.
pub fn lstsq<F: Scalar>(a: &Array2<F>, b: &Array1<F>) -> Result<Array1<F>> {
    let (m, k) = (a.nrows(), a.ncols());
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            context: "lstsq rhs",
            expected: m,
            actual: b.len(),
        });
    }
    if m < k {
        return Err(Error::InvalidArgument("lstsq needs at least as many rows as columns".into()));
    }
    let mut r = a.clone();
    let mut y = b.clone();
    let scale = r.iter().fold(F::zero(), |mx, v| mx.max(v.abs()));
    for j in 0..k {
        // Householder vector for column j below the diagonal
        let mut norm = F::zero();
        for i in j..m {
            norm = norm + r[[i, j]] * r[[i, j]];
        }
        let norm = norm.sqrt();
        if norm <= scale * F::epsilon() * F::real(m as f64) {
            return Err(Error::Singular("lstsq: rank-deficient columns"));
        }
        let alpha = if r[[j, j]] >= F::zero() { -norm } else { norm };
        let mut v: Array1<F> = Array1::zeros(m - j);
        for i in j..m {
            v[i - j] = r[[i, j]];
        }
        v[0] = v[0] - alpha;
        let vnorm2: F = v.iter().map(|&x| x * x).sum();
        if vnorm2 > F::zero() {
            let two = F::real(2.0);
            for col in j..k {
                let mut dot = F::zero();
                for i in j..m {
                    dot = dot + v[i - j] * r[[i, col]];
                }
                let c = two * dot / vnorm2;
                for i in j..m {
                    r[[i, col]] = r[[i, col]] - c * v[i - j];
                }
            }
            let mut dot = F::zero();
            for i in j..m {
                dot = dot + v[i - j] * y[i];
            }
            let c = two * dot / vnorm2;
            for i in j..m {
                y[i] = y[i] - c * v[i - j];
            }
        }
        r[[j, j]] = alpha;
    }
    // back substitution on the k-by-k upper triangle
    let mut x = Array1::zeros(k);
    for i in (0..k).rev() {
        let mut acc = y[i];
        for j in i + 1..k {
            acc = acc - r[[i, j]] * x[j];
        }
        x[i] = acc / r[[i, i]];
    }
    Ok(x)
}

/// Singular values by one-sided Jacobi, descending. Exact enough near zero to
/// support the relative rank rule.
pub fn singular_values<F: Scalar>(a: &Array2<F>) -> Vec<F> {
    let work = if a.nrows() < a.ncols() { a.t().to_owned() } else { a.clone() };
    let (m, k) = (work.nrows(), work.ncols());
    if m == 0 || k == 0 {
        return vec![];
    }
    let mut b = work;
    let thresh = F::epsilon() * F::real(4.0);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k - 1 {
            for q in p + 1..k {
                let mut app = F::zero();
                let mut aqq = F::zero();
                let mut apq = F::zero();
                for i in 0..m {
                    let x = b[[i, p]];
                    let y = b[[i, q]];
                    app = app + x * x;
                    aqq = aqq + y * y;
                    apq = apq + x * y;
                }
                if apq.abs() <= thresh * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (F::real(2.0) * apq);
                let t = {
                    let sign = if tau >= F::zero() { F::one() } else { -F::one() };
                    sign / (tau.abs() + (F::one() + tau * tau).sqrt())
                };
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = t * c;
                for i in 0..m {
                    let x = b[[i, p]];
                    let y = b[[i, q]];
                    b[[i, p]] = c * x - s * y;
                    b[[i, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<F> = (0..k)
        .map(|j| {
            let mut acc = F::zero();
            for i in 0..m {
                acc = acc + b[[i, j]] * b[[i, j]];
            }
            acc.sqrt()
        })
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Numerical rank at relative threshold `rtol` (singular-value ratio rule).
pub fn rank<F: Scalar>(a: &Array2<F>, rtol: F) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = singular_values(a);
    let smax = sv[0];
    if smax <= F::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s / smax >= rtol).count()
}

pub fn default_rank<F: Scalar>(a: &Array2<F>) -> usize {
    rank(a, F::real(RANK_RTOL))
}

pub fn spectral_norm<F: Scalar>(a: &Array2<F>) -> F {
    singular_values(a).first().copied().unwrap_or_else(F::zero)
}

/// Operator inf-norm: max absolute row sum.
pub fn op_inf_norm<F: Scalar>(a: &Array2<F>) -> F {
    (0..a.nrows()).fold(F::zero(), |mx, i| {
        let row: F = a.row(i).iter().map(|v| v.abs()).sum();
        mx.max(row)
    })
}

/// Operator 1-norm: max absolute column sum.
pub fn op_one_norm<F: Scalar>(a: &Array2<F>) -> F {
    (0..a.ncols()).fold(F::zero(), |mx, j| {
        let col: F = a.column(j).iter().map(|v| v.abs()).sum();
        mx.max(col)
    })
}

pub fn max_abs<F: Scalar>(a: &Array2<F>) -> F {
    a.iter().fold(F::zero(), |m, v| m.max(v.abs()))
}

/// `X X^T` of an n-by-N matrix.
pub fn gram<F: Scalar>(x: &Array2<F>) -> Array2<F> {
    x.dot(&x.t())
}

/// Orthogonal projection onto the row space: `P = X^T (X X^T)^{-1} X`.
pub fn row_space_projection<F: Scalar>(x: &Array2<F>) -> Result<Array2<F>> {
    let lu = Lu::new(&gram(x), "row_space_projection")?;
    let w = lu.solve_mat(x); // (XX^T)^{-1} X
    Ok(x.t().dot(&w))
}

/// Residual projector `Psi = I_N - X^T (X X^T)^{-1} X`.
pub fn residual_projector<F: Scalar>(x: &Array2<F>) -> Result<Array2<F>> {
    let p = row_space_projection(x)?;
    let mut psi = Array2::eye(x.ncols());
    psi = psi - p;
    Ok(psi)
}

/// Column indices picked by Householder QR with column pivoting; at most
/// `max_cols` indices, stopping when the remaining columns are negligible.
pub fn pivoted_columns<F: Scalar>(x: &Array2<F>, max_cols: usize) -> Vec<usize> {
    let (n, cols) = (x.nrows(), x.ncols());
    let mut r = x.clone();
    let mut pivots = Vec::new();
    let mut order: Vec<usize> = (0..cols).collect();
    let scale = max_abs(x);
    let steps = max_cols.min(n).min(cols);
    for j in 0..steps {
        // pick remaining column with largest trailing norm
        let mut best = j;
        let mut best_norm = F::zero();
        for c in j..cols {
            let mut nrm = F::zero();
            for i in j..n {
                nrm = nrm + r[[i, c]] * r[[i, c]];
            }
            if nrm > best_norm {
                best_norm = nrm;
                best = c;
            }
        }
        if best_norm.sqrt() <= scale * F::epsilon() * F::real(n as f64 * 16.0) {
            break;
        }
        if best != j {
            order.swap(best, j);
            for i in 0..n {
                let t = r[[i, j]];
                r[[i, j]] = r[[i, best]];
                r[[i, best]] = t;
            }
        }
        pivots.push(order[j]);
        // Householder reflector on rows j.. of column j
        let mut norm = F::zero();
        for i in j..n {
            norm = norm + r[[i, j]] * r[[i, j]];
        }
        let norm = norm.sqrt();
        let alpha = if r[[j, j]] >= F::zero() { -norm } else { norm };
        let mut v: Array1<F> = Array1::zeros(n - j);
        for i in j..n {
            v[i - j] = r[[i, j]];
        }
        v[0] = v[0] - alpha;
        let vnorm2: F = v.iter().map(|&x| x * x).sum();
        if vnorm2 > F::zero() {
            let two = F::real(2.0);
            for col in j..cols {
                let mut dot = F::zero();
                for i in j..n {
                    dot = dot + v[i - j] * r[[i, col]];
                }
                let c = two * dot / vnorm2;
                for i in j..n {
                    r[[i, col]] = r[[i, col]] - c * v[i - j];
                }
            }
        }
        r[[j, j]] = alpha;
        r.slice_mut(s![j + 1.., j]).fill(F::zero());
    }
    pivots
}

/// Gathers the columns of `x` indexed by `idx`.
pub fn select_columns<F: Scalar>(x: &Array2<F>, idx: &[usize]) -> Array2<F> {
    let mut out = Array2::zeros((x.nrows(), idx.len()));
    for (j, &t) in idx.iter().enumerate() {
        out.column_mut(j).assign(&x.column(t));
    }
    out
}

pub fn select_entries<F: Scalar>(v: &Array1<F>, idx: &[usize]) -> Array1<F> {
    Array1::from_iter(idx.iter().map(|&t| v[t]))
}
