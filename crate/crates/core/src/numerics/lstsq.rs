use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Damping added to the normal matrix when it is not numerically positive definite.
pub const TIKHONOV_FALLBACK: f64 = 1e-10;

// Relative pivot floor below which a Cholesky factorization is treated as failed.
const PIVOT_FLOOR: f64 = 1e-13;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    /// Factors `a`; returns `None` when a pivot falls below `1e-13 * max(diag)`.
    pub fn factor(a: &DenseMatrix) -> Option<Self> {
        debug_assert!(a.is_square());
        let n = a.rows();
        let diag_max = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
        let floor = PIVOT_FLOOR * diag_max.max(f64::MIN_POSITIVE);
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(Cholesky { l })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }
}

fn add_to_diagonal(a: &mut DenseMatrix, v: f64) {
    for i in 0..a.rows() {
        a[(i, i)] += v;
    }
}

/// Minimizes `‖b − aθ‖₂` through the normal equations `aᵀa θ = aᵀb`.
///
/// A rank-deficient `aᵀa` is damped by `1e-10·I`, which selects (to within the
/// damping) the minimum-norm minimizer.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::dimension(
            "least squares",
            "non-empty design matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    if b.len() != a.rows() {
        return Err(Error::dimension("least squares right-hand side", a.rows(), b.len()));
    }
    let mut normal = a.gram();
    let mut rhs = a.tr_matvec(b)?;
    let chol = match Cholesky::factor(&normal) {
        Some(c) => c,
        None => {
            add_to_diagonal(&mut normal, TIKHONOV_FALLBACK);
            Cholesky::factor(&normal).ok_or(Error::Singular {
                context: "least squares",
                hint: "normal matrix is not positive definite even after damping",
            })?
        }
    };
    chol.solve_in_place(&mut rhs);
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least squares solution"));
    }
    Ok(rhs)
}

/// Solves `(xᵀx + λI) W = xᵀy` for `W` (`x.cols × y.cols`).
///
/// Fails with a singularity error when the regularized normal matrix is not
/// positive definite.
pub fn ridge_solve(x: &DenseMatrix, y: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    if x.rows() != y.rows() {
        return Err(Error::dimension("ridge regression targets", x.rows(), y.rows()));
    }
    let mut normal = x.gram();
    add_to_diagonal(&mut normal, lambda);
    let chol = Cholesky::factor(&normal).ok_or(Error::Singular {
        context: "ridge regression",
        hint: "use a ridge lambda > 0",
    })?;
    let xty = x.transpose().matmul(y)?;
    let mut w = DenseMatrix::zeros(x.cols(), y.cols());
    let mut col = vec![0.0; x.cols()];
    for c in 0..y.cols() {
        for (r, v) in col.iter_mut().enumerate() {
            *v = xty[(r, c)];
        }
        chol.solve_in_place(&mut col);
        for (r, v) in col.iter().enumerate() {
            w[(r, c)] = *v;
        }
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("ridge regression solution"));
    }
    Ok(w)
}

/// `‖b − aθ‖₂`
pub fn residual_norm(a: &DenseMatrix, theta: &[f64], b: &[f64]) -> f64 {
    a.row_iter()
        .zip(b)
        .map(|(row, bi)| {
            let r = bi - super::dot(row, theta);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}
