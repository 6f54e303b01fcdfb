//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! The matrices decomposed here are class-by-class Gram matrices (a few
//! hundred rows at most), where Jacobi is accurate to working precision and
//! needs no tridiagonal reduction.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOLERANCE: f64 = 1e-9;
// Entries this close (relatively) to the column maximum count as tied for the sign pivot.
const SIGN_TIE_TOLERANCE: f64 = 1e-12;

/// Eigenpairs sorted by descending eigenvalue; column `j` of `eigenvectors`
/// belongs to `eigenvalues[j]`.
#[derive(Clone, Debug)]
pub struct EvdResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl EvdResult {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        DenseMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)]).sum()
        })
    }
}

/// Decomposes a symmetric matrix as `A = V diag(λ) Vᵀ`.
///
/// The input is symmetrized as `(A + Aᵀ)/2` first; asymmetry beyond
/// `1e-9 * max(1, max|a|)` is rejected. Each eigenvector column is signed so
/// that its largest-magnitude entry is non-negative; entries within a relative
/// `1e-12` of the maximum are tied and the first of them is used.
pub fn symmetric_evd(a: &DenseMatrix) -> Result<EvdResult> {
    if !a.is_square() {
        return Err(Error::dimension(
            "symmetric eigendecomposition",
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("symmetric eigendecomposition"));
    }
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asymmetry = asymmetry.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }

    let mut m = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = DenseMatrix::identity(n);
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = n < 2;
    for sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].abs())
            .sum();
        if off == 0.0 {
            converged = true;
            break;
        }
        // Skip tiny rotations during the first sweeps.
        let threshold = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    m[(p, q)] = 0.0;
                    continue;
                }
                if apq.abs() <= threshold {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                m[(p, q)] = 0.0;
                for j in 0..p {
                    rotate(&mut m, s, tau, (j, p), (j, q));
                }
                for j in p + 1..q {
                    rotate(&mut m, s, tau, (p, j), (j, q));
                }
                for j in q + 1..n {
                    rotate(&mut m, s, tau, (p, j), (q, j));
                }
                for j in 0..n {
                    rotate(&mut v, s, tau, (j, p), (j, q));
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            size: n,
            sweeps: MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut eigenvectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    for c in 0..n {
        let max = (0..n).fold(0.0f64, |m, r| m.max(eigenvectors[(r, c)].abs()));
        let pivot = (0..n)
            .find(|&r| eigenvectors[(r, c)].abs() >= max * (1.0 - SIGN_TIE_TOLERANCE))
            .unwrap_or(0);
        if eigenvectors[(pivot, c)] < 0.0 {
            for r in 0..n {
                eigenvectors[(r, c)] = -eigenvectors[(r, c)];
            }
        }
    }
    Ok(EvdResult {
        eigenvalues,
        eigenvectors,
    })
}

#[inline]
fn rotate(m: &mut DenseMatrix, s: f64, tau: f64, a: (usize, usize), b: (usize, usize)) {
    let g = m[a];
    let h = m[b];
    m[a] = g - s * (h + g * tau);
    m[b] = h + s * (g - h * tau);
}
