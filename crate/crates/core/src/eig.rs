//! Symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Deterministic by construction: fixed sweep order, stable descending sort
//! of eigenvalues, and a sign rule (the eigenvector entry of largest
//! magnitude — lowest index on ties — is made positive) so repeated runs
//! produce byte-identical models.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Sweep limit before the solver gives up with a numeric error.
pub const MAX_SWEEPS: usize = 100;

/// Convergence threshold: off-diagonal Frobenius norm relative to the
/// input's Frobenius norm.
pub const OFF_DIAG_TOL: f64 = 1e-12;

/// Eigenvalues in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::argument(format!("non-finite eigenvalue {v}")));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::argument(
                "eigenvalues must be in non-increasing order",
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn off_diagonal_sq(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                let v = a.get(p, q);
                sum += v * v;
            }
        }
    }
    sum
}

/// Eigendecomposition of a symmetric matrix.
///
/// Returns the spectrum (descending) and the matrix whose column `j` is the
/// unit eigenvector of eigenvalue `j`, with `‖s − QΛQ^T‖_F ≤ 1e-8·‖s‖_F`.
pub fn sym_eig(s: &Matrix) -> Result<(Spectrum, Matrix)> {
    if s.rows() != s.cols() {
        return Err(Error::argument(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    if s.asymmetry() > 1e-8 {
        return Err(Error::argument(format!(
            "matrix is not symmetric (relative deviation {:.3e})",
            s.asymmetry()
        )));
    }

    let n = s.rows();
    let mut a = s.clone();
    let mut v = Matrix::identity(n);
    let norm = s.frobenius_sq().sqrt();
    let tol_sq = (OFF_DIAG_TOL * norm) * (OFF_DIAG_TOL * norm);

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        if off_diagonal_sq(&a) <= tol_sq {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                // Rutishauser's stable rotation parameters.
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - sn * vkq);
                    v.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
        sweeps += 1;
    }
    if !converged && off_diagonal_sq(&a) > tol_sq {
        return Err(Error::numeric(format!(
            "Jacobi iteration on {n}x{n} matrix did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    // Stable descending order keeps the solver's relative order on ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j)
            .partial_cmp(&a.get(i, i))
            .expect("diagonal entries are finite")
    });

    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut q = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        // Sign rule: make the entry of largest magnitude positive, taking
        // the lowest index on magnitude ties.
        let mut best = 0;
        for k in 1..n {
            if v.get(k, src).abs() > v.get(best, src).abs() {
                best = k;
            }
        }
        let flip = if v.get(best, src) < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            q.set(k, col, flip * v.get(k, src));
        }
    }

    Ok((Spectrum::new(values)?, q))
}
