//! Small dense linear algebra for per-pixel covariance work: eigenvalues
//! of real symmetric matrices (cyclic Jacobi) and complex linear solves
//! (Gauss-Jordan with partial pivoting). Matrices are row-major slices.

use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use crate::error::{Error, Result};

/// Eigenvalues of an n×n real symmetric matrix, ascending. The input is
/// read row-major; only symmetry up to rounding is assumed.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || n == 0 {
        return Err(Error::ShapeMismatch {
            context: "eigenvalue input must be square and non-empty".into(),
        });
    }
    let mut m = a.to_vec();
    let scale = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _ in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[p * n + q] * m[p * n + q];
                }
            }
            if off.sqrt() <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (m[q * n + q] - m[p * n + p]) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = m[k * n + p];
                        let akq = m[k * n + q];
                        m[k * n + p] = c * akp - s * akq;
                        m[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = m[p * n + k];
                        let aqk = m[q * n + k];
                        m[p * n + k] = c * apk - s * aqk;
                        m[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eig)
}

/// Solves A x = b for a complex n×n system by Gauss-Jordan elimination
/// with partial pivoting. Errors on (numerically) singular A.
pub fn solve_complex(a: &[Complex64], b: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    if a.len() != n * n || b.len() != n || n == 0 {
        return Err(Error::ShapeMismatch {
            context: "solve needs an n×n matrix and length-n right-hand side".into(),
        });
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let amax = m.iter().map(|v| v.norm_sqr()).fold(0.0f64, f64::max);
    if amax == 0.0 {
        return Err(Error::SingularSystem);
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].norm_sqr();
        for row in (col + 1)..n {
            let v = m[row * n + col].norm_sqr();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= amax * 1e-24 {
            return Err(Error::SingularSystem);
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let inv = Complex64::new(1.0, 0.0) / m[col * n + col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let upd = m[col * n + k] * f;
                m[row * n + k] -= upd;
            }
            let upd = f * x[col];
            x[row] -= upd;
        }
    }
    for i in 0..n {
        x[i] /= m[i * n + i];
    }
    Ok(x)
}
