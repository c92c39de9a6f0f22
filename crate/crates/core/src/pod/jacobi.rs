//! Cyclic Jacobi eigensolver for dense symmetric matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Off-diagonal stopping threshold, relative to the Frobenius norm.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds them as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Zeroes eigenvalues in `[-1e-10 lambda_1, 0)`; fails below that.
    pub fn clamp_nonnegative(mut self) -> Result<Self> {
        let floor = -1e-10 * self.largest().abs();
        for v in &mut self.values {
            if *v < floor {
                return Err(Error::NotPositiveDefinite);
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(self)
    }

    /// Count of eigenvalues above `rel * lambda_1`.
    pub fn rank(&self, rel: f64) -> usize {
        let cut = rel * self.largest();
        self.values.iter().take_while(|&&v| v > cut).count()
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps continue past the `1e-12 ||A||_F` off-diagonal threshold until no
/// pair is coupled above rounding level relative to its diagonal entries
/// (or above `eps^2 ||A||_F`), which keeps small eigenvalues of semidefinite
/// matrices accurate.
pub fn eig_sym(matrix: &DMatrix<f64>) -> Result<Spectrum> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "eig_sym (square input)",
            expected: n,
            found: matrix.ncols(),
        });
    }
    let fro = matrix.norm();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * fro.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }

    // row-major working copy, a[i * n + j]
    let mut a: Vec<f64> = (0..n * n).map(|k| matrix[(k / n, k % n)]).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    // couplings this small cannot move any eigenvalue visibly, and rotating
    // them drives entries into subnormal range where every flop is slow
    let tiny = f64::EPSILON * f64::EPSILON * fro;
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= tiny || apq.abs() <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, n, p, q, c, s, t);
                // v holds eigenvectors as rows so both updates are contiguous
                let (head, tail) = v.split_at_mut(q * n);
                let vp = &mut head[p * n..(p + 1) * n];
                let vq = &mut tail[..n];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        converged = !rotated;
    }
    let off = off_diagonal_max(&a, n);
    if !converged && off >= OFF_DIAGONAL_TOL * fro {
        return Err(Error::NotConverged {
            iterations: sweeps,
            residual: off / fro,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = DMatrix::from_fn(n, n, |row, col| v[order[col] * n + row]);
    Ok(Spectrum { values, vectors })
}

/// Applies the two-sided rotation zeroing `a[p][q]`.
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let apq = a[p * n + q];
    a[p * n + p] -= t * apq;
    a[q * n + q] += t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[k * n + p] = new_kp;
        a[p * n + k] = new_kp;
        a[k * n + q] = new_kq;
        a[q * n + k] = new_kq;
    }
}

fn off_diagonal_max(a: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(a[i * n + j].abs());
            }
        }
    }
    worst
}
