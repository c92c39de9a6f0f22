//! Householder QR with greedy column pivoting, and the least-squares solve
//! built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `|R_kk| < RANK_TOL |R_11|` marks numerical rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// Factorization `A P = Q R` in compact Householder form.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Upper triangle holds `R`; below the diagonal, the reflector tails.
    qr: DMatrix<f64>,
    /// `tau_k` of each reflector `I - tau v v^T` (with `v_k = 1`).
    tau: Vec<f64>,
    /// `perm[k]` is the original column sitting at position `k`.
    perm: Vec<usize>,
}

/// Full factorization (`min(m, n)` steps).
pub fn qr_pivoted(a: &DMatrix<f64>) -> PivotedQr {
    qr_pivoted_steps(a, a.nrows().min(a.ncols()))
}

/// Stops after `steps` reflectors; only the first `steps` pivots are meaningful.
pub fn qr_pivoted_steps(a: &DMatrix<f64>, steps: usize) -> PivotedQr {
    let (m, n) = a.shape();
    let steps = steps.min(m).min(n);
    let mut qr = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut tau = Vec::with_capacity(steps);

    for k in 0..steps {
        // exact remaining column norms keep the pivot order reproducible
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let norm = qr.view((k, j), (m - k, 1)).norm_squared();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            qr.swap_columns(k, best);
            perm.swap(k, best);
        }

        let x0 = qr[(k, k)];
        let norm = best_norm.sqrt();
        if norm == 0.0 {
            tau.push(0.0);
            continue;
        }
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let v0 = x0 - alpha;
        for i in k + 1..m {
            qr[(i, k)] /= v0;
        }
        let t = (alpha - x0) / alpha;
        qr[(k, k)] = alpha;
        tau.push(t);

        for j in k + 1..n {
            let mut s = qr[(k, j)];
            for i in k + 1..m {
                s += qr[(i, k)] * qr[(i, j)];
            }
            s *= t;
            qr[(k, j)] -= s;
            for i in k + 1..m {
                let vi = qr[(i, k)];
                qr[(i, j)] -= s * vi;
            }
        }
    }
    PivotedQr { qr, tau, perm }
}

impl PivotedQr {
    pub fn steps(&self) -> usize {
        self.tau.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `|R_kk|` for each completed step.
    pub fn pivot_magnitudes(&self) -> Vec<f64> {
        (0..self.steps()).map(|k| self.qr[(k, k)].abs()).collect()
    }

    /// Steps with `|R_kk| >= RANK_TOL |R_11|`.
    pub fn rank(&self) -> usize {
        let mags = self.pivot_magnitudes();
        let Some(&top) = mags.first() else { return 0 };
        if top == 0.0 {
            return 0;
        }
        mags.iter().take_while(|&&r| r >= RANK_TOL * top).count()
    }

    /// `steps x n` upper-trapezoidal factor.
    pub fn r(&self) -> DMatrix<f64> {
        let (s, n) = (self.steps(), self.qr.ncols());
        DMatrix::from_fn(s, n, |i, j| if j >= i { self.qr[(i, j)] } else { 0.0 })
    }

    /// `m x steps` matrix with orthonormal columns.
    pub fn q(&self) -> DMatrix<f64> {
        let (m, s) = (self.qr.nrows(), self.steps());
        let mut q = DMatrix::from_fn(m, s, |i, j| if i == j { 1.0 } else { 0.0 });
        for k in (0..s).rev() {
            for j in 0..s {
                let mut dot = q[(k, j)];
                for i in k + 1..m {
                    dot += self.qr[(i, k)] * q[(i, j)];
                }
                dot *= self.tau[k];
                q[(k, j)] -= dot;
                for i in k + 1..m {
                    q[(i, j)] -= dot * self.qr[(i, k)];
                }
            }
        }
        q
    }

    /// Applies `Q^T` to `b` in place.
    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.qr.nrows();
        for k in 0..self.steps() {
            let mut dot = b[k];
            for i in k + 1..m {
                dot += self.qr[(i, k)] * b[i];
            }
            dot *= self.tau[k];
            b[k] -= dot;
            for i in k + 1..m {
                b[i] -= dot * self.qr[(i, k)];
            }
        }
    }

    /// Least-squares minimizer of `|A x - b|`; requires full column rank.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.qr.shape();
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                context: "least-squares right-hand side",
                expected: m,
                found: b.len(),
            });
        }
        if m < n || self.steps() < n {
            return Err(Error::invalid(format!(
                "least squares needs rows >= cols, got {m} x {n}"
            )));
        }
        let rank = self.rank();
        if rank < n {
            return Err(Error::RankDeficient { rank, required: n });
        }
        let mut y = b.to_vec();
        self.apply_qt(&mut y);
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.qr[(i, j)] * z[j];
            }
            z[i] = s / self.qr[(i, i)];
        }
        let mut x = vec![0.0; n];
        for (k, &col) in self.perm.iter().enumerate() {
            x[col] = z[k];
        }
        Ok(x)
    }

    /// Column-by-column [`PivotedQr::solve`].
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.qr.ncols();
        let mut out = DMatrix::zeros(n, b.ncols());
        for j in 0..b.ncols() {
            let x = self.solve(b.column(j).as_slice())?;
            out.set_column(j, &DVector::from_vec(x));
        }
        Ok(out)
    }
}

/// Convenience: factor `a` and solve one least-squares problem.
pub fn ls_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    qr_pivoted(a).solve(b)
}
