//! Compressed-row symmetric matrices and a Jacobi-preconditioned CG solver.

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored with its full (both triangles) pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Callers supply both `(i, j)` and `(j, i)` contributions.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(
                i < dim && j < dim,
                "triplet ({i}, {j}) outside dimension {dim}"
            );
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A y`
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    /// Principal submatrix on `keep`, where `keep[i]` is the new index of row `i`.
    pub fn principal_submatrix(&self, keep: &[Option<usize>], new_dim: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(new_dim + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut rows: Vec<(usize, usize)> = keep
            .iter()
            .enumerate()
            .filter_map(|(old, new)| new.map(|n| (n, old)))
            .collect();
        rows.sort_unstable();
        assert_eq!(rows.len(), new_dim);
        for (_, old) in rows {
            let mut entries: Vec<(usize, f64)> = self
                .row(old)
                .filter_map(|(j, v)| keep[j].map(|nj| (nj, v)))
                .collect();
            entries.sort_unstable_by_key(|e| e.0);
            for (j, v) in entries {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim: new_dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Entrywise `self + other`; both operands must share one sparsity pattern.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.row_ptr, other.row_ptr, "patterns differ");
        assert_eq!(self.col_idx, other.col_idx, "patterns differ");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Largest `|A[i,j] - A[j,i]|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Storage slot of entry `(i, j)` if it is in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| span.start + k)
    }

    /// Same pattern, new values (one per stored entry).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }
}

/// Outcome of a preconditioned CG run.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Default iteration cap: `20 sqrt(dofs) log(1/tol)`, clamped to `[100, 200_000]`.
pub fn default_max_iterations(dofs: usize, tol: f64) -> usize {
    let est = 20.0 * (dofs as f64).sqrt() * (1.0 / tol).ln().max(1.0);
    (est.ceil() as usize).clamp(100, 200_000)
}

/// Solves `A x = b` by diagonally preconditioned conjugate gradients.
///
/// The iteration stops once `|b - A x| <= tol |b|`.
pub fn pcg(a: &SparseSymMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgReport> {
    pcg_observed(a, b, tol, max_iter, |_, _| {})
}

/// [`pcg`] with a callback receiving `(iteration, iterate)` after every update.
pub fn pcg_observed(
    a: &SparseSymMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<CgReport> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: "pcg right-hand side",
            expected: a.dim(),
            found: b.len(),
        });
    }
    if tol <= 0.0 {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let dim = a.dim();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgReport {
            solution: vec![0.0; dim],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; dim];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; dim];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;

    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        let mut rr = 0.0;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            rr += r[i] * r[i];
        }
        res = rr.sqrt() / b_norm;
        observe(it, &x);
        if res <= tol {
            return Ok(CgReport {
                solution: x,
                iterations: it,
                relative_residual: res,
            });
        }
        for i in 0..dim {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
