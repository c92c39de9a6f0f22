//! Least-squares regression in a total-degree Legendre space.

use nalgebra::DMatrix;

use super::MapEval;
use crate::error::{Error, Result};
use crate::sensing::qr_pivoted;

/// Default total degree.
pub const DEFAULT_DEGREE: usize = 4;

/// All multi-indices `alpha` in `dim` variables with `|alpha|_1 <= degree`,
/// sorted by total degree, then lexicographically.
pub fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    if dim == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut current = vec![0; dim];
    for total in 0..=degree {
        fill(&mut out, &mut current, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, current: &mut [usize], pos: usize, remaining: usize) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        fill(out, current, pos + 1, remaining - v);
    }
}

/// `C(dim + degree, degree)`.
pub fn basis_count(dim: usize, degree: usize) -> usize {
    (1..=degree).fold(1usize, |acc, i| acc * (dim + i) / i)
}

/// `sqrt(2k + 1) P_k(x)` for `k = 0..=degree` (orthonormal for uniform measure on [-1,1]).
fn legendre_column(x: f64, degree: usize) -> Vec<f64> {
    let mut p = vec![1.0; degree + 1];
    if degree >= 1 {
        p[1] = x;
    }
    for k in 2..=degree {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v *= (2.0 * k as f64 + 1.0).sqrt();
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreMap {
    ranges: Vec<(f64, f64)>,
    degree: usize,
    indices: Vec<Vec<usize>>,
    /// `basis count x K`.
    coeffs: DMatrix<f64>,
}

impl LegendreMap {
    /// Fits `targets` (N x K) at `inputs` (N x dim) over the box `ranges`.
    pub fn fit(
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        ranges: Vec<(f64, f64)>,
        degree: usize,
    ) -> Result<Self> {
        let dim = ranges.len();
        if inputs.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "legendre inputs",
                expected: dim,
                found: inputs.ncols(),
            });
        }
        if targets.nrows() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "legendre targets",
                expected: inputs.nrows(),
                found: targets.nrows(),
            });
        }
        let count = basis_count(dim, degree);
        if inputs.nrows() < 2 * count {
            return Err(Error::invalid(format!(
                "{} samples for {count} basis functions; need at least {}",
                inputs.nrows(),
                2 * count
            )));
        }
        let mut map = Self {
            ranges,
            degree,
            indices: multi_indices(dim, degree),
            coeffs: DMatrix::zeros(0, 0),
        };
        let mut design = DMatrix::zeros(inputs.nrows(), count);
        for i in 0..inputs.nrows() {
            let row: Vec<f64> = inputs.row(i).iter().copied().collect();
            let phi = map.features(&row).0;
            for (j, v) in phi.into_iter().enumerate() {
                design[(i, j)] = v;
            }
        }
        map.coeffs = qr_pivoted(&design).solve_matrix(targets)?;
        Ok(map)
    }

    pub(crate) fn from_raw(
        ranges: Vec<(f64, f64)>,
        degree: usize,
        coeffs: DMatrix<f64>,
    ) -> Result<Self> {
        let count = basis_count(ranges.len(), degree);
        if coeffs.nrows() != count {
            return Err(Error::Format(format!(
                "legendre map stores {} rows, expected {count}",
                coeffs.nrows()
            )));
        }
        Ok(Self {
            indices: multi_indices(ranges.len(), degree),
            ranges,
            degree,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn k(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn basis_len(&self) -> usize {
        self.indices.len()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Basis values at `q` and whether `q` left the fitted box.
    fn features(&self, q: &[f64]) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let columns: Vec<Vec<f64>> = q
            .iter()
            .zip(&self.ranges)
            .map(|(&x, &(lo, hi))| {
                let mut t = 2.0 * (x - lo) / (hi - lo) - 1.0;
                if !(-1.0..=1.0).contains(&t) {
                    clamped = true;
                    t = t.clamp(-1.0, 1.0);
                }
                legendre_column(t, self.degree)
            })
            .collect();
        let phi = self
            .indices
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .enumerate()
                    .map(|(d, &a)| columns[d][a])
                    .product()
            })
            .collect();
        (phi, clamped)
    }

    pub fn eval(&self, q: &[f64]) -> Result<MapEval> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "legendre query",
                expected: self.dim(),
                found: q.len(),
            });
        }
        let (phi, clamped) = self.features(q);
        let coeffs = (0..self.k())
            .map(|j| {
                phi.iter()
                    .zip(self.coeffs.column(j).iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(MapEval {
            coeffs,
            clamped,
            fallback: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        assert_eq!(basis_count(8, 4), 495);
        assert_eq!(multi_indices(8, 4).len(), 495);
        assert_eq!(multi_indices(3, 2).len(), 10);
        assert!(multi_indices(5, 3)
            .iter()
            .all(|a| a.iter().sum::<usize>() <= 3));
    }

    #[test]
    fn legendre_recurrence() {
        let p = legendre_column(0.5, 3);
        // P2(0.5) = -0.125, P3(0.5) = -0.4375
        assert!((p[2] - 5f64.sqrt() * -0.125).abs() < 1e-15);
        assert!((p[3] - 7f64.sqrt() * -0.4375).abs() < 1e-15);
    }
}
