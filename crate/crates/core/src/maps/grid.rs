//! Tensor-grid map, evaluated by tensor cubic splines or multilinear interpolation.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::MapEval;
use crate::error::{Error, Result};

/// Largest input dimension for which tensor grids are built.
pub const MAX_GRID_DIM: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GridInterpolation {
    /// Not-a-knot cubic spline along each axis with at least four nodes,
    /// linear along shorter axes.
    #[default]
    CubicSpline,
    Multilinear,
}

impl GridInterpolation {
    pub(crate) fn tag(self) -> u32 {
        match self {
            GridInterpolation::CubicSpline => 0,
            GridInterpolation::Multilinear => 1,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(GridInterpolation::CubicSpline),
            1 => Ok(GridInterpolation::Multilinear),
            other => Err(Error::Format(format!(
                "unknown grid interpolation tag {other}"
            ))),
        }
    }
}

impl std::str::FromStr for GridInterpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic" => Ok(GridInterpolation::CubicSpline),
            "linear" => Ok(GridInterpolation::Multilinear),
            other => Err(Error::invalid(format!(
                "unknown grid interpolation `{other}`"
            ))),
        }
    }
}

/// Maps spline node values to second derivatives, in index units.
///
/// Interior rows are the usual continuity equations; the first and last rows
/// make the third derivative continuous at the second and second-to-last nodes.
fn not_a_knot(c: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(c, c);
    let mut b = DMatrix::zeros(c, c);
    for i in 1..c - 1 {
        a[(i, i - 1)] = 1.0;
        a[(i, i)] = 4.0;
        a[(i, i + 1)] = 1.0;
        b[(i, i - 1)] = 6.0;
        b[(i, i)] = -12.0;
        b[(i, i + 1)] = 6.0;
    }
    for (row, first) in [(0, 0), (c - 1, c - 3)] {
        a[(row, first)] = 1.0;
        a[(row, first + 1)] = -2.0;
        a[(row, first + 2)] = 1.0;
    }
    a.lu().solve(&b).expect("not-a-knot system is nonsingular")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    ranges: Vec<(f64, f64)>,
    counts: Vec<usize>,
    k: usize,
    interpolation: GridInterpolation,
    /// `K` values per node; the first input dimension varies fastest.
    values: Vec<f64>,
}

impl GridMap {
    /// Tabulates `f` at every tensor node, in parallel.
    pub fn from_fn(
        ranges: Vec<(f64, f64)>,
        counts: Vec<usize>,
        k: usize,
        f: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    ) -> Result<Self> {
        if ranges.len() != counts.len() || ranges.is_empty() {
            return Err(Error::invalid("grid needs one node count per input range"));
        }
        if ranges.len() > MAX_GRID_DIM {
            return Err(Error::invalid(format!(
                "tensor grid over {} inputs exceeds the limit of {MAX_GRID_DIM}",
                ranges.len()
            )));
        }
        if counts.iter().any(|&c| c < 2) || ranges.iter().any(|r| !(r.1 > r.0)) {
            return Err(Error::invalid(
                "grid needs >= 2 nodes and a proper range per input",
            ));
        }
        let mut map = Self {
            ranges,
            counts,
            k,
            interpolation: GridInterpolation::default(),
            values: Vec::new(),
        };
        let rows: Vec<Vec<f64>> = (0..map.node_count())
            .into_par_iter()
            .map(|i| {
                let row = f(&map.node(i))?;
                if row.len() != k {
                    return Err(Error::DimensionMismatch {
                        context: "grid node value",
                        expected: k,
                        found: row.len(),
                    });
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        map.values = rows.concat();
        Ok(map)
    }

    pub(crate) fn from_raw(
        ranges: Vec<(f64, f64)>,
        counts: Vec<usize>,
        k: usize,
        interpolation: GridInterpolation,
        values: Vec<f64>,
    ) -> Result<Self> {
        let map = Self {
            ranges,
            counts,
            k,
            interpolation,
            values,
        };
        if map.values.len() != map.node_count() * k {
            return Err(Error::Format(
                "grid value count does not match its shape".into(),
            ));
        }
        Ok(map)
    }

    pub fn with_interpolation(mut self, interpolation: GridInterpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> GridInterpolation {
        self.interpolation
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Coordinates of node `index`.
    pub fn node(&self, mut index: usize) -> Vec<f64> {
        self.ranges
            .iter()
            .zip(&self.counts)
            .map(|(&(lo, hi), &c)| {
                let i = index % c;
                index /= c;
                lo + (hi - lo) * i as f64 / (c - 1) as f64
            })
            .collect()
    }

    pub fn node_value(&self, index: usize) -> &[f64] {
        &self.values[index * self.k..(index + 1) * self.k]
    }

    pub fn eval(&self, q: &[f64]) -> Result<MapEval> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "grid map query",
                expected: self.dim(),
                found: q.len(),
            });
        }
        let mut clamped = false;
        let mut base = Vec::with_capacity(q.len());
        let mut frac = Vec::with_capacity(q.len());
        for ((&x, &(lo, hi)), &c) in q.iter().zip(&self.ranges).zip(&self.counts) {
            let cells = (c - 1) as f64;
            let mut t = (x - lo) / (hi - lo) * cells;
            if !(0.0..=cells).contains(&t) {
                clamped = true;
                t = t.clamp(0.0, cells);
            }
            let i = (t.floor() as usize).min(c - 2);
            base.push(i);
            frac.push(t - i as f64);
        }

        // one weight per node along each axis, then contract axis by axis
        let weights: Vec<Vec<f64>> = (0..q.len())
            .map(|d| self.axis_weights(self.counts[d], base[d], frac[d]))
            .collect();
        let mut cur = self.values.clone();
        for (w, &c) in weights.iter().zip(&self.counts) {
            let mut next = vec![0.0; cur.len() / c];
            for (j, out) in next.chunks_exact_mut(self.k).enumerate() {
                for (i, &wi) in w.iter().enumerate() {
                    if wi == 0.0 {
                        continue;
                    }
                    let row = &cur[(j * c + i) * self.k..(j * c + i + 1) * self.k];
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += wi * v;
                    }
                }
            }
            cur = next;
        }
        let out = cur;
        Ok(MapEval {
            coeffs: out,
            clamped,
            fallback: false,
        })
    }
}

impl GridMap {
    /// Interpolation weights of the `c` nodes at offset `t` inside cell `i`.
    fn axis_weights(&self, c: usize, i: usize, t: f64) -> Vec<f64> {
        let mut w = vec![0.0; c];
        w[i] = 1.0 - t;
        w[i + 1] = t;
        if self.interpolation == GridInterpolation::CubicSpline && c >= 4 {
            let s = not_a_knot(c);
            let lo = ((1.0 - t).powi(3) - (1.0 - t)) / 6.0;
            let hi = (t.powi(3) - t) / 6.0;
            for (j, wj) in w.iter_mut().enumerate() {
                *wj += lo * s[(i, j)] + hi * s[(i + 1, j)];
            }
        }
        w
    }
}
