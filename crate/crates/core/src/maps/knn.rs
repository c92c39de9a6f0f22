//! Local first-order least squares over the nearest training inputs.
//!
//! For a query `q` and neighbours `x_m` with targets `c_m`, each component
//! solves `c_m ~ c + (x_m - q) . g` for the value `c` and gradient `g`.

use nalgebra::DMatrix;

use super::kdtree::KdTree;
use super::MapEval;
use crate::error::{Error, Result};
use crate::sensing::qr_pivoted;

/// Neighbour count used when none is given.
pub const DEFAULT_NEIGHBORS: usize = 20;

#[derive(Debug, Clone)]
pub struct KnnMap {
    tree: KdTree,
    /// `N x K`.
    targets: DMatrix<f64>,
    neighbors: usize,
}

impl KnnMap {
    pub fn new(inputs: &DMatrix<f64>, targets: DMatrix<f64>, neighbors: usize) -> Result<Self> {
        let dim = inputs.ncols();
        if targets.nrows() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "knn targets",
                expected: inputs.nrows(),
                found: targets.nrows(),
            });
        }
        if neighbors < dim + 1 {
            return Err(Error::invalid(format!(
                "{neighbors} neighbours cannot fit {} unknowns",
                dim + 1
            )));
        }
        if neighbors > inputs.nrows() {
            return Err(Error::invalid(format!(
                "{neighbors} neighbours requested from {} samples",
                inputs.nrows()
            )));
        }
        let rows: Vec<f64> = (0..inputs.nrows())
            .flat_map(|i| inputs.row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        Ok(Self {
            tree: KdTree::build(rows, dim)?,
            targets,
            neighbors,
        })
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    pub fn k(&self) -> usize {
        self.targets.ncols()
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn eval(&self, q: &[f64]) -> Result<MapEval> {
        let ids = self.tree.query(q, self.neighbors)?;
        let dim = self.dim();
        let mut design = DMatrix::zeros(ids.len(), dim + 1);
        let mut rhs = DMatrix::zeros(ids.len(), self.k());
        for (r, &id) in ids.iter().enumerate() {
            design[(r, 0)] = 1.0;
            for (d, (&x, &qd)) in self.tree.point(id).iter().zip(q).enumerate() {
                design[(r, d + 1)] = x - qd;
            }
            rhs.set_row(r, &self.targets.row(id));
        }
        let qr = qr_pivoted(&design);
        if qr.rank() < dim + 1 {
            return Ok(self.inverse_distance(q, &ids));
        }
        let sol = qr.solve_matrix(&rhs)?;
        Ok(MapEval {
            coeffs: sol.row(0).iter().copied().collect(),
            clamped: false,
            fallback: false,
        })
    }

    fn inverse_distance(&self, q: &[f64], ids: &[usize]) -> MapEval {
        let mut out = vec![0.0; self.k()];
        let mut total = 0.0;
        for &id in ids {
            let d = super::kdtree::squared_distance(self.tree.point(id), q).sqrt();
            if d == 0.0 {
                return MapEval {
                    coeffs: self.targets.row(id).iter().copied().collect(),
                    clamped: false,
                    fallback: true,
                };
            }
            let w = 1.0 / d;
            total += w;
            for (o, v) in out.iter_mut().zip(self.targets.row(id).iter()) {
                *o += w * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
        MapEval {
            coeffs: out,
            clamped: false,
            fallback: true,
        }
    }
}
