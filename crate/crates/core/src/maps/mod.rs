//! Non-intrusive maps from random inputs `(xi, theta)` to POD coefficients.
//!
//! Maps are stored as `PMAP` files: magic, version u32, kind u32 (0 grid,
//! 1 Legendre, 2 kNN), input dimension u64, K u64, input ranges, then a
//! kind-specific payload. The kNN tree is rebuilt on load.

mod grid;
pub mod kdtree;
mod knn;
mod legendre;

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

pub use grid::{GridInterpolation, GridMap, MAX_GRID_DIM};
pub use kdtree::{linear_scan, KdTree};
pub use knn::{KnnMap, DEFAULT_NEIGHBORS};
pub use legendre::{basis_count, multi_indices, LegendreMap, DEFAULT_DEGREE};

use crate::coeff::{input_ranges, CoeffFamily, ForceFamily, ParamVector};
use crate::error::{Error, Result};
use crate::fem::FemSolver;
use crate::io;
use crate::pod::PodBasis;
use crate::snapshots::SnapshotSet;
use crate::sparse::SparseSymMatrix;

const MAGIC: &[u8; 4] = b"PMAP";
const VERSION: u32 = 2;

/// Map output with flags for clamped queries and kNN fallbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEval {
    pub coeffs: Vec<f64>,
    /// The query left the training box and was clamped onto it.
    pub clamped: bool,
    /// Neighbour geometry was degenerate; inverse-distance weights were used.
    pub fallback: bool,
}

/// Input/target pairs `(xi_i, theta_i) -> c(omega_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable {
    /// `N x r~`.
    pub inputs: DMatrix<f64>,
    /// `N x K`.
    pub targets: DMatrix<f64>,
    pub ranges: Vec<(f64, f64)>,
}

impl TrainingTable {
    /// Projects every snapshot of `set` onto `basis`.
    pub fn build(set: &SnapshotSet, basis: &PodBasis, mass: &SparseSymMatrix) -> Result<Self> {
        if set.mask_rect() != basis.mask_rect() || set.n() != basis.n() {
            return Err(Error::invalid("snapshot set and basis use different masks"));
        }
        let family = set.family()?;
        let inputs = inputs_matrix(set.params());
        Ok(Self {
            inputs,
            targets: basis.project_all(set.fields(), mass)?,
            ranges: input_ranges(&family, &set.meta().force),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn k(&self) -> usize {
        self.targets.ncols()
    }

    pub fn input(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }
}

/// Rows `(xi, theta)` of each parameter vector.
pub fn inputs_matrix(params: &[ParamVector]) -> DMatrix<f64> {
    let dim = params.first().map_or(0, |p| p.xi.len() + p.theta.len());
    DMatrix::from_fn(params.len(), dim, |i, j| params[i].input()[j])
}

/// Solves at every node of a tensor grid over the input box and projects.
pub fn build_grid_map(
    family: &CoeffFamily,
    force: ForceFamily,
    solver: &FemSolver,
    basis: &PodBasis,
    mass: &SparseSymMatrix,
    nodes_per_dim: usize,
) -> Result<GridMap> {
    let ranges = input_ranges(family, &force);
    let mask = solver.mesh().mask(basis.mask_rect())?;
    let r = family.dim();
    let counts = vec![nodes_per_dim; ranges.len()];
    GridMap::from_fn(ranges, counts, basis.k(), |x| {
        let p = ParamVector::new(x[..r].to_vec(), x[r..].to_vec());
        let u = solver.solve_params(family, &force, &p)?;
        basis.project(&mask.gather(&u.values), mass)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Grid,
    Legendre,
    Knn,
}

impl MapKind {
    fn tag(self) -> u32 {
        match self {
            MapKind::Grid => 0,
            MapKind::Legendre => 1,
            MapKind::Knn => 2,
        }
    }
}

impl std::str::FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(MapKind::Grid),
            "legendre" => Ok(MapKind::Legendre),
            "knn" => Ok(MapKind::Knn),
            other => Err(Error::invalid(format!("unknown map kind `{other}`"))),
        }
    }
}

/// Any of the three map kinds, for storage and uniform evaluation.
#[derive(Debug, Clone)]
pub enum OnlineMap {
    Grid(GridMap),
    Legendre(LegendreMap),
    Knn {
        map: KnnMap,
        ranges: Vec<(f64, f64)>,
    },
}

impl OnlineMap {
    pub fn kind(&self) -> MapKind {
        match self {
            OnlineMap::Grid(_) => MapKind::Grid,
            OnlineMap::Legendre(_) => MapKind::Legendre,
            OnlineMap::Knn { .. } => MapKind::Knn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OnlineMap::Grid(m) => m.dim(),
            OnlineMap::Legendre(m) => m.dim(),
            OnlineMap::Knn { map, .. } => map.dim(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            OnlineMap::Grid(m) => m.k(),
            OnlineMap::Legendre(m) => m.k(),
            OnlineMap::Knn { map, .. } => map.k(),
        }
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        match self {
            OnlineMap::Grid(m) => m.ranges(),
            OnlineMap::Legendre(m) => m.ranges(),
            OnlineMap::Knn { ranges, .. } => ranges,
        }
    }

    pub fn eval(&self, q: &[f64]) -> Result<MapEval> {
        match self {
            OnlineMap::Grid(m) => m.eval(q),
            OnlineMap::Legendre(m) => m.eval(q),
            OnlineMap::Knn { map, ranges } => {
                let mut e = map.eval(q)?;
                e.clamped = q.iter().zip(ranges).any(|(x, r)| *x < r.0 || *x > r.1);
                Ok(e)
            }
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        io::write_header(w, MAGIC, VERSION)?;
        io::write_u32(w, self.kind().tag())?;
        io::write_u64(w, self.dim() as u64)?;
        io::write_u64(w, self.k() as u64)?;
        for &(lo, hi) in self.ranges() {
            io::write_f64s(w, &[lo, hi])?;
        }
        match self {
            OnlineMap::Grid(m) => {
                for &c in m.counts() {
                    io::write_u64(w, c as u64)?;
                }
                io::write_u32(w, m.interpolation().tag())?;
                io::write_f64s(w, m.values())?;
            }
            OnlineMap::Legendre(m) => {
                io::write_u64(w, m.degree() as u64)?;
                io::write_f64s(w, m.coeffs().as_slice())?;
            }
            OnlineMap::Knn { map, .. } => {
                io::write_u64(w, map.neighbors() as u64)?;
                io::write_u64(w, map.tree().len() as u64)?;
                io::write_f64s(w, map.tree().points())?;
                io::write_f64s(w, map.targets().as_slice())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        io::read_header(r, MAGIC, VERSION)?;
        let tag = io::read_u32(r)?;
        let dim = io::read_usize(r)?;
        let k = io::read_usize(r)?;
        let flat = io::read_f64s(r, 2 * dim)?;
        let ranges: Vec<(f64, f64)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let map = match tag {
            0 => {
                let counts = (0..dim)
                    .map(|_| io::read_usize(r))
                    .collect::<Result<Vec<_>>>()?;
                let total = counts
                    .iter()
                    .try_fold(k, |acc, &c| acc.checked_mul(c))
                    .ok_or_else(|| Error::Format("grid shape overflows".into()))?;
                let interpolation = GridInterpolation::from_tag(io::read_u32(r)?)?;
                let values = io::read_f64s(r, total)?;
                OnlineMap::Grid(GridMap::from_raw(ranges, counts, k, interpolation, values)?)
            }
            1 => {
                let degree = io::read_usize(r)?;
                let rows = basis_count(dim, degree);
                let coeffs = DMatrix::from_vec(rows, k, io::read_f64s(r, rows * k)?);
                OnlineMap::Legendre(LegendreMap::from_raw(ranges, degree, coeffs)?)
            }
            2 => {
                let neighbors = io::read_usize(r)?;
                let count = io::read_usize(r)?;
                let points = io::read_f64s(r, count * dim)?;
                let targets = DMatrix::from_vec(count, k, io::read_f64s(r, count * k)?);
                let inputs = DMatrix::from_row_slice(count, dim, &points);
                OnlineMap::Knn {
                    map: KnnMap::new(&inputs, targets, neighbors)?,
                    ranges,
                }
            }
            other => return Err(Error::Format(format!("unknown map kind tag {other}"))),
        };
        io::expect_eof(r)?;
        Ok(map)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
