//! Snapshot sets: batches of solved realizations, their restriction to a
//! subdomain, and the `PODS` binary format.
//!
//! Layout (little-endian): magic `PODS`, version u32, n u32, N u64, r u64,
//! force-parameter count u64, the N parameter rows `(xi, theta)`, then the
//! fields column by column. A JSON metadata block follows, closed by its
//! byte length as u64 so the fixed-layout prefix stays untouched.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{sample_params, CoeffFamily, ForceFamily, ParamVector};
use crate::error::{Error, Result};
use crate::fem::FemSolver;
use crate::io;
use crate::mesh::{Mesh, Rect, SubdomainMask};

const MAGIC: &[u8; 4] = b"PODS";
const VERSION: u32 = 1;

/// How a snapshot set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub family: String,
    pub force: ForceFamily,
    pub seed: u64,
    pub tol: f64,
    pub mask: Rect,
    /// RNG stream of each column.
    pub indices: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    n: usize,
    params: Vec<ParamVector>,
    /// Mask nodes x N.
    fields: DMatrix<f64>,
    meta: SnapshotMeta,
}

impl SnapshotSet {
    /// Samples `count` i.i.d. parameter vectors and solves for each.
    pub fn generate(
        family: &CoeffFamily,
        force: ForceFamily,
        n: usize,
        count: usize,
        seed: u64,
        tol: f64,
    ) -> Result<Self> {
        let solver = FemSolver::new(Mesh::new(n)?, tol)?;
        let params = sample_params(family, &force, seed, count)?;
        let mut set = Self::solve_all(&solver, family, force, params)?;
        set.meta.seed = seed;
        Ok(set)
    }

    /// Solves for the given parameter vectors (one column each, same order).
    pub fn solve_all(
        solver: &FemSolver,
        family: &CoeffFamily,
        force: ForceFamily,
        params: Vec<ParamVector>,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("snapshot set needs at least one sample"));
        }
        for p in &params {
            if p.xi.len() != family.dim() || p.theta.len() != force.dim() {
                return Err(Error::DimensionMismatch {
                    context: "snapshot parameters",
                    expected: family.dim() + force.dim(),
                    found: p.xi.len() + p.theta.len(),
                });
            }
        }
        let mesh = solver.mesh();
        let columns: Vec<Vec<f64>> = params
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                solver
                    .solve_params(family, &force, p)
                    .map(|f| f.values)
                    .map_err(|e| Error::Snapshot {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        let rows = mesh.node_count();
        let mut fields = DMatrix::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            fields.column_mut(j).copy_from_slice(col);
        }
        let meta = SnapshotMeta {
            family: family.id().to_string(),
            force,
            seed: params[0].seed,
            tol: solver.tol(),
            mask: Rect::unit(),
            indices: params.iter().map(|p| p.index).collect(),
        };
        Ok(Self {
            n: mesh.n(),
            params,
            fields,
            meta,
        })
    }

    /// Assembles a set from precomputed pieces; columns must match `params`.
    pub fn from_parts(
        n: usize,
        params: Vec<ParamVector>,
        fields: DMatrix<f64>,
        meta: SnapshotMeta,
    ) -> Result<Self> {
        if fields.ncols() != params.len() {
            return Err(Error::DimensionMismatch {
                context: "snapshot columns",
                expected: params.len(),
                found: fields.ncols(),
            });
        }
        if params.is_empty() {
            return Err(Error::invalid("snapshot set needs at least one sample"));
        }
        let mesh = Mesh::new(n)?;
        let mask = SubdomainMask::new(&mesh, meta.mask)?;
        if fields.nrows() != mask.len() {
            return Err(Error::DimensionMismatch {
                context: "snapshot rows",
                expected: mask.len(),
                found: fields.nrows(),
            });
        }
        Ok(Self {
            n,
            params,
            fields,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[ParamVector] {
        &self.params
    }

    pub fn fields(&self) -> &DMatrix<f64> {
        &self.fields
    }

    pub fn meta(&self) -> &SnapshotMeta {
        &self.meta
    }

    pub fn mask_rect(&self) -> Rect {
        self.meta.mask
    }

    /// The mask these rows are numbered by.
    pub fn mask(&self, mesh: &Mesh) -> Result<SubdomainMask> {
        self.check_mesh(mesh)?;
        SubdomainMask::new(mesh, self.meta.mask)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.fields.column(j).iter().copied().collect()
    }

    /// Coefficient family this set was generated from.
    pub fn family(&self) -> Result<CoeffFamily> {
        CoeffFamily::parse(&self.meta.family, self.n)
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if mesh.n() != self.n {
            return Err(Error::DimensionMismatch {
                context: "snapshot mesh resolution",
                expected: self.n,
                found: mesh.n(),
            });
        }
        Ok(())
    }

    /// Keeps only the rows of nodes inside `rect`.
    pub fn restrict(&self, mesh: &Mesh, rect: Rect) -> Result<Self> {
        self.check_mesh(mesh)?;
        if !rect.within(&self.meta.mask) {
            return Err(Error::invalid(format!(
                "mask {rect:?} is not inside the current mask {:?}",
                self.meta.mask
            )));
        }
        let outer = SubdomainMask::new(mesh, self.meta.mask)?;
        let inner = SubdomainMask::new(mesh, rect)?;
        let rows: Vec<usize> = inner
            .nodes()
            .iter()
            .map(|&node| {
                outer
                    .local_index(node)
                    .expect("inner mask nodes lie in the outer mask")
            })
            .collect();
        let fields = self.fields.select_rows(rows.iter());
        Ok(Self {
            n: self.n,
            params: self.params.clone(),
            fields,
            meta: SnapshotMeta {
                mask: rect,
                ..self.meta.clone()
            },
        })
    }

    /// Columns `range` as a new set, e.g. for train/test splits.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::invalid(format!(
                "slice {range:?} outside 0..{}",
                self.len()
            )));
        }
        Ok(Self {
            n: self.n,
            params: self.params[range.clone()].to_vec(),
            fields: self.fields.columns(range.start, range.len()).into_owned(),
            meta: SnapshotMeta {
                indices: self.meta.indices[range].to_vec(),
                ..self.meta.clone()
            },
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let r = self.params[0].xi.len();
        let q = self.params[0].theta.len();
        io::write_header(w, MAGIC, VERSION)?;
        io::write_u32(w, self.n as u32)?;
        io::write_u64(w, self.len() as u64)?;
        io::write_u64(w, r as u64)?;
        io::write_u64(w, q as u64)?;
        for p in &self.params {
            io::write_f64s(w, &p.xi)?;
            io::write_f64s(w, &p.theta)?;
        }
        io::write_f64s(w, self.fields.as_slice())?;
        let json = serde_json::to_vec(&self.meta).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(&json)?;
        io::write_u64(w, json.len() as u64)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        io::read_header(&mut cur, MAGIC, VERSION)?;
        let n = io::read_u32(&mut cur)? as usize;
        let count = io::read_usize(&mut cur)?;
        let r = io::read_usize(&mut cur)?;
        let q = io::read_usize(&mut cur)?;
        if count == 0 {
            return Err(Error::Format("snapshot file holds no samples".into()));
        }
        let param_bytes = count
            .checked_mul(r + q)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| Error::Format("parameter block overflows".into()))?;
        if cur.len() < param_bytes + 8 {
            return Err(Error::Format("truncated file".into()));
        }
        let flat = io::read_f64s(&mut cur, count * (r + q))?;

        let (body, tail) = cur.split_at(cur.len() - 8);
        let json_len = u64::from_le_bytes(tail.try_into().unwrap()) as usize;
        if json_len > body.len() {
            return Err(Error::Format("truncated file".into()));
        }
        let (mut field_bytes, json) = body.split_at(body.len() - json_len);
        let meta: SnapshotMeta =
            serde_json::from_slice(json).map_err(|e| Error::Format(format!("metadata: {e}")))?;
        if meta.indices.len() != count {
            return Err(Error::Format("metadata index count differs from N".into()));
        }
        if field_bytes.len() % (8 * count) != 0 {
            return Err(Error::Format("truncated file".into()));
        }
        let rows = field_bytes.len() / (8 * count);
        let values = io::read_f64s(&mut field_bytes, rows * count)?;

        let params = flat
            .chunks_exact(r + q)
            .zip(&meta.indices)
            .map(|(row, &index)| ParamVector {
                xi: row[..r].to_vec(),
                theta: row[r..].to_vec(),
                seed: meta.seed,
                index,
            })
            .collect();
        Self::from_parts(n, params, DMatrix::from_vec(rows, count, values), meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
