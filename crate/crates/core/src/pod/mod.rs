//! Proper orthogonal decomposition from the snapshot correlation matrix.
//!
//! For snapshots `u_1..u_N` on a mask with mass matrix `M`, the correlation
//! matrix is `sigma = U^T M U`. Its eigenpairs `(lambda_j, v_j)` give the
//! mass-orthonormal basis `phi_j = lambda_j^{-1/2} U v_j`, and the mean squared
//! truncation error after `K` modes equals `sum_{j>K} lambda_j` exactly.

mod jacobi;

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

pub use jacobi::{eig_sym, Spectrum, OFF_DIAGONAL_TOL};

use crate::error::{Error, Result};
use crate::io;
use crate::mesh::{Mesh, Rect, SubdomainMask};
use crate::snapshots::SnapshotSet;
use crate::sparse::SparseSymMatrix;

/// Eigenvalues at or below `RANK_TOL * lambda_1` count as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Energy level used when no truncation is requested.
pub const DEFAULT_ENERGY: f64 = 0.9999;

const MAGIC: &[u8; 4] = b"PODB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Fixed(usize),
    /// Smallest `K` with `1 - sqrt(tail_K / total) >= eta`.
    Energy(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Energy(DEFAULT_ENERGY)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PodOptions {
    pub truncation: Truncation,
    /// Decompose `u_i - mean` instead of `u_i`.
    pub subtract_mean: bool,
}

fn require_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// `M U`, one sparse product per column.
fn mass_times(mass: &SparseSymMatrix, u: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(u.nrows(), u.ncols());
    for j in 0..u.ncols() {
        mass.mul_vec_into(u.column(j).as_slice(), out.column_mut(j).as_mut_slice());
    }
    out
}

/// `sigma_ij = <u_i, u_j>` in the mass inner product; symmetric by construction.
pub fn correlation_matrix(fields: &DMatrix<f64>, mass: &SparseSymMatrix) -> Result<DMatrix<f64>> {
    require_dim(
        "correlation matrix (mask nodes)",
        mass.dim(),
        fields.nrows(),
    )?;
    let mu = mass_times(mass, fields);
    let n = fields.ncols();
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = fields.column(i).dot(&mu.column(j));
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(sigma)
}

/// Energy quantity `1 - sqrt(sum_{j>k} lambda_j / sum_j lambda_j)` for `k = 1..=N`.
pub fn energy_curve(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().sum();
    let mut tail = total;
    eigenvalues
        .iter()
        .map(|&l| {
            tail -= l;
            if total > 0.0 {
                1.0 - (tail.max(0.0) / total).sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

/// `sum_{j>k} lambda_j / sum_j lambda_j`, summed from the small end.
pub fn tail_ratio(eigenvalues: &[f64], k: usize) -> f64 {
    let total: f64 = eigenvalues.iter().rev().sum();
    if total <= 0.0 {
        return 0.0;
    }
    eigenvalues.iter().skip(k).rev().sum::<f64>() / total
}

/// Mass-orthonormal POD basis on a rectangular mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    n: usize,
    mask: Rect,
    /// Mask nodes x K.
    phi: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    mean: Option<Vec<f64>>,
}

impl PodBasis {
    /// Builds the basis of `set` (already restricted to its mask) under `mass`.
    pub fn build(set: &SnapshotSet, mass: &SparseSymMatrix, options: PodOptions) -> Result<Self> {
        let (basis, _) = Self::build_with_spectrum(set, mass, options)?;
        Ok(basis)
    }

    pub fn build_with_spectrum(
        set: &SnapshotSet,
        mass: &SparseSymMatrix,
        options: PodOptions,
    ) -> Result<(Self, Spectrum)> {
        let mut u = set.fields().clone();
        let mean = if options.subtract_mean {
            let m: DVector<f64> = u.column_mean();
            for mut col in u.column_iter_mut() {
                col -= &m;
            }
            Some(m.as_slice().to_vec())
        } else {
            None
        };
        let sigma = correlation_matrix(&u, mass)?;
        let spectrum = eig_sym(&sigma)?.clamp_nonnegative()?;
        let rank = spectrum.rank(RANK_TOL);
        let k = choose_k(&spectrum.values, rank, options.truncation)?;

        let mut phi = DMatrix::zeros(u.nrows(), k);
        for j in 0..k {
            let scale = spectrum.values[j].sqrt().recip();
            let col = &u * spectrum.vectors.column(j) * scale;
            phi.set_column(j, &col);
        }
        let basis = Self {
            n: set.n(),
            mask: set.mask_rect(),
            phi,
            eigenvalues: spectrum.values.clone(),
            mean,
        };
        Ok((basis, spectrum))
    }

    /// Basis from explicit columns (for synthetic studies); eigenvalues may be empty.
    pub fn from_parts(
        n: usize,
        mask: Rect,
        phi: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        mean: Option<Vec<f64>>,
    ) -> Result<Self> {
        let rows = SubdomainMask::new(&Mesh::new(n)?, mask)?.len();
        require_dim("basis rows", rows, phi.nrows())?;
        if let Some(m) = &mean {
            require_dim("basis mean", rows, m.len())?;
        }
        Ok(Self {
            n,
            mask,
            phi,
            eigenvalues,
            mean,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask_rect(&self) -> Rect {
        self.mask
    }

    pub fn k(&self) -> usize {
        self.phi.ncols()
    }

    /// Number of mask nodes.
    pub fn rows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    /// The first `k` modes of this basis.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k > self.k() {
            return Err(Error::ExceedsRank {
                requested: k,
                rank: self.k(),
            });
        }
        Ok(Self {
            phi: self.phi.columns(0, k).into_owned(),
            ..self.clone()
        })
    }

    /// `c_j = <u - mean, phi_j>`.
    pub fn project(&self, field: &[f64], mass: &SparseSymMatrix) -> Result<Vec<f64>> {
        require_dim("projection field", self.rows(), field.len())?;
        require_dim("projection mass", self.rows(), mass.dim())?;
        let centered: Vec<f64> = match &self.mean {
            Some(m) => field.iter().zip(m).map(|(u, m)| u - m).collect(),
            None => field.to_vec(),
        };
        let mu = DVector::from_vec(mass.mul_vec(&centered));
        Ok((self.phi.transpose() * mu).as_slice().to_vec())
    }

    /// `mean + Phi c`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        require_dim("reconstruction coefficients", self.k(), coeffs.len())?;
        let mut out = &self.phi * DVector::from_column_slice(coeffs);
        if let Some(m) = &self.mean {
            out += DVector::from_column_slice(m);
        }
        Ok(out.as_slice().to_vec())
    }

    /// Projection coefficients of every column, as an `N x K` matrix.
    pub fn project_all(
        &self,
        fields: &DMatrix<f64>,
        mass: &SparseSymMatrix,
    ) -> Result<DMatrix<f64>> {
        require_dim("projection fields", self.rows(), fields.nrows())?;
        require_dim("projection mass", self.rows(), mass.dim())?;
        let mut centered = fields.clone();
        if let Some(m) = &self.mean {
            let m = DVector::from_column_slice(m);
            for mut col in centered.column_iter_mut() {
                col -= &m;
            }
        }
        Ok((self.phi.transpose() * mass_times(mass, &centered)).transpose())
    }

    /// `Phi^T M Phi`; the identity for a basis built by [`PodBasis::build`].
    pub fn gram(&self, mass: &SparseSymMatrix) -> Result<DMatrix<f64>> {
        require_dim("gram mass", self.rows(), mass.dim())?;
        Ok(self.phi.transpose() * mass_times(mass, &self.phi))
    }

    fn check_set(&self, set: &SnapshotSet) -> Result<()> {
        require_dim("basis/snapshot rows", self.rows(), set.fields().nrows())?;
        if set.mask_rect() != self.mask || set.n() != self.n {
            return Err(Error::invalid(
                "snapshot set and basis live on different masks",
            ));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        io::write_header(w, MAGIC, VERSION)?;
        io::write_u32(w, self.n as u32)?;
        let r = self.mask;
        io::write_f64s(w, &[r.x0, r.x1, r.y0, r.y1])?;
        io::write_u64(w, self.k() as u64)?;
        io::write_u64(w, self.eigenvalues.len() as u64)?;
        io::write_f64s(w, &self.eigenvalues)?;
        io::write_f64s(w, self.phi.as_slice())?;
        match &self.mean {
            Some(m) => {
                io::write_u64(w, m.len() as u64)?;
                io::write_f64s(w, m)?;
            }
            None => io::write_u64(w, 0)?,
        }
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(r: &mut R) -> Result<Self> {
        io::read_header(r, MAGIC, VERSION)?;
        let n = io::read_u32(r)? as usize;
        let rect = io::read_f64s(r, 4)?;
        let mask = Rect::new(rect[0], rect[1], rect[2], rect[3]);
        let k = io::read_usize(r)?;
        let count = io::read_usize(r)?;
        let rows = SubdomainMask::new(&Mesh::new(n)?, mask)
            .map_err(|e| Error::Format(format!("basis mask: {e}")))?
            .len();
        let eigenvalues = io::read_f64s(r, count)?;
        let phi = DMatrix::from_vec(rows, k, io::read_f64s(r, rows * k)?);
        let mean = match io::read_usize(r)? {
            0 => None,
            len if len == rows => Some(io::read_f64s(r, rows)?),
            len => return Err(Error::Format(format!("mean length {len}, expected {rows}"))),
        };
        io::expect_eof(r)?;
        Self::from_parts(n, mask, phi, eigenvalues, mean)
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

fn choose_k(values: &[f64], rank: usize, truncation: Truncation) -> Result<usize> {
    match truncation {
        Truncation::Fixed(k) if k > values.len() || k > rank => {
            Err(Error::ExceedsRank { requested: k, rank })
        }
        Truncation::Fixed(k) => Ok(k),
        Truncation::Energy(eta) => {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::invalid(format!("energy level {eta} outside (0, 1)")));
            }
            if rank == 0 {
                return Err(Error::RankDeficient { rank, required: 1 });
            }
            let curve = energy_curve(values);
            let k = curve.iter().position(|&e| e >= eta).map_or(rank, |i| i + 1);
            Ok(k.min(rank))
        }
    }
}

/// Both sides of the POD error identity for `basis` built from `set`:
/// `(sum_i |u_i - P u_i|^2 / sum_i |u_i|^2, sum_{j>K} lambda_j / sum_j lambda_j)`,
/// with `u_i` centered when the basis carries a mean.
pub fn pod_error_identity(
    set: &SnapshotSet,
    basis: &PodBasis,
    mass: &SparseSymMatrix,
) -> Result<(f64, f64)> {
    basis.check_set(set)?;
    require_dim(
        "identity eigenvalue count",
        set.len(),
        basis.eigenvalues().len(),
    )?;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..set.len() {
        let u = set.column(j);
        let c = basis.project(&u, mass)?;
        let approx = basis.reconstruct(&c)?;
        let resid: Vec<f64> = u.iter().zip(&approx).map(|(a, b)| a - b).collect();
        let centered: Vec<f64> = match basis.mean() {
            Some(m) => u.iter().zip(m).map(|(a, b)| a - b).collect(),
            None => u,
        };
        num += mass.inner(&resid, &resid);
        den += mass.inner(&centered, &centered);
    }
    let lhs = if den > 0.0 { num / den } else { 0.0 };
    Ok((lhs, tail_ratio(basis.eigenvalues(), basis.k())))
}
