//! Reduced Galerkin solves on a POD basis over the whole domain.
//!
//! With `Phi` restricted to interior nodes, the reduced system is
//! `(Phi^T A(xi) Phi) c = Phi^T b`. For affine coefficients the blocks
//! `Phi^T A_n Phi` are computed once, so an online solve only sums `K x K`
//! matrices and factors one of them.

use nalgebra::{DMatrix, DVector};

use crate::coeff::{AffineTerm, CoeffFamily, ForceFamily, ParamVector};
use crate::error::{Error, Result};
use crate::fem::FemSolver;
use crate::mesh::{Mesh, Rect};
use crate::pod::PodBasis;
use crate::sparse::SparseSymMatrix;

/// Interior rows of a full-domain basis (boundary rows are dropped).
pub fn interior_basis(basis: &PodBasis, mesh: &Mesh) -> Result<DMatrix<f64>> {
    if basis.mask_rect() != Rect::unit() || basis.n() != mesh.n() {
        return Err(Error::invalid(
            "reduced Galerkin needs a basis over the whole domain",
        ));
    }
    if basis.mean().is_some() {
        return Err(Error::invalid(
            "reduced Galerkin needs a basis without a mean shift",
        ));
    }
    Ok(basis.phi().select_rows(mesh.interior_nodes().iter()))
}

/// `Phi^T A Phi` for a sparse interior matrix.
pub fn reduce(phi: &DMatrix<f64>, a: &SparseSymMatrix) -> DMatrix<f64> {
    let mut a_phi = DMatrix::zeros(phi.nrows(), phi.ncols());
    for j in 0..phi.ncols() {
        a.mul_vec_into(phi.column(j).as_slice(), a_phi.column_mut(j).as_mut_slice());
    }
    let red = phi.transpose() * a_phi;
    (&red + red.transpose()) * 0.5
}

fn cholesky_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<f64>> {
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b).as_slice().to_vec())
}

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    family: CoeffFamily,
    force: ForceFamily,
    solver: FemSolver,
    /// Interior rows of `Phi`.
    phi: DMatrix<f64>,
    /// `(term, Phi^T A_n Phi)` for affine families.
    blocks: Option<Vec<(AffineTerm, DMatrix<f64>)>>,
    /// `Phi^T b` when the force has no random parameters.
    load: Option<DVector<f64>>,
}

impl ReducedSystem {
    /// Offline stage: affine blocks (when the family has them) and the fixed load.
    pub fn precompute(
        basis: &PodBasis,
        family: &CoeffFamily,
        force: ForceFamily,
        solver: FemSolver,
    ) -> Result<Self> {
        let phi = interior_basis(basis, solver.mesh())?;
        let blocks = match family.affine_terms() {
            Ok(terms) => Some(
                terms
                    .into_iter()
                    .map(|t| Ok((t, reduce(&phi, &solver.stiffness(|x, y| t.eval(x, y))?))))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Err(Error::NotAffine(_)) => None,
            Err(e) => return Err(e),
        };
        let load = (force.dim() == 0).then(|| {
            let b = solver.load(|x, y| force.eval(&[], x, y));
            phi.transpose() * DVector::from_vec(b)
        });
        Ok(Self {
            family: family.clone(),
            force,
            solver,
            phi,
            blocks,
            load,
        })
    }

    pub fn k(&self) -> usize {
        self.phi.ncols()
    }

    pub fn is_affine(&self) -> bool {
        self.blocks.is_some()
    }

    pub fn blocks(&self) -> Option<&[(AffineTerm, DMatrix<f64>)]> {
        self.blocks.as_deref()
    }

    /// `Phi^T b(theta)`.
    pub fn reduced_load(&self, theta: &[f64]) -> Result<DVector<f64>> {
        if theta.len() != self.force.dim() {
            return Err(Error::DimensionMismatch {
                context: "force parameters",
                expected: self.force.dim(),
                found: theta.len(),
            });
        }
        if let Some(l) = &self.load {
            return Ok(l.clone());
        }
        let b = self.solver.load(|x, y| self.force.eval(theta, x, y));
        Ok(self.phi.transpose() * DVector::from_vec(b))
    }

    /// `sum_n theta_n(xi) Phi^T A_n Phi`.
    pub fn reduced_stiffness(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let blocks = self
            .blocks
            .as_ref()
            .ok_or_else(|| Error::NotAffine(self.family.id().to_string()))?;
        if xi.len() != self.family.dim() {
            return Err(Error::DimensionMismatch {
                context: "coefficient parameters",
                expected: self.family.dim(),
                found: xi.len(),
            });
        }
        let k = self.k();
        let mut a = DMatrix::zeros(k, k);
        for (term, block) in blocks {
            a += block * term.weight(xi);
        }
        Ok(a)
    }

    /// Affine online solve.
    pub fn online_solve(&self, params: &ParamVector) -> Result<Vec<f64>> {
        let a = self.reduced_stiffness(&params.xi)?;
        cholesky_solve(a, &self.reduced_load(&params.theta)?)
    }

    /// General path: assembles the full stiffness for this realization first.
    pub fn online_solve_nonaffine(&self, params: &ParamVector) -> Result<Vec<f64>> {
        let a = self
            .solver
            .stiffness(|x, y| self.family.eval(&params.xi, x, y))?;
        cholesky_solve(reduce(&self.phi, &a), &self.reduced_load(&params.theta)?)
    }

    /// Solves with whichever path the family supports.
    pub fn solve(&self, params: &ParamVector) -> Result<Vec<f64>> {
        if self.is_affine() {
            self.online_solve(params)
        } else {
            self.online_solve_nonaffine(params)
        }
    }

    /// `Phi^T (A u - A Phi c)` for a full nodal field `u`.
    pub fn galerkin_residual(
        &self,
        params: &ParamVector,
        u: &[f64],
        c: &[f64],
    ) -> Result<Vec<f64>> {
        let a = self
            .solver
            .stiffness(|x, y| self.family.eval(&params.xi, x, y))?;
        let u_int = self.solver.mesh().interior_values(u);
        let approx = &self.phi * DVector::from_column_slice(c);
        let diff: Vec<f64> = u_int
            .iter()
            .zip(approx.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok((self.phi.transpose() * DVector::from_vec(a.mul_vec(&diff)))
            .as_slice()
            .to_vec())
    }
}
