//! P1 finite elements on the uniform mesh.
//!
//! Coefficients and forces are sampled once per triangle at its centroid.
//! Dirichlet conditions are imposed by eliminating boundary dofs, so the
//! reduced stiffness matrix stays SPD and solutions vanish on the boundary.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, ScalarField, SubdomainMask};
use crate::sparse::{self, CgReport, SparseSymMatrix};

/// Default relative residual for the PCG solver.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Gradients of the three barycentric coordinates and the triangle area.
fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det;
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    (g, area)
}

/// Element stiffness `int_T grad(phi_i) . grad(phi_j)` for unit coefficient.
pub fn local_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (g, area) = p1_gradients(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// Exact element mass matrix `(area / 12) [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn local_mass(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (_, area) = p1_gradients(p);
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

fn assemble_over(
    dim: usize,
    mesh: &Mesh,
    triangles: impl Iterator<Item = usize>,
    index: impl Fn(usize) -> Option<usize>,
    mut weight: impl FnMut(usize) -> Result<f64>,
    local: impl Fn([[f64; 2]; 3]) -> [[f64; 3]; 3],
) -> Result<SparseSymMatrix> {
    let mut triplets = Vec::new();
    for t in triangles {
        let w = weight(t)?;
        let k = local(mesh.triangle_coords(t));
        let tri = mesh.triangles()[t];
        for a in 0..3 {
            let Some(i) = index(tri[a]) else { continue };
            for b in 0..3 {
                if let Some(j) = index(tri[b]) {
                    triplets.push((i, j, w * k[a][b]));
                }
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(dim, triplets))
}

fn centroid_coefficient(mesh: &Mesh, t: usize, a_eval: &impl Fn(f64, f64) -> f64) -> Result<f64> {
    let [x, y] = mesh.centroid(t);
    let value = a_eval(x, y);
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::ContrastViolation { x, y, value })
    }
}

/// Full (pre-elimination) stiffness matrix over all nodes.
pub fn assemble_stiffness(
    mesh: &Mesh,
    a_eval: impl Fn(f64, f64) -> f64,
) -> Result<SparseSymMatrix> {
    assemble_over(
        mesh.node_count(),
        mesh,
        0..mesh.triangles().len(),
        Some,
        |t| centroid_coefficient(mesh, t, &a_eval),
        local_stiffness,
    )
}

/// Full mass matrix over all nodes.
pub fn assemble_mass(mesh: &Mesh) -> SparseSymMatrix {
    assemble_over(
        mesh.node_count(),
        mesh,
        0..mesh.triangles().len(),
        Some,
        |_| Ok(1.0),
        local_mass,
    )
    .expect("mass assembly has no failure path")
}

/// Mass matrix of the mask, in mask-local numbering, over triangles inside the mask.
pub fn assemble_mask_mass(mesh: &Mesh, mask: &SubdomainMask) -> SparseSymMatrix {
    assemble_over(
        mask.len(),
        mesh,
        mask.triangles().iter().copied(),
        |v| mask.local_index(v),
        |_| Ok(1.0),
        local_mass,
    )
    .expect("mass assembly has no failure path")
}

/// Unit-coefficient stiffness of the mask (mask-local numbering); its energy is the squared H1 seminorm.
pub fn assemble_mask_laplacian(mesh: &Mesh, mask: &SubdomainMask) -> SparseSymMatrix {
    assemble_over(
        mask.len(),
        mesh,
        mask.triangles().iter().copied(),
        |v| mask.local_index(v),
        |_| Ok(1.0),
        local_stiffness,
    )
    .expect("unit stiffness has no failure path")
}

/// Load vector over all nodes, `b_i = sum_T f(centroid_T) area_T / 3`.
pub fn assemble_load(mesh: &Mesh, f_eval: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.node_count()];
    let h = mesh.h();
    let share = h * h / 6.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [x, y] = mesh.centroid(t);
        let v = f_eval(x, y) * share;
        for &i in tri {
            b[i] += v;
        }
    }
    b
}

/// Drops boundary rows and columns of a full nodal matrix.
pub fn eliminate_boundary(mesh: &Mesh, full: &SparseSymMatrix) -> SparseSymMatrix {
    let keep: Vec<Option<usize>> = (0..mesh.node_count())
        .map(|v| mesh.interior_index(v))
        .collect();
    full.principal_submatrix(&keep, mesh.interior_count())
}

/// Solves the eliminated system and scatters the result to a zero-trace field.
pub fn solve_dirichlet(
    mesh: &Mesh,
    a_interior: &SparseSymMatrix,
    b_interior: &[f64],
    tol: f64,
) -> Result<(ScalarField, CgReport)> {
    let max_iter = sparse::default_max_iterations(a_interior.dim(), tol);
    let report = sparse::pcg(a_interior, b_interior, tol, max_iter)?;
    Ok((mesh.extend_interior(&report.solution), report))
}

/// Fast repeated assembly of eliminated stiffness matrices on one mesh.
///
/// The interior sparsity pattern and the element-to-slot scatter map are
/// computed once; each assembly is then a single pass over the triangles.
#[derive(Debug, Clone)]
pub struct StiffnessAssembler {
    pattern: SparseSymMatrix,
    slots: Vec<[Option<usize>; 9]>,
    local: Vec<[[f64; 3]; 3]>,
    centroids: Vec<[f64; 2]>,
}

impl StiffnessAssembler {
    pub fn new(mesh: &Mesh) -> Self {
        let unit = assemble_stiffness(mesh, |_, _| 1.0).expect("unit coefficient is positive");
        let pattern = eliminate_boundary(mesh, &unit);
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [None; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) =
                            (mesh.interior_index(tri[a]), mesh.interior_index(tri[b]))
                        {
                            s[3 * a + b] = pattern.slot(i, j);
                        }
                    }
                }
                s
            })
            .collect();
        let local = (0..mesh.triangles().len())
            .map(|t| local_stiffness(mesh.triangle_coords(t)))
            .collect();
        let centroids = (0..mesh.triangles().len())
            .map(|t| mesh.centroid(t))
            .collect();
        Self {
            pattern,
            slots,
            local,
            centroids,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Eliminated stiffness for coefficient `a_eval`.
    pub fn assemble(&self, a_eval: impl Fn(f64, f64) -> f64) -> Result<SparseSymMatrix> {
        let mut values = vec![0.0; self.pattern.nnz()];
        for ((slots, k), &[x, y]) in self.slots.iter().zip(&self.local).zip(&self.centroids) {
            let a = a_eval(x, y);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::ContrastViolation { x, y, value: a });
            }
            for (e, slot) in slots.iter().enumerate() {
                if let Some(s) = slot {
                    values[*s] += a * k[e / 3][e % 3];
                }
            }
        }
        Ok(self.pattern.with_values(values))
    }
}

/// Reference solver for single realizations of the random problem.
#[derive(Debug, Clone)]
pub struct FemSolver {
    mesh: Mesh,
    assembler: StiffnessAssembler,
    tol: f64,
}

impl FemSolver {
    pub fn new(mesh: Mesh, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        let assembler = StiffnessAssembler::new(&mesh);
        Ok(Self {
            mesh,
            assembler,
            tol,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn assembler(&self) -> &StiffnessAssembler {
        &self.assembler
    }

    /// Eliminated stiffness matrix for one coefficient realization.
    pub fn stiffness(&self, a_eval: impl Fn(f64, f64) -> f64) -> Result<SparseSymMatrix> {
        self.assembler.assemble(a_eval)
    }

    /// Interior load vector.
    pub fn load(&self, f_eval: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh
            .interior_values(&assemble_load(&self.mesh, f_eval))
    }

    pub fn solve(
        &self,
        a_eval: impl Fn(f64, f64) -> f64,
        f_eval: impl Fn(f64, f64) -> f64,
    ) -> Result<ScalarField> {
        let a = self.stiffness(a_eval)?;
        let b = self.load(f_eval);
        Ok(solve_dirichlet(&self.mesh, &a, &b, self.tol)?.0)
    }

    /// Solves for one parameter vector of a coefficient/force pair.
    pub fn solve_params(
        &self,
        coeff: &crate::coeff::CoeffFamily,
        force: &crate::coeff::ForceFamily,
        params: &crate::coeff::ParamVector,
    ) -> Result<ScalarField> {
        self.solve(
            |x, y| coeff.eval(&params.xi, x, y),
            |x, y| force.eval(&params.theta, x, y),
        )
    }
}

/// Relative L2 and H1-seminorm measurements on one subdomain.
///
/// Vectors passed to these methods are in mask-local numbering.
#[derive(Debug, Clone)]
pub struct MaskNorms {
    mass: SparseSymMatrix,
    laplacian: SparseSymMatrix,
}

impl MaskNorms {
    pub fn new(mesh: &Mesh, mask: &SubdomainMask) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            mass: assemble_mask_mass(mesh, mask),
            laplacian: assemble_mask_laplacian(mesh, mask),
        })
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn l2(&self, v: &[f64]) -> f64 {
        self.mass.inner(v, v).max(0.0).sqrt()
    }

    pub fn h1(&self, v: &[f64]) -> f64 {
        self.laplacian.inner(v, v).max(0.0).sqrt()
    }

    /// `(|u - v|_L2 / |u|_L2, |u - v|_H1 / |u|_H1)` with `u` the reference.
    pub fn relative_errors(&self, reference: &[f64], approx: &[f64]) -> (f64, f64) {
        let diff: Vec<f64> = reference.iter().zip(approx).map(|(a, b)| a - b).collect();
        (
            ratio(self.l2(&diff), self.l2(reference)),
            ratio(self.h1(&diff), self.h1(reference)),
        )
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `L2(mask)` norm of a full nodal field.
pub fn norm_l2(mesh: &Mesh, field: &ScalarField, mask: &SubdomainMask) -> Result<f64> {
    Ok(MaskNorms::new(mesh, mask)?.l2(&mask.gather(&field.values)))
}

/// `H1(mask)` seminorm of a full nodal field, over triangles inside the mask.
pub fn seminorm_h1(mesh: &Mesh, field: &ScalarField, mask: &SubdomainMask) -> Result<f64> {
    Ok(MaskNorms::new(mesh, mask)?.h1(&mask.gather(&field.values)))
}
