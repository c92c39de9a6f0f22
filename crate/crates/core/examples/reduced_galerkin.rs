//! Offline/online reduced Galerkin for the affine family against full solves.

use std::time::Instant;

use epod::coeff::{sample_params, CoeffFamily};
use epod::fem::{FemSolver, MaskNorms, DEFAULT_TOL};
use epod::galerkin::ReducedSystem;
use epod::mesh::{Mesh, SubdomainMask};
use epod::pod::{PodBasis, PodOptions, Truncation};
use epod::snapshots::SnapshotSet;

fn main() -> epod::Result<()> {
    let n = 64;
    let family = CoeffFamily::parse("ex1", n)?;
    let force = family.default_force();
    let mesh = Mesh::new(n)?;
    let solver = FemSolver::new(mesh.clone(), DEFAULT_TOL)?;
    let norms = MaskNorms::new(&mesh, &SubdomainMask::full(&mesh))?;
    let set = SnapshotSet::generate(&family, force, n, 60, 1, DEFAULT_TOL)?;
    let opts = PodOptions {
        truncation: Truncation::Fixed(12),
        subtract_mean: false,
    };
    let basis = PodBasis::build(&set, norms.mass(), opts)?;
    let system = ReducedSystem::precompute(&basis, &family, force, solver.clone())?;
    println!("affine blocks: {}", system.blocks().map_or(0, |b| b.len()));

    for p in sample_params(&family, &force, 5, 5)? {
        let t = Instant::now();
        let c = system.online_solve(&p)?;
        let online = t.elapsed();
        let t = Instant::now();
        let u = solver.solve_params(&family, &force, &p)?;
        let full = t.elapsed();
        let (l2, h1) = norms.relative_errors(&u.values, &basis.reconstruct(&c)?);
        println!("L2 {l2:.2e}  H1 {h1:.2e}  online {online:>10.2?}  full {full:>10.2?}");
    }
    Ok(())
}
