//! Places point sensors by pivoted QR and rebuilds held-out fields from their readings.

use epod::coeff::{sample_params, CoeffFamily};
use epod::fem::{FemSolver, MaskNorms, DEFAULT_TOL};
use epod::mesh::{Mesh, Rect};
use epod::pod::{PodBasis, PodOptions, Truncation};
use epod::sensing::{reconstruct_from_measurements, select_sensors};
use epod::snapshots::SnapshotSet;

fn main() -> epod::Result<()> {
    let n = 32;
    let family = CoeffFamily::parse("ex4", n)?;
    let force = family.default_force();
    let mesh = Mesh::new(n)?;
    let solver = FemSolver::new(mesh.clone(), DEFAULT_TOL)?;
    let set = SnapshotSet::generate(&family, force, n, 120, 1, DEFAULT_TOL)?
        .restrict(&mesh, Rect::d1())?;
    let tests = SnapshotSet::solve_all(
        &solver,
        &family,
        force,
        sample_params(&family, &force, 77, 20)?,
    )?
    .restrict(&mesh, Rect::d1())?;
    let mask = set.mask(&mesh)?;
    let norms = MaskNorms::new(&mesh, &mask)?;
    let opts = PodOptions {
        truncation: Truncation::Fixed(8),
        subtract_mean: false,
    };
    let basis = PodBasis::build(&set, norms.mass(), opts)?;

    for m in [8, 12, 16, 24] {
        let sensors = select_sensors(&basis, m)?;
        let mut err = 0.0;
        for j in 0..tests.len() {
            let u = tests.column(j);
            let r = reconstruct_from_measurements(&basis, &sensors, &sensors.measure(&u))?;
            err += norms.relative_errors(&u, &r).0;
        }
        println!(
            "M = {m:>2}: mean relative L2 {:.3e}",
            err / tests.len() as f64
        );
    }
    let sensors = select_sensors(&basis, 8)?;
    let nodes: Vec<[f64; 2]> = sensors
        .indices
        .iter()
        .map(|&i| mesh.nodes()[mask.nodes()[i]])
        .collect();
    println!("first sensors at {nodes:.3?}");
    Ok(())
}
