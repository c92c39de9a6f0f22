//! Grid, Legendre and kNN maps from parameters to POD coefficients, scored on held-out fields.

use epod::coeff::{sample_params, CoeffFamily};
use epod::fem::{FemSolver, MaskNorms, DEFAULT_TOL};
use epod::maps::{build_grid_map, KnnMap, LegendreMap, OnlineMap, TrainingTable};
use epod::mesh::{Mesh, Rect};
use epod::pod::{PodBasis, PodOptions, Truncation};
use epod::snapshots::SnapshotSet;

fn main() -> epod::Result<()> {
    let n = 16;
    let family = CoeffFamily::parse("ex1", n)?;
    let force = family.default_force();
    let mesh = Mesh::new(n)?;
    let solver = FemSolver::new(mesh.clone(), DEFAULT_TOL)?;
    let train = SnapshotSet::generate(&family, force, n, 400, 1, DEFAULT_TOL)?
        .restrict(&mesh, Rect::d1())?;
    let tests = SnapshotSet::solve_all(
        &solver,
        &family,
        force,
        sample_params(&family, &force, 99, 40)?,
    )?
    .restrict(&mesh, Rect::d1())?;
    let norms = MaskNorms::new(&mesh, &train.mask(&mesh)?)?;
    let opts = PodOptions {
        truncation: Truncation::Fixed(6),
        subtract_mean: false,
    };
    let basis = PodBasis::build(&train.slice(0..100)?, norms.mass(), opts)?;
    let table = TrainingTable::build(&train, &basis, norms.mass())?;

    let maps = [
        (
            "grid 4^5",
            OnlineMap::Grid(build_grid_map(
                &family,
                force,
                &solver,
                &basis,
                norms.mass(),
                4,
            )?),
        ),
        (
            "legendre p=3",
            OnlineMap::Legendre(LegendreMap::fit(
                &table.inputs,
                &table.targets,
                table.ranges.clone(),
                3,
            )?),
        ),
        (
            "knn 20",
            OnlineMap::Knn {
                map: KnnMap::new(&table.inputs, table.targets.clone(), 20)?,
                ranges: table.ranges.clone(),
            },
        ),
    ];
    for (name, map) in &maps {
        let mut total = 0.0;
        for (j, p) in tests.params().iter().enumerate() {
            let u = tests.column(j);
            let approx = basis.reconstruct(&map.eval(&p.input())?.coeffs)?;
            total += norms.relative_errors(&u, &approx).0;
        }
        println!(
            "{name:<14} mean relative L2 {:.3e}",
            total / tests.len() as f64
        );
    }
    Ok(())
}
