//! P1 convergence on `-Δu = 2π² sin(πx) sin(πy)`, measured against the nodal interpolant.

use std::f64::consts::PI;

use epod::fem::{assemble_load, solve_dirichlet, MaskNorms, StiffnessAssembler};
use epod::mesh::{Mesh, SubdomainMask};

fn main() -> epod::Result<()> {
    let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let mut previous: Option<f64> = None;
    println!(
        "{:>4} {:>12} {:>8} {:>6}",
        "n", "L2 error", "ratio", "iters"
    );
    for n in [8, 16, 32, 64] {
        let mesh = Mesh::new(n)?;
        let a = StiffnessAssembler::new(&mesh).assemble(|_, _| 1.0)?;
        let b = assemble_load(&mesh, |x, y| 2.0 * PI * PI * exact(x, y));
        let (uh, report) = solve_dirichlet(&mesh, &a, &mesh.interior_values(&b), 1e-12)?;
        let u = mesh.interpolate(exact);
        let diff: Vec<f64> = uh
            .values
            .iter()
            .zip(&u.values)
            .map(|(a, b)| a - b)
            .collect();
        let err = MaskNorms::new(&mesh, &SubdomainMask::full(&mesh))?.l2(&diff);
        let ratio = previous.map_or(String::from("-"), |p| format!("{:.2}", p / err));
        println!("{n:>4} {err:>12.4e} {ratio:>8} {:>6}", report.iterations);
        previous = Some(err);
    }
    Ok(())
}
