//! Draws one realization per coefficient family and reports its range and contrast.

use epod::coeff::{sample_one, CoeffFamily};
use epod::mesh::Mesh;

fn main() -> epod::Result<()> {
    let n = 64;
    let mesh = Mesh::new(n)?;
    println!(
        "{:<10} {:>4} {:>11} {:>11} {:>10}",
        "family", "dim", "min a", "max a", "contrast"
    );
    for id in ["ex1", "ex2", "interface", "ex3", "ex4"] {
        let family = CoeffFamily::parse(id, n)?;
        let p = sample_one(&family, &family.default_force(), 7, 0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for t in 0..mesh.triangles().len() {
            let [x, y] = mesh.centroid(t);
            let a = family.eval_checked(&p.xi, x, y)?;
            lo = lo.min(a);
            hi = hi.max(a);
        }
        println!(
            "{id:<10} {:>4} {lo:>11.4e} {hi:>11.4e} {:>10.1}",
            family.dim(),
            hi / lo
        );
    }
    Ok(())
}
