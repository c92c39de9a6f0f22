//! Offline stage: snapshots, the POD basis on the local subdomain, and a file round trip.

use epod::coeff::CoeffFamily;
use epod::fem::{MaskNorms, DEFAULT_TOL};
use epod::mesh::{Mesh, Rect};
use epod::pod::{energy_curve, pod_error_identity, PodBasis, PodOptions, Truncation};
use epod::snapshots::SnapshotSet;

fn main() -> epod::Result<()> {
    let n = 32;
    let family = CoeffFamily::parse("ex1", n)?;
    let mesh = Mesh::new(n)?;
    let set = SnapshotSet::generate(&family, family.default_force(), n, 100, 1, DEFAULT_TOL)?
        .restrict(&mesh, Rect::d1())?;
    let norms = MaskNorms::new(&mesh, &set.mask(&mesh)?)?;

    let opts = PodOptions {
        truncation: Truncation::Energy(0.999),
        subtract_mean: false,
    };
    let basis = PodBasis::build(&set, norms.mass(), opts)?;
    println!(
        "{} snapshots on {} nodes, K = {}",
        set.len(),
        basis.rows(),
        basis.k()
    );
    for (i, (lambda, e)) in basis
        .eigenvalues()
        .iter()
        .zip(energy_curve(basis.eigenvalues()))
        .enumerate()
        .take(basis.k() + 2)
    {
        println!("  lambda_{:<2} {lambda:.4e}  energy {e:.6}", i + 1);
    }
    let (lhs, rhs) = pod_error_identity(&set, &basis, norms.mass())?;
    println!("mean squared error {lhs:.4e}, eigenvalue tail {rhs:.4e}");

    let dir = std::env::temp_dir().join("epod-offline-example");
    std::fs::create_dir_all(&dir)?;
    set.save(dir.join("snapshots.pods"))?;
    basis.save(dir.join("basis.podb"))?;
    let back = PodBasis::load(dir.join("basis.podb"))?;
    assert_eq!(back.phi(), basis.phi());
    println!("wrote {}", dir.display());
    Ok(())
}
