//! Singular values of the discrete Green's block between the source and target subdomains.

use epod::coeff::{sample_one, CoeffFamily};
use epod::fem::DEFAULT_TOL;
use epod::mesh::{Mesh, Rect};
use epod::separability::{greens_block, normalized, singular_decay};

fn main() -> epod::Result<()> {
    let n = 32;
    let family = CoeffFamily::parse("ex1", n)?;
    let mesh = Mesh::new(n)?;
    for draw in 0..3 {
        let p = sample_one(&family, &family.default_force(), 3, draw);
        let block = greens_block(
            &mesh,
            |x, y| family.eval(&p.xi, x, y),
            Rect::d1(),
            Rect::d2(),
            1,
            DEFAULT_TOL,
        )?;
        let sigma = normalized(&singular_decay(&block.matrix)?);
        let shown: Vec<String> = sigma.iter().take(12).map(|s| format!("{s:.1e}")).collect();
        println!(
            "draw {draw}: {}x{} block, sigma_k/sigma_1 = {}",
            block.matrix.nrows(),
            block.matrix.ncols(),
            shown.join(" ")
        );
    }
    Ok(())
}
