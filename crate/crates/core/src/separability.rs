//! Discrete Green's function blocks between disjoint subdomains and their
//! singular-value decay.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::StiffnessAssembler;
use crate::mesh::{Mesh, Rect, SubdomainMask};
use crate::pod::eig_sym;
use crate::sparse::{default_max_iterations, pcg};

/// Responses on a target mask to unit nodal loads at source nodes.
#[derive(Debug, Clone)]
pub struct GreensBlock {
    /// Mesh node ids of the retained sources (columns).
    pub sources: Vec<usize>,
    /// Mesh node ids of the targets (rows).
    pub targets: Vec<usize>,
    /// `targets x sources`.
    pub matrix: DMatrix<f64>,
}

/// Solves once per `stride`-th interior node of `source` and samples the
/// solution on `target`.
pub fn greens_block(
    mesh: &Mesh,
    a_eval: impl Fn(f64, f64) -> f64 + Sync,
    target: Rect,
    source: Rect,
    stride: usize,
    tol: f64,
) -> Result<GreensBlock> {
    if stride == 0 {
        return Err(Error::invalid("source stride must be at least 1"));
    }
    if target.intersects(&source) {
        return Err(Error::OverlappingMasks);
    }
    let target_mask = SubdomainMask::new(mesh, target)?;
    let source_mask = SubdomainMask::new(mesh, source)?;
    let sources: Vec<usize> = source_mask
        .nodes()
        .iter()
        .copied()
        .filter(|&v| mesh.interior_index(v).is_some())
        .step_by(stride)
        .collect();
    if sources.is_empty() {
        return Err(Error::EmptyMask);
    }

    let a = StiffnessAssembler::new(mesh).assemble(a_eval)?;
    let max_iter = default_max_iterations(a.dim(), tol);
    let columns: Vec<Vec<f64>> = sources
        .par_iter()
        .map(|&node| {
            let mut b = vec![0.0; a.dim()];
            b[mesh.interior_index(node).expect("sources are interior")] = 1.0;
            let x = pcg(&a, &b, tol, max_iter)?.solution;
            let full = mesh.extend_interior(&x);
            Ok(target_mask.gather(&full.values))
        })
        .collect::<Result<_>>()?;

    let rows = target_mask.len();
    let mut matrix = DMatrix::zeros(rows, columns.len());
    for (j, col) in columns.iter().enumerate() {
        matrix.column_mut(j).copy_from_slice(col);
    }
    Ok(GreensBlock {
        sources,
        targets: target_mask.nodes().to_vec(),
        matrix,
    })
}

/// Singular values `sigma_1 >= sigma_2 >= ...`.
///
/// Right singular vectors come from the eigenvectors of `G^T G`; each value is
/// then measured as `|G v_k|`, which resolves values far below
/// `sqrt(eps) sigma_1` where square roots of the eigenvalues cannot.
pub fn singular_decay(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let gram = matrix.transpose() * matrix;
    let gram = (&gram + gram.transpose()) * 0.5;
    let spectrum = eig_sym(&gram)?;
    let mut sigma: Vec<f64> = (0..spectrum.len())
        .map(|k| (matrix * spectrum.vectors.column(k)).norm())
        .collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}

/// `sigma_k / sigma_1` for every `k`.
pub fn normalized(sigma: &[f64]) -> Vec<f64> {
    let top = sigma.first().copied().unwrap_or(0.0);
    sigma
        .iter()
        .map(|s| if top > 0.0 { s / top } else { 0.0 })
        .collect()
}

/// Least-squares slope of `log10(sigma_k / sigma_1)` against `k` over `ks`.
pub fn log_decay_slope(sigma: &[f64], ks: std::ops::RangeInclusive<usize>) -> f64 {
    let rel = normalized(sigma);
    let pts: Vec<(f64, f64)> = ks
        .filter(|&k| k >= 1 && k <= rel.len() && rel[k - 1] > 0.0)
        .map(|k| (k as f64, rel[k - 1].log10()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
