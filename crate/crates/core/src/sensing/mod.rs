//! Sensor placement from pivoted QR of the POD basis, and least-squares
//! reconstruction from point values at the sensors.

mod qr;

use nalgebra::DMatrix;

pub use qr::{ls_solve, qr_pivoted, qr_pivoted_steps, PivotedQr, RANK_TOL};

use crate::error::{Error, Result};
use crate::pod::PodBasis;

/// Largest mask for which `M > K` placement forms the `J x J` matrix `Phi Phi^T`.
pub const MAX_OUTER_PRODUCT_NODES: usize = 5000;

/// Measurement nodes and the rows of `Phi` they pick out.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSet {
    /// Mask-local node indices, in pivot order.
    pub indices: Vec<usize>,
    /// `M x K` measurement matrix.
    pub b: DMatrix<f64>,
}

impl SensorSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Samples a mask-local field at the sensors.
    pub fn measure(&self, field: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| field[i]).collect()
    }
}

/// First `m` pivots of QR on `Phi^T` (`m = K`) or on `Phi Phi^T` (`m > K`).
pub fn select_sensors(basis: &PodBasis, m: usize) -> Result<SensorSet> {
    let (j, k) = (basis.rows(), basis.k());
    if k == 0 {
        return Err(Error::invalid(
            "sensor placement needs at least one basis function",
        ));
    }
    if m < k {
        return Err(Error::invalid(format!(
            "need at least K = {k} sensors, got {m}"
        )));
    }
    if m > j {
        return Err(Error::invalid(format!(
            "{m} sensors requested on {j} nodes"
        )));
    }
    let phi = basis.phi();
    let factor = if m == k {
        qr_pivoted_steps(&phi.transpose(), m)
    } else {
        if j > MAX_OUTER_PRODUCT_NODES {
            return Err(Error::invalid(format!(
                "M > K placement forms a {j} x {j} matrix (limit {MAX_OUTER_PRODUCT_NODES} nodes); \
                 use M = K or a smaller mask"
            )));
        }
        qr_pivoted_steps(&(phi * phi.transpose()), m)
    };
    let indices = factor.permutation()[..m].to_vec();
    let b = phi.select_rows(indices.iter());
    Ok(SensorSet { indices, b })
}

/// Least-squares coefficients of `B c = y`.
pub fn fit_measurements(sensors: &SensorSet, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != sensors.len() {
        return Err(Error::DimensionMismatch {
            context: "sensor measurements",
            expected: sensors.len(),
            found: y.len(),
        });
    }
    ls_solve(&sensors.b, y)
}

/// Field on the mask from point measurements: `Phi c` with `B c = y`.
pub fn reconstruct_from_measurements(
    basis: &PodBasis,
    sensors: &SensorSet,
    y: &[f64],
) -> Result<Vec<f64>> {
    let y = match basis.mean() {
        Some(mean) => y
            .iter()
            .zip(&sensors.indices)
            .map(|(v, &i)| v - mean[i])
            .collect(),
        None => y.to_vec(),
    };
    basis.reconstruct(&fit_measurements(sensors, &y)?)
}
