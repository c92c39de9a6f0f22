//! Residual tanh network from `(xi, theta)` to POD coefficients.
//!
//! `h_1 = W_0 x + b_0`, `h_{l+1} = tanh(A_l h_l + b_l) + h_l` for `l = 1..=3`,
//! output `W_4 h_4 + b_4`. Inputs are rescaled to `[-1, 1]` per dimension and
//! the raw output is mapped back as `mean + scale * y`, with one scalar
//! `scale` so the loss keeps its relative weighting across components.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io;
use crate::maps::TrainingTable;

pub const WIDTH: usize = 50;
pub const BLOCKS: usize = 3;

const MAGIC: &[u8; 4] = b"PNET";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ResNet {
    input_dim: usize,
    output_dim: usize,
    width: usize,
    blocks: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    mean: Vec<f64>,
    scale: f64,
    params: Vec<f64>,
}

/// Offsets of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Affine {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

/// Intermediate values of one batch forward pass.
struct Trace {
    x: DMatrix<f64>,
    /// `h_1 ..= h_{blocks+1}`.
    h: Vec<DMatrix<f64>>,
    /// `tanh` outputs of each block.
    t: Vec<DMatrix<f64>>,
    y: DMatrix<f64>,
}

impl ResNet {
    /// Fresh network with weights uniform in `+-1/sqrt(fan_in)` and zero biases.
    pub fn new(
        ranges: &[(f64, f64)],
        output_dim: usize,
        width: usize,
        blocks: usize,
        seed: u64,
    ) -> Result<Self> {
        if ranges.is_empty() || output_dim == 0 || width == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        if ranges.iter().any(|r| !(r.1 > r.0)) {
            return Err(Error::invalid("input ranges must have positive width"));
        }
        let mut net = Self {
            input_dim: ranges.len(),
            output_dim,
            width,
            blocks,
            lo: ranges.iter().map(|r| r.0).collect(),
            hi: ranges.iter().map(|r| r.1).collect(),
            mean: vec![0.0; output_dim],
            scale: 1.0,
            params: Vec::new(),
        };
        net.params = vec![0.0; net.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in net.layers() {
            let bound = 1.0 / (layer.cols as f64).sqrt();
            for p in &mut net.params[layer.w..layer.w + layer.rows * layer.cols] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Paper-sized network: four hidden layers of 50 units.
    pub fn standard(ranges: &[(f64, f64)], output_dim: usize, seed: u64) -> Result<Self> {
        Self::new(ranges, output_dim, WIDTH, BLOCKS, seed)
    }

    fn layers(&self) -> Vec<Affine> {
        let mut out = Vec::with_capacity(self.blocks + 2);
        let mut off = 0;
        let mut push = |rows: usize, cols: usize| {
            let l = Affine {
                w: off,
                b: off + rows * cols,
                rows,
                cols,
            };
            off += rows * cols + rows;
            l
        };
        out.push(push(self.width, self.input_dim));
        for _ in 0..self.blocks {
            out.push(push(self.width, self.width));
        }
        out.push(push(self.output_dim, self.width));
        out
    }

    /// `w r + w + blocks (w^2 + w) + K w + K`.
    pub fn param_count(&self) -> usize {
        let (r, w, k) = (self.input_dim, self.width, self.output_dim);
        w * r + w + self.blocks * (w * w + w) + k * w + k
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Sets the output de-normalization `c = mean + scale * y`.
    pub fn set_output_scaling(&mut self, mean: Vec<f64>, scale: f64) -> Result<()> {
        if mean.len() != self.output_dim || !(scale > 0.0) {
            return Err(Error::invalid(
                "output scaling needs K means and a positive scale",
            ));
        }
        self.mean = mean;
        self.scale = scale;
        Ok(())
    }

    fn weight(&self, l: Affine) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.params[l.w..l.b], l.rows, l.cols)
    }

    fn bias(&self, l: Affine) -> DVector<f64> {
        DVector::from_column_slice(&self.params[l.b..l.b + l.rows])
    }

    fn affine(&self, l: Affine, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.weight(l) * x;
        let b = self.bias(l);
        for mut col in out.column_iter_mut() {
            col += &b;
        }
        out
    }

    /// Rescaled inputs, one column per sample.
    fn normalize(&self, inputs: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(self.input_dim, inputs.len(), |d, n| {
            2.0 * (inputs[n][d] - self.lo[d]) / (self.hi[d] - self.lo[d]) - 1.0
        })
    }

    fn trace(&self, x: DMatrix<f64>) -> Trace {
        let layers = self.layers();
        let mut h = vec![self.affine(layers[0], &x)];
        let mut t = Vec::with_capacity(self.blocks);
        for l in 1..=self.blocks {
            let z = self.affine(layers[l], &h[l - 1]).map(f64::tanh);
            h.push(&z + &h[l - 1]);
            t.push(z);
        }
        let y = self.affine(layers[self.blocks + 1], &h[self.blocks]);
        Trace { x, h, t, y }
    }

    /// Predicted coefficients for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim,
                found: input.len(),
            });
        }
        let y = self.trace(self.normalize(&[input])).y;
        Ok((0..self.output_dim)
            .map(|j| self.mean[j] + self.scale * y[j])
            .collect())
    }

    /// Predictions for every row of `inputs` (`N x r`), as `N x K`.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim,
                found: inputs.ncols(),
            });
        }
        let rows: Vec<Vec<f64>> = (0..inputs.nrows())
            .map(|i| inputs.row(i).iter().copied().collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let y = self.trace(self.normalize(&refs)).y;
        Ok(DMatrix::from_fn(inputs.nrows(), self.output_dim, |n, j| {
            self.mean[j] + self.scale * y[(j, n)]
        }))
    }

    /// Loss `(1/B) sum_n (1/K) |c_n - c^_n|^2` over the selected rows.
    pub fn loss(&self, table: &TrainingTable, rows: &[usize]) -> Result<f64> {
        Ok(self.loss_and_gradient(table, rows, false)?.0)
    }

    /// Loss and its gradient with respect to [`ResNet::params`].
    pub fn gradient(&self, table: &TrainingTable, rows: &[usize]) -> Result<(f64, Vec<f64>)> {
        let (loss, grad) = self.loss_and_gradient(table, rows, true)?;
        Ok((loss, grad.unwrap()))
    }

    /// Works in normalized output units `y = (c - mean) / scale`; the loss and
    /// gradient returned are in coefficient units.
    fn loss_and_gradient(
        &self,
        table: &TrainingTable,
        rows: &[usize],
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>)> {
        let (normalized_loss, grad) = self.normalized_step(table, rows, with_grad)?;
        let s2 = self.scale * self.scale;
        Ok((
            normalized_loss * s2,
            grad.map(|g| g.into_iter().map(|v| v * s2).collect()),
        ))
    }

    fn normalized_step(
        &self,
        table: &TrainingTable,
        rows: &[usize],
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>)> {
        if rows.is_empty() {
            return Err(Error::invalid("loss needs a nonempty batch"));
        }
        if table.dim() != self.input_dim || table.k() != self.output_dim {
            return Err(Error::DimensionMismatch {
                context: "training table vs network",
                expected: self.input_dim + self.output_dim,
                found: table.dim() + table.k(),
            });
        }
        let inputs: Vec<Vec<f64>> = rows.iter().map(|&i| table.input(i)).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(|r| r.as_slice()).collect();
        let tr = self.trace(self.normalize(&refs));
        let (k, b) = (self.output_dim, rows.len());
        let target = DMatrix::from_fn(k, b, |j, n| {
            (table.targets[(rows[n], j)] - self.mean[j]) / self.scale
        });
        let diff = &tr.y - target;
        let loss = diff.norm_squared() / (b * k) as f64;
        if !with_grad {
            return Ok((loss, None));
        }

        let layers = self.layers();
        let mut grad = vec![0.0; self.params.len()];
        let mut store = |l: Affine, delta: &DMatrix<f64>, input: &DMatrix<f64>| {
            let gw = delta * input.transpose();
            grad[l.w..l.b].copy_from_slice(gw.as_slice());
            for (i, row) in delta.row_iter().enumerate() {
                grad[l.b + i] = row.sum();
            }
        };

        let dy = diff * (2.0 / (b * k) as f64);
        let out = layers[self.blocks + 1];
        store(out, &dy, &tr.h[self.blocks]);
        let mut dh = self.weight(out).transpose() * &dy;
        for l in (1..=self.blocks).rev() {
            let t = &tr.t[l - 1];
            let dz = dh.zip_map(t, |g, t| g * (1.0 - t * t));
            store(layers[l], &dz, &tr.h[l - 1]);
            dh += self.weight(layers[l]).transpose() * &dz;
        }
        store(layers[0], &dh, &tr.x);
        Ok((loss, Some(grad)))
    }

    /// Analytic `dc / dx` at one input, as `K x r`.
    pub fn input_jacobian(&self, input: &[f64]) -> Result<DMatrix<f64>> {
        self.forward(input)?;
        let layers = self.layers();
        let tr = self.trace(self.normalize(&[input]));
        let stretch = DMatrix::from_diagonal(&DVector::from_iterator(
            self.input_dim,
            self.lo.iter().zip(&self.hi).map(|(lo, hi)| 2.0 / (hi - lo)),
        ));
        let mut j = self.weight(layers[0]) * stretch;
        for l in 1..=self.blocks {
            let t = &tr.t[l - 1];
            let mut inner = self.weight(layers[l]) * &j;
            for (r, mut row) in inner.row_iter_mut().enumerate() {
                row *= 1.0 - t[r] * t[r];
            }
            j += inner;
        }
        Ok(self.weight(layers[self.blocks + 1]) * j * self.scale)
    }

    /// Upper bound on the input Lipschitz constant (Frobenius norms).
    pub fn lipschitz_bound(&self) -> f64 {
        let layers = self.layers();
        let input_stretch = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| 2.0 / (hi - lo))
            .fold(0.0, f64::max);
        let mut bound = self.scale * input_stretch * self.weight(layers[0]).norm();
        for &l in &layers[1..=self.blocks] {
            bound *= 1.0 + self.weight(l).norm();
        }
        bound * self.weight(layers[self.blocks + 1]).norm()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        io::write_header(w, MAGIC, VERSION)?;
        for v in [self.input_dim, self.output_dim, self.width, self.blocks] {
            io::write_u64(w, v as u64)?;
        }
        io::write_f64s(w, &self.lo)?;
        io::write_f64s(w, &self.hi)?;
        io::write_f64s(w, &self.mean)?;
        io::write_f64s(w, &[self.scale])?;
        io::write_f64s(w, &self.params)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        io::read_header(r, MAGIC, VERSION)?;
        let input_dim = io::read_usize(r)?;
        let output_dim = io::read_usize(r)?;
        let width = io::read_usize(r)?;
        let blocks = io::read_usize(r)?;
        if input_dim == 0 || output_dim == 0 || width == 0 || width > 1 << 16 || blocks > 1 << 10 {
            return Err(Error::Format("implausible network dimensions".into()));
        }
        let lo = io::read_f64s(r, input_dim)?;
        let hi = io::read_f64s(r, input_dim)?;
        let mean = io::read_f64s(r, output_dim)?;
        let scale = io::read_f64s(r, 1)?[0];
        let mut net = Self {
            input_dim,
            output_dim,
            width,
            blocks,
            lo,
            hi,
            mean,
            scale,
            params: Vec::new(),
        };
        net.params = io::read_f64s(r, net.param_count())?;
        io::expect_eof(r)?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Stop after the epoch that crosses this wall-clock budget.
    pub max_seconds: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            max_seconds: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.batch_size > 0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid training configuration {self:?}"
            )))
        }
    }
}

/// Per-component target means and one RMS scale of the centred targets.
pub fn output_scaling(table: &TrainingTable) -> (Vec<f64>, f64) {
    let mean: Vec<f64> = (0..table.k())
        .map(|j| table.targets.column(j).mean())
        .collect();
    let mut ss = 0.0;
    for j in 0..table.k() {
        for i in 0..table.len() {
            ss += (table.targets[(i, j)] - mean[j]).powi(2);
        }
    }
    let rms = (ss / (table.len() * table.k()).max(1) as f64).sqrt();
    (mean, if rms > 0.0 { rms } else { 1.0 })
}

/// Trains a fresh standard network; returns it with the per-epoch full-table loss.
pub fn train(table: &TrainingTable, config: &TrainConfig) -> Result<(ResNet, Vec<f64>)> {
    let mut net = ResNet::standard(&table.ranges, table.k(), config.seed)?;
    let (mean, scale) = output_scaling(table);
    net.set_output_scaling(mean, scale)?;
    let history = train_net(&mut net, table, config, |_, _| {})?;
    Ok((net, history))
}

/// Adam over shuffled minibatches; `on_epoch(epoch, net)` runs after each epoch.
pub fn train_net(
    net: &mut ResNet,
    table: &TrainingTable,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &ResNet),
) -> Result<Vec<f64>> {
    config.validate()?;
    if table.is_empty() {
        return Err(Error::invalid("training table is empty"));
    }
    let all: Vec<usize> = (0..table.len()).collect();
    let mut order = all.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_ada_u64);
    let mut m = vec![0.0; net.params.len()];
    let mut v = vec![0.0; net.params.len()];
    let mut step = 0i32;
    let mut history = Vec::with_capacity(config.epochs);
    let start = Instant::now();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (_, grad) = net.normalized_step(table, batch, true)?;
            let grad = grad.unwrap();
            step += 1;
            let c1 = 1.0 - config.beta1.powi(step);
            let c2 = 1.0 - config.beta2.powi(step);
            for (i, g) in grad.into_iter().enumerate() {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                let update =
                    config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + config.epsilon);
                net.params[i] -= update;
            }
        }
        let loss = net.loss(table, &all)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
        on_epoch(epoch, net);
        if config
            .max_seconds
            .is_some_and(|s| start.elapsed().as_secs_f64() >= s)
        {
            break;
        }
    }
    Ok(history)
}
