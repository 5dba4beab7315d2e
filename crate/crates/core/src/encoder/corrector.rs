//! Two-layer perceptron mapping per-subspace prototype distances to an
//! additive output correction.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorOptions {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Mini-batch size; `None` trains on the full set every step.
    pub batch_size: Option<usize>,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 200,
            seed: 0,
            batch_size: None,
        }
    }
}

/// `y = W2·tanh(W1·((x - mean)·scale) + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrector {
    n_in: usize,
    hidden: usize,
    n_out: usize,
    in_mean: Vec<f64>,
    in_scale: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorFit {
    /// Parameters with the lowest full-set loss seen during training,
    /// including the untrained (zero-output) starting point.
    pub corrector: Corrector,
    /// Full-set loss before training and after every epoch.
    pub loss_history: Vec<f64>,
}

impl Corrector {
    /// A corrector whose output is identically zero.
    pub fn new(n_in: usize, hidden: usize, n_out: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return arg_err("corrector hidden dimension must be >= 1");
        }
        if n_in == 0 || n_out == 0 {
            return arg_err("corrector input and output widths must be >= 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (n_in as f64).sqrt();
        let w1 = (0..hidden * n_in).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(Self {
            n_in,
            hidden,
            n_out,
            in_mean: vec![0.0; n_in],
            in_scale: vec![1.0; n_in],
            w1,
            b1: vec![0.0; hidden],
            w2: vec![0.0; n_out * hidden],
            b2: vec![0.0; n_out],
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Multiply-accumulate FLOPs of one forward pass; the `n_in·hidden`
    /// term dominates.
    pub fn flops(&self) -> usize {
        2 * (self.n_in * self.hidden + self.hidden * self.n_out)
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Trainable parameters flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return shape_err("parameter vector has the wrong length");
        }
        let (a, rest) = params.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
        Ok(())
    }

    fn hidden_act(&self, x: &[f64], u: &mut [f64], z: &mut [f64]) {
        for i in 0..self.n_in {
            u[i] = (x[i] - self.in_mean[i]) * self.in_scale[i];
        }
        for (h, zh) in z.iter_mut().enumerate().take(self.hidden) {
            let row = &self.w1[h * self.n_in..(h + 1) * self.n_in];
            let a: f64 = row.iter().zip(u.iter()).map(|(w, v)| w * v).sum::<f64>() + self.b1[h];
            *zh = a.tanh();
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_in];
        let mut z = vec![0.0; self.hidden];
        self.hidden_act(x, &mut u, &mut z);
        (0..self.n_out)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.b2[o]
            })
            .collect()
    }

    /// Mean squared error over `rows` of `inputs`/`targets` and its gradient
    /// in [`Corrector::parameters`] order.
    pub fn loss_and_gradient(&self, inputs: &Matrix, targets: &Matrix, rows: &[usize]) -> (f64, Vec<f64>) {
        let (n_in, hid, n_out) = (self.n_in, self.hidden, self.n_out);
        let mut g_w1 = vec![0.0; hid * n_in];
        let mut g_b1 = vec![0.0; hid];
        let mut g_w2 = vec![0.0; n_out * hid];
        let mut g_b2 = vec![0.0; n_out];
        let mut u = vec![0.0; n_in];
        let mut z = vec![0.0; hid];
        let mut g_z = vec![0.0; hid];
        let norm = (rows.len() * n_out) as f64;
        let mut loss = 0.0;
        for &r in rows {
            self.hidden_act(inputs.row(r), &mut u, &mut z);
            g_z.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..n_out {
                let w = &self.w2[o * hid..(o + 1) * hid];
                let y: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + self.b2[o];
                let err = y - targets.get(r, o);
                loss += err * err;
                let g = 2.0 * err / norm;
                g_b2[o] += g;
                for h in 0..hid {
                    g_w2[o * hid + h] += g * z[h];
                    g_z[h] += g * w[h];
                }
            }
            for h in 0..hid {
                let g_a = g_z[h] * (1.0 - z[h] * z[h]);
                g_b1[h] += g_a;
                for i in 0..n_in {
                    g_w1[h * n_in + i] += g_a * u[i];
                }
            }
        }
        (loss / norm, [g_w1, g_b1, g_w2, g_b2].concat())
    }

    pub fn loss(&self, inputs: &Matrix, targets: &Matrix) -> f64 {
        let mut total = 0.0;
        for r in 0..inputs.rows() {
            let y = self.forward(inputs.row(r));
            total += y
                .iter()
                .enumerate()
                .map(|(o, v)| (v - targets.get(r, o)).powi(2))
                .sum::<f64>();
        }
        total / (inputs.rows() * self.n_out) as f64
    }
}

pub fn apply_corrector(corrector: &Corrector, distances: &[f64]) -> Result<Vec<f64>> {
    if distances.len() != corrector.n_in {
        return shape_err(format!(
            "corrector expects {} distances, got {}",
            corrector.n_in,
            distances.len()
        ));
    }
    Ok(corrector.forward(distances))
}

/// Trains a corrector by gradient descent on squared error.
///
/// `inputs` holds one row of `n_s·n_p` distances per sample and `residuals`
/// one row of `Y - Y_PQ` per sample.
pub fn fit_corrector(
    inputs: &Matrix,
    residuals: &Matrix,
    hidden_dim: usize,
    opts: &CorrectorOptions,
) -> Result<CorrectorFit> {
    if hidden_dim == 0 {
        return arg_err("corrector hidden dimension must be >= 1");
    }
    if inputs.rows() != residuals.rows() || inputs.rows() == 0 {
        return shape_err(format!(
            "corrector needs matching non-empty sample counts ({} inputs, {} residuals)",
            inputs.rows(),
            residuals.rows()
        ));
    }
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return arg_err("corrector learning rate must be positive");
    }
    let mut net = Corrector::new(inputs.cols(), hidden_dim, residuals.cols(), opts.seed)?;
    let m = inputs.rows();
    for i in 0..net.n_in {
        let mean = (0..m).map(|r| inputs.get(r, i)).sum::<f64>() / m as f64;
        let var = (0..m).map(|r| (inputs.get(r, i) - mean).powi(2)).sum::<f64>() / m as f64;
        net.in_mean[i] = mean;
        net.in_scale[i] = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_c0de);
    let batch = opts.batch_size.unwrap_or(m).clamp(1, m);
    let mut order: Vec<usize> = (0..m).collect();
    let mut params = net.parameters();

    let initial = net.loss(inputs, residuals);
    let mut history = vec![initial];
    let mut best = (initial, params.clone());
    for _ in 0..opts.epochs {
        if batch < m {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (_, grad) = net.loss_and_gradient(inputs, residuals, chunk);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= opts.lr * g;
            }
            net.set_parameters(&params)?;
        }
        let loss = net.loss(inputs, residuals);
        history.push(loss);
        if loss < best.0 {
            best = (loss, params.clone());
        }
    }
    net.set_parameters(&best.1)?;
    Ok(CorrectorFit {
        corrector: net,
        loss_history: history,
    })
}
