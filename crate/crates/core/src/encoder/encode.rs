use crate::error::{arg_err, shape_err, Result};
use crate::shape::{Metric, SubspaceLayout};
use crate::tensor::Matrix;

use super::PrototypeBank;

/// Output of hard or soft encoding of an unrolled input.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingResult {
    pub n_s: usize,
    pub n_p: usize,
    pub cols: usize,
    /// Nearest prototype per `[subspace][column]`.
    pub indices: Vec<u32>,
    /// Soft-encoded input, same shape as the unrolled input.
    pub soft_matrix: Option<Matrix>,
    /// Distances per `[subspace][column][prototype]`.
    pub distances: Option<Vec<f64>>,
}

impl EncodingResult {
    #[inline]
    pub fn index(&self, n: usize, j: usize) -> usize {
        self.indices[n * self.cols + j] as usize
    }

    pub fn distances_at(&self, n: usize, j: usize) -> Option<&[f64]> {
        self.distances.as_ref().map(|d| {
            let start = (n * self.cols + j) * self.n_p;
            &d[start..start + self.n_p]
        })
    }

    /// Distances of column `j` flattened subspace-major, `n_s·n_p` long.
    pub fn column_distances(&self, j: usize) -> Option<Vec<f64>> {
        let d = self.distances.as_ref()?;
        let mut out = Vec::with_capacity(self.n_s * self.n_p);
        for n in 0..self.n_s {
            let start = (n * self.cols + j) * self.n_p;
            out.extend_from_slice(&d[start..start + self.n_p]);
        }
        Some(out)
    }

    /// Rebuilds the hard-encoded input (selected prototypes) with `rows` rows.
    pub fn reconstruct(&self, bank: &PrototypeBank, rows: usize) -> Matrix {
        let l_s = bank.l_s();
        let mut m = Matrix::zeros(rows, self.cols);
        for n in 0..self.n_s {
            for j in 0..self.cols {
                let proto = bank.prototype(n, self.index(n, j));
                for (e, v) in proto.iter().enumerate() {
                    let r = n * l_s + e;
                    if r < rows {
                        m.set(r, j, *v);
                    }
                }
            }
        }
        m
    }
}

/// Copies sub-column `(n, j)` of `x` into `buf`; rows past `x.rows()` read 0.
#[inline]
pub fn gather_subvector(x: &Matrix, l_s: usize, n: usize, j: usize, buf: &mut [f64]) {
    debug_assert_eq!(buf.len(), l_s);
    for (e, slot) in buf.iter_mut().enumerate() {
        let r = n * l_s + e;
        *slot = if r < x.rows() { x.get(r, j) } else { 0.0 };
    }
}

pub fn compute_distances(x_sub: &[f64], bank: &PrototypeBank, n: usize, metric: Metric) -> Result<Vec<f64>> {
    if x_sub.len() != bank.l_s() {
        return shape_err(format!(
            "sub-vector length {} does not match prototype length {}",
            x_sub.len(),
            bank.l_s()
        ));
    }
    if n >= bank.n_s() {
        return shape_err(format!("subspace {n} out of range ({})", bank.n_s()));
    }
    Ok((0..bank.n_p())
        .map(|p| metric.distance(x_sub, bank.prototype(n, p)))
        .collect())
}

/// Index of the smallest value; ties resolve to the lowest index.
#[inline]
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn check_input(x: &Matrix, bank: &PrototypeBank, layout: &SubspaceLayout) -> Result<()> {
    if bank.n_s() != layout.n_s || bank.l_s() != layout.l_s {
        return shape_err(format!(
            "bank {}x{}x{} does not match layout n_s={} l_s={}",
            bank.n_s(),
            bank.n_p(),
            bank.l_s(),
            layout.n_s,
            layout.l_s
        ));
    }
    if x.rows() != layout.a && x.rows() != layout.padded_rows() {
        return shape_err(format!(
            "unrolled input has {} rows, expected {} (or {} padded)",
            x.rows(),
            layout.a,
            layout.padded_rows()
        ));
    }
    Ok(())
}

fn encode_impl(
    x: &Matrix,
    bank: &PrototypeBank,
    layout: &SubspaceLayout,
    metric: Metric,
    keep_distances: bool,
) -> Result<EncodingResult> {
    check_input(x, bank, layout)?;
    let (n_s, n_p, cols) = (layout.n_s, bank.n_p(), x.cols());
    let mut indices = vec![0u32; n_s * cols];
    let mut all = keep_distances.then(|| Vec::with_capacity(n_s * cols * n_p));
    let mut buf = vec![0.0; layout.l_s];
    let mut dist = vec![0.0; n_p];
    for n in 0..n_s {
        for j in 0..cols {
            gather_subvector(x, layout.l_s, n, j, &mut buf);
            for (p, d) in dist.iter_mut().enumerate() {
                *d = metric.distance(&buf, bank.prototype(n, p));
            }
            indices[n * cols + j] = argmin(&dist) as u32;
            if let Some(all) = all.as_mut() {
                all.extend_from_slice(&dist);
            }
        }
    }
    Ok(EncodingResult {
        n_s,
        n_p,
        cols,
        indices,
        soft_matrix: None,
        distances: all,
    })
}

/// One-hot encoding: nearest prototype per sub-column.
pub fn encode_hard(x: &Matrix, bank: &PrototypeBank, layout: &SubspaceLayout, metric: Metric) -> Result<EncodingResult> {
    encode_impl(x, bank, layout, metric, false)
}

/// Hard encoding that also keeps every prototype distance.
pub fn encode_hard_with_distances(
    x: &Matrix,
    bank: &PrototypeBank,
    layout: &SubspaceLayout,
    metric: Metric,
) -> Result<EncodingResult> {
    encode_impl(x, bank, layout, metric, true)
}

/// `softmax(-d / tau)`, shifted by the minimum distance for stability.
pub fn soft_weights(distances: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return arg_err(format!("temperature must be positive, got {tau}"));
    }
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = distances.iter().map(|d| (-(d - min) / tau).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Soft encoding: each sub-column is replaced by a softmax-weighted mixture
/// of the prototypes, weights `softmax(-d/tau)`.
pub fn encode_soft(
    x: &Matrix,
    bank: &PrototypeBank,
    layout: &SubspaceLayout,
    metric: Metric,
    tau: f64,
) -> Result<EncodingResult> {
    if !(tau > 0.0 && tau.is_finite()) {
        return arg_err(format!("temperature must be positive, got {tau}"));
    }
    let mut res = encode_impl(x, bank, layout, metric, true)?;
    let (n_p, l_s, cols) = (bank.n_p(), layout.l_s, x.cols());
    let mut soft = Matrix::zeros(x.rows(), cols);
    for n in 0..layout.n_s {
        for j in 0..cols {
            let d = res.distances_at(n, j).expect("distances kept");
            let w = soft_weights(d, tau)?;
            for e in 0..l_s {
                let r = n * l_s + e;
                if r >= x.rows() {
                    break;
                }
                let v: f64 = (0..n_p).map(|p| w[p] * bank.prototype(n, p)[e]).sum();
                soft.set(r, j, v);
            }
        }
    }
    res.soft_matrix = Some(soft);
    Ok(res)
}
