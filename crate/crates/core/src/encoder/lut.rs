use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, PqaError, Result};
use crate::shape::SubspaceLayout;
use crate::tensor::Matrix;

use super::{EncodingResult, PrototypeBank};

/// Precomputed weight/prototype dot products, indexed
/// `[out_channel][subspace][prototype]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutPQ {
    c_out: usize,
    n_s: usize,
    n_p: usize,
    values: Vec<f64>,
}

impl LutPQ {
    pub fn new(c_out: usize, n_s: usize, n_p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != c_out * n_s * n_p {
            return shape_err(format!(
                "lut {c_out}x{n_s}x{n_p} needs {} values, got {}",
                c_out * n_s * n_p,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return arg_err("lookup table contains non-finite values");
        }
        Ok(Self { c_out, n_s, n_p, values })
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    #[inline]
    pub fn get(&self, o: usize, n: usize, p: usize) -> f64 {
        self.values[(o * self.n_s + n) * self.n_p + p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of subspace `n` across all output channels and prototypes.
    pub fn subspace_values(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.c_out).flat_map(move |o| (0..self.n_p).map(move |p| self.get(o, n, p)))
    }
}

/// Builds the table of dot products between every `l_s`-long weight
/// sub-row and every prototype of the same subspace. Weight positions past
/// the real row length are zero.
pub fn build_lut(weights: &Matrix, bank: &PrototypeBank, layout: &SubspaceLayout) -> Result<LutPQ> {
    if bank.n_s() != layout.n_s || bank.l_s() != layout.l_s {
        return shape_err("bank does not match subspace layout");
    }
    if weights.cols() != layout.a && weights.cols() != layout.padded_rows() {
        return shape_err(format!(
            "weight rows have length {}, expected {}",
            weights.cols(),
            layout.a
        ));
    }
    let (c_out, n_s, n_p, l_s) = (weights.rows(), layout.n_s, bank.n_p(), layout.l_s);
    let mut values = Vec::with_capacity(c_out * n_s * n_p);
    let mut w_sub = vec![0.0; l_s];
    for o in 0..c_out {
        let row = weights.row(o);
        for n in 0..n_s {
            for (e, slot) in w_sub.iter_mut().enumerate() {
                *slot = row.get(n * l_s + e).copied().unwrap_or(0.0);
            }
            for p in 0..n_p {
                values.push(dot(&w_sub, bank.prototype(n, p)));
            }
        }
    }
    LutPQ::new(c_out, n_s, n_p, values)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Re-solves the occupied table cells against target outputs.
///
/// Each output channel `o` minimises
/// `Σ_j (y[o][j] - Σ_n lut[o][n][idx(n,j)])² + ridge·Σ (lut - lut₀)²`
/// over the cells hit by at least one sample, where `lut₀` is the input
/// table. Unoccupied cells keep their values. The penalty pulls towards the
/// current table, so the refit never raises the fitting-set error.
pub fn refit_lut(lut: &LutPQ, encoding: &EncodingResult, targets: &Matrix, ridge: f64) -> Result<LutPQ> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return arg_err(format!("ridge must be a non-negative real, got {ridge}"));
    }
    if encoding.n_s != lut.n_s || encoding.n_p != lut.n_p {
        return shape_err("encoding does not match the lookup table");
    }
    if targets.rows() != lut.c_out || targets.cols() != encoding.cols {
        return shape_err(format!(
            "targets are {}x{}, expected {}x{}",
            targets.rows(),
            targets.cols(),
            lut.c_out,
            encoding.cols
        ));
    }
    let (n_s, n_p, m) = (lut.n_s, lut.n_p, encoding.cols);

    // compact numbering of occupied cells
    let mut slot = vec![usize::MAX; n_s * n_p];
    let mut cells = Vec::new();
    for n in 0..n_s {
        for j in 0..m {
            let cell = n * n_p + encoding.index(n, j);
            if slot[cell] == usize::MAX {
                slot[cell] = 0;
            }
        }
    }
    for (cell, s) in slot.iter_mut().enumerate() {
        if *s == 0 {
            *s = cells.len();
            cells.push(cell);
        }
    }
    let k = cells.len();

    let mut gram = vec![0.0; k * k];
    let mut col_cells = vec![0usize; n_s];
    for j in 0..m {
        for (n, c) in col_cells.iter_mut().enumerate() {
            *c = slot[n * n_p + encoding.index(n, j)];
        }
        for &a in &col_cells {
            for &b in &col_cells {
                gram[a * k + b] += 1.0;
            }
        }
    }
    for i in 0..k {
        gram[i * k + i] += ridge;
    }
    let chol = cholesky(&gram, k).ok_or_else(|| {
        PqaError::Numeric(
            "normal equations of the table refit are singular; use ridge > 0".to_string(),
        )
    })?;

    let mut values = lut.values.clone();
    let mut rhs = vec![0.0; k];
    for o in 0..lut.c_out {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..m {
            let y = targets.get(o, j);
            for n in 0..n_s {
                rhs[slot[n * n_p + encoding.index(n, j)]] += y;
            }
        }
        for (i, &cell) in cells.iter().enumerate() {
            rhs[i] += ridge * lut.values[o * n_s * n_p + cell];
        }
        let sol = cholesky_solve(&chol, k, &rhs);
        for (i, &cell) in cells.iter().enumerate() {
            values[o * n_s * n_p + cell] = sol[i];
        }
    }
    LutPQ::new(lut.c_out, n_s, n_p, values)
}

/// Lower-triangular Cholesky factor of a symmetric `k × k` matrix, or `None`
/// when a pivot is not safely positive.
fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let max_diag = (0..k).map(|i| a[i * k + i]).fold(0.0f64, f64::max);
    let tol = 1e-10 * max_diag.max(1.0);
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s -= l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    x
}
