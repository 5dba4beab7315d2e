use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::shape::{PQConfig, SubspaceLayout};

/// Prototype tables of one layer, indexed `[subspace][prototype][element]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeBank {
    n_s: usize,
    n_p: usize,
    l_s: usize,
    values: Vec<f64>,
}

impl PrototypeBank {
    pub fn new(n_s: usize, n_p: usize, l_s: usize, values: Vec<f64>) -> Result<Self> {
        if n_s == 0 || n_p == 0 || l_s == 0 {
            return arg_err("prototype bank dimensions must be >= 1");
        }
        if values.len() != n_s * n_p * l_s {
            return shape_err(format!(
                "bank {n_s}x{n_p}x{l_s} needs {} values, got {}",
                n_s * n_p * l_s,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return arg_err("prototype bank contains non-finite values");
        }
        Ok(Self { n_s, n_p, l_s, values })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn l_s(&self) -> usize {
        self.l_s
    }

    #[inline]
    pub fn prototype(&self, n: usize, p: usize) -> &[f64] {
        let start = (n * self.n_p + p) * self.l_s;
        &self.values[start..start + self.l_s]
    }

    /// All prototypes of subspace `n`, concatenated.
    pub fn subspace(&self, n: usize) -> &[f64] {
        let per = self.n_p * self.l_s;
        &self.values[n * per..(n + 1) * per]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_against(&self, config: &PQConfig, layout: &SubspaceLayout) -> Result<()> {
        if self.n_s != layout.n_s || self.l_s != layout.l_s || self.n_p != config.n_p || config.l_s != layout.l_s {
            return shape_err(format!(
                "bank {}x{}x{} inconsistent with n_s={}, n_p={}, l_s={}",
                self.n_s, self.n_p, self.l_s, layout.n_s, config.n_p, layout.l_s
            ));
        }
        Ok(())
    }

    /// Returns a bank with `extra` prototypes appended to every subspace.
    /// `extra` is indexed `[subspace][prototype][element]`.
    pub fn extended(&self, extra_per_subspace: usize, extra: &[f64]) -> Result<Self> {
        if extra.len() != self.n_s * extra_per_subspace * self.l_s {
            return shape_err("extension table has the wrong length");
        }
        let n_p = self.n_p + extra_per_subspace;
        let mut values = Vec::with_capacity(self.n_s * n_p * self.l_s);
        let chunk = extra_per_subspace * self.l_s;
        for n in 0..self.n_s {
            values.extend_from_slice(self.subspace(n));
            values.extend_from_slice(&extra[n * chunk..(n + 1) * chunk]);
        }
        Self::new(self.n_s, n_p, self.l_s, values)
    }
}
