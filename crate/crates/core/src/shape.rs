//! Layer geometry and subspace partitioning.
//!
//! Convolutions use "same" zero padding: the output grid is
//! `ceil(H/s) × ceil(W/s)` and the total padding along an axis is
//! `max((out - 1)·s + k - in, 0)`, split with the smaller half first.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Pointwise,
    Depthwise,
    Linear,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Pointwise => "pointwise",
            LayerKind::Depthwise => "depthwise",
            LayerKind::Linear => "linear",
        }
    }
}

/// Geometry of one network layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
    pub groups: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub pq_enabled: bool,
    /// Whether the dense layer carries a bias vector. Only affects parameter
    /// and FLOP accounting; PQ layers never use it.
    #[serde(default)]
    pub bias: bool,
}

impl LayerSpec {
    pub fn conv(name: &str, c_in: usize, c_out: usize, k: usize, stride: usize, in_h: usize, in_w: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::Conv,
            c_in,
            c_out,
            k_h: k,
            k_w: k,
            stride,
            groups: 1,
            in_h,
            in_w,
            pq_enabled: false,
            bias: false,
        }
    }

    pub fn pointwise(name: &str, c_in: usize, c_out: usize, in_h: usize, in_w: usize) -> Self {
        Self {
            kind: LayerKind::Pointwise,
            ..Self::conv(name, c_in, c_out, 1, 1, in_h, in_w)
        }
    }

    pub fn depthwise(name: &str, channels: usize, k: usize, stride: usize, in_h: usize, in_w: usize) -> Self {
        Self {
            kind: LayerKind::Depthwise,
            groups: channels,
            ..Self::conv(name, channels, channels, k, stride, in_h, in_w)
        }
    }

    pub fn linear(name: &str, c_in: usize, c_out: usize) -> Self {
        Self {
            kind: LayerKind::Linear,
            ..Self::conv(name, c_in, c_out, 1, 1, 1, 1)
        }
    }

    pub fn with_pq(mut self, enabled: bool) -> Self {
        self.pq_enabled = enabled;
        self
    }

    pub fn with_bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("c_in", self.c_in),
            ("c_out", self.c_out),
            ("k_h", self.k_h),
            ("k_w", self.k_w),
            ("stride", self.stride),
            ("groups", self.groups),
            ("in_h", self.in_h),
            ("in_w", self.in_w),
        ];
        if let Some((field, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return arg_err(format!("layer '{}': {field} must be >= 1", self.name));
        }
        if !self.c_in.is_multiple_of(self.groups) || !self.c_out.is_multiple_of(self.groups) {
            return shape_err(format!(
                "layer '{}': channels {}->{} not divisible by groups {}",
                self.name, self.c_in, self.c_out, self.groups
            ));
        }
        if self.kind == LayerKind::Depthwise
            && !(self.groups == self.c_in && self.c_in == self.c_out)
        {
            return shape_err(format!(
                "layer '{}': depthwise requires groups == c_in == c_out",
                self.name
            ));
        }
        if self.kind == LayerKind::Linear
            && (self.k_h, self.k_w, self.in_h, self.in_w, self.stride, self.groups) != (1, 1, 1, 1, 1, 1)
        {
            return shape_err(format!(
                "layer '{}': linear layers have unit kernel, stride, groups and spatial size",
                self.name
            ));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        self.in_h.div_ceil(self.stride)
    }

    pub fn out_w(&self) -> usize {
        self.in_w.div_ceil(self.stride)
    }

    /// Zero padding before the first row and column.
    pub fn pad_top_left(&self) -> (usize, usize) {
        let total = |out: usize, k: usize, input: usize| ((out - 1) * self.stride + k).saturating_sub(input);
        (
            total(self.out_h(), self.k_h, self.in_h) / 2,
            total(self.out_w(), self.k_w, self.in_w) / 2,
        )
    }

    /// Row length of the unrolled input, `k_h·k_w·c_in/groups`.
    pub fn unrolled_rows(&self) -> usize {
        self.k_h * self.k_w * self.c_in / self.groups
    }

    pub fn dense_weight_count(&self) -> usize {
        self.c_out * self.unrolled_rows()
    }

    pub fn dense_params(&self) -> usize {
        self.dense_weight_count() + if self.bias { self.c_out } else { 0 }
    }

    /// Dense FLOPs counting one multiply and one add per parameter and
    /// output position.
    pub fn dense_flops(&self) -> usize {
        2 * self.dense_params() * self.out_h() * self.out_w()
    }
}

/// Dimensions of the unrolled (im2col) product `W (c_out × a) · X (a × cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnrolledDims {
    pub a: usize,
    pub cols: usize,
    pub c_out: usize,
}

pub fn derive_unrolled_dims(layer: &LayerSpec) -> Result<UnrolledDims> {
    layer.validate()?;
    Ok(UnrolledDims {
        a: layer.unrolled_rows(),
        cols: layer.out_h() * layer.out_w(),
        c_out: layer.c_out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    L2Squared,
    L1,
}

impl Metric {
    #[inline]
    pub fn distance(self, x: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), b.len());
        match self {
            Metric::L2Squared => x
                .iter()
                .zip(b)
                .map(|(x, b)| {
                    let d = x - b;
                    d * d
                })
                .sum(),
            Metric::L1 => x.iter().zip(b).map(|(x, b)| (x - b).abs()).sum(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::L2Squared => "l2_squared",
            Metric::L1 => "l1",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "l2_squared" | "l2" => Ok(Metric::L2Squared),
            "l1" => Ok(Metric::L1),
            other => Err(format!("unknown metric '{other}' (expected l2_squared or l1)")),
        }
    }
}

/// PQ hyper-parameters of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQConfig {
    pub n_p: usize,
    pub l_s: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1.0
}

impl PQConfig {
    pub fn new(n_p: usize, l_s: usize) -> Self {
        Self {
            n_p,
            l_s,
            metric: Metric::L2Squared,
            tau: 1.0,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0 || self.l_s == 0 {
            return arg_err("n_p and l_s must be >= 1");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return arg_err(format!("temperature must be positive, got {}", self.tau));
        }
        Ok(())
    }
}

/// Partition of the `a` unrolled rows into `n_s` subspaces of `l_s` rows.
/// The last `pad` positions of the final subspace are implicit zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceLayout {
    pub a: usize,
    pub l_s: usize,
    pub n_s: usize,
    pub pad: usize,
}

impl SubspaceLayout {
    pub fn padded_rows(&self) -> usize {
        self.n_s * self.l_s
    }

    /// Row range of subspace `n` that lies inside the real (unpadded) rows.
    pub fn real_rows(&self, n: usize) -> std::ops::Range<usize> {
        let start = n * self.l_s;
        start.min(self.a)..(start + self.l_s).min(self.a)
    }
}

pub fn subspace_layout(a: usize, l_s: usize) -> Result<SubspaceLayout> {
    if a == 0 || l_s == 0 {
        return arg_err(format!("subspace layout needs a >= 1 and l_s >= 1 (a={a}, l_s={l_s})"));
    }
    let n_s = a.div_ceil(l_s);
    Ok(SubspaceLayout {
        a,
        l_s,
        n_s,
        pad: n_s * l_s - a,
    })
}
