//! PQ and dense layer execution, network chaining and error metrics.

use serde::{Deserialize, Serialize};

use crate::encoder::{
    apply_corrector, encode_hard, encode_hard_with_distances, unroll_im2col, unroll_im2col_grouped,
    Corrector, EncodingResult, LutPQ, PrototypeBank,
};
use crate::error::{shape_err, PqaError, Result};
use crate::shape::{derive_unrolled_dims, LayerKind, LayerSpec, PQConfig, SubspaceLayout};
use crate::tensor::{Matrix, Tensor3};

/// Everything needed to execute one PQ layer: the prototypes and the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PQLayerRuntime {
    layer: LayerSpec,
    config: PQConfig,
    layout: SubspaceLayout,
    bank: PrototypeBank,
    lut: LutPQ,
    corrector: Option<Corrector>,
}

impl PQLayerRuntime {
    pub fn new(layer: LayerSpec, config: PQConfig, bank: PrototypeBank, lut: LutPQ) -> Result<Self> {
        config.validate()?;
        let dims = derive_unrolled_dims(&layer)?;
        if layer.groups != 1 {
            return shape_err(format!("PQ layer '{}' must be ungrouped", layer.name));
        }
        let layout = crate::shape::subspace_layout(dims.a, config.l_s)?;
        bank.check_against(&config, &layout)?;
        if lut.n_s() != layout.n_s || lut.n_p() != config.n_p || lut.c_out() != layer.c_out {
            return shape_err(format!(
                "layer '{}': table {}x{}x{} inconsistent with c_out={}, n_s={}, n_p={}",
                layer.name,
                lut.c_out(),
                lut.n_s(),
                lut.n_p(),
                layer.c_out,
                layout.n_s,
                config.n_p
            ));
        }
        Ok(Self {
            layer,
            config,
            layout,
            bank,
            lut,
            corrector: None,
        })
    }

    pub fn with_corrector(mut self, corrector: Corrector) -> Result<Self> {
        if corrector.n_in() != self.layout.n_s * self.config.n_p || corrector.n_out() != self.layer.c_out {
            return shape_err(format!(
                "corrector {}->{} does not fit layer '{}'",
                corrector.n_in(),
                corrector.n_out(),
                self.layer.name
            ));
        }
        self.corrector = Some(corrector);
        Ok(self)
    }

    pub fn layer(&self) -> &LayerSpec {
        &self.layer
    }

    pub fn config(&self) -> &PQConfig {
        &self.config
    }

    pub fn layout(&self) -> &SubspaceLayout {
        &self.layout
    }

    pub fn bank(&self) -> &PrototypeBank {
        &self.bank
    }

    pub fn lut(&self) -> &LutPQ {
        &self.lut
    }

    pub fn corrector(&self) -> Option<&Corrector> {
        self.corrector.as_ref()
    }

    pub fn encode(&self, x: &Matrix) -> Result<EncodingResult> {
        if self.corrector.is_some() {
            encode_hard_with_distances(x, &self.bank, &self.layout, self.config.metric)
        } else {
            encode_hard(x, &self.bank, &self.layout, self.config.metric)
        }
    }
}

/// Sums table entries selected by `enc` for every output channel and column.
/// Subspaces are accumulated in ascending order starting from zero.
pub fn accumulate_lookups(lut: &LutPQ, enc: &EncodingResult) -> Matrix {
    let (c_out, n_s, cols) = (lut.c_out(), lut.n_s(), enc.cols);
    let mut out = Matrix::zeros(c_out, cols);
    for o in 0..c_out {
        for j in 0..cols {
            let mut acc = 0.0;
            for n in 0..n_s {
                acc += lut.get(o, n, enc.index(n, j));
            }
            out.set(o, j, acc);
        }
    }
    out
}

/// PQ layer execution: nearest-prototype lookup and accumulation, plus the
/// corrector output when one is attached.
pub fn pq_forward(x: &Matrix, rt: &PQLayerRuntime) -> Result<Matrix> {
    let enc = rt.encode(x)?;
    let mut out = accumulate_lookups(&rt.lut, &enc);
    if let Some(corr) = &rt.corrector {
        for j in 0..enc.cols {
            let d = enc.column_distances(j).expect("distances kept for corrector");
            let delta = apply_corrector(corr, &d)?;
            for (o, v) in delta.iter().enumerate() {
                out.set(o, j, out.get(o, j) + v);
            }
        }
    }
    Ok(out)
}

/// Exact dense product `W · X`.
pub fn reference_forward(x: &Matrix, w: &Matrix) -> Result<Matrix> {
    if w.cols() != x.rows() {
        return shape_err(format!(
            "cannot multiply {}x{} weights with {}x{} input",
            w.rows(),
            w.cols(),
            x.rows(),
            x.cols()
        ));
    }
    let (m, k, n) = (w.rows(), w.cols(), x.cols());
    let mut out = Matrix::zeros(m, n);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for i in 0..m {
        let wr = w.row(i);
        let orow = &mut os[i * n..(i + 1) * n];
        for (p, wv) in wr.iter().enumerate().take(k) {
            let xr = &xs[p * n..(p + 1) * n];
            for (o, xv) in orow.iter_mut().zip(xr) {
                *o += wv * xv;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mse_enc: f64,
    pub mse_out: f64,
    pub max_abs_err: f64,
}

fn mse(a: &Matrix, b: &Matrix) -> Result<f64> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return shape_err(format!(
            "shape mismatch {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let n = a.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(s / n as f64)
}

/// Output divergence of a PQ layer, and encoding error when the encoded
/// and original inputs are supplied as `(x_enc, x)`.
pub fn error_report(y_pq: &Matrix, y_ref: &Matrix, inputs: Option<(&Matrix, &Matrix)>) -> Result<ErrorReport> {
    let mse_out = mse(y_pq, y_ref)?;
    let max_abs_err = y_pq
        .as_slice()
        .iter()
        .zip(y_ref.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mse_enc = match inputs {
        Some((x_enc, x)) => mse(x_enc, x)?,
        None => 0.0,
    };
    Ok(ErrorReport {
        mse_enc,
        mse_out,
        max_abs_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    #[default]
    None,
}

/// How a layer is executed in [`network_forward`].
#[derive(Debug, Clone, PartialEq)]
pub enum LayerExec {
    /// Dense unrolled weights, `c_out × A` (rows of all groups stacked).
    Dense(Matrix),
    Pq(Box<PQLayerRuntime>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayer {
    pub spec: LayerSpec,
    pub exec: LayerExec,
    pub activation: Activation,
}

/// Reshapes an activation into the input a layer expects.
///
/// Linear layers accept either a tensor with exactly `c_in` elements
/// (flattened) or one with `c_in` channels, which is global-average-pooled.
pub fn prepare_input(t: &Tensor3, layer: &LayerSpec) -> Result<Tensor3> {
    let shape = (t.channels(), t.height(), t.width());
    if layer.kind == LayerKind::Linear && shape != (layer.c_in, 1, 1) {
        if t.as_slice().len() == layer.c_in {
            return Tensor3::new(layer.c_in, 1, 1, t.as_slice().to_vec());
        }
        if t.channels() == layer.c_in {
            let hw = (t.height() * t.width()) as f64;
            let pooled = t
                .as_slice()
                .chunks_exact(t.height() * t.width())
                .map(|c| c.iter().sum::<f64>() / hw)
                .collect();
            return Tensor3::new(layer.c_in, 1, 1, pooled);
        }
    }
    if shape != (layer.c_in, layer.in_h, layer.in_w) {
        return shape_err(format!(
            "layer '{}' expects input {}x{}x{}, got {}x{}x{}",
            layer.name, layer.c_in, layer.in_h, layer.in_w, shape.0, shape.1, shape.2
        ));
    }
    Ok(t.clone())
}

/// Dense execution of one (possibly grouped) layer.
pub fn dense_layer_forward(input: &Tensor3, layer: &LayerSpec, weights: &Matrix) -> Result<Matrix> {
    if weights.rows() != layer.c_out || weights.cols() != layer.unrolled_rows() {
        return shape_err(format!(
            "layer '{}': weights are {}x{}, expected {}x{}",
            layer.name,
            weights.rows(),
            weights.cols(),
            layer.c_out,
            layer.unrolled_rows()
        ));
    }
    let parts = unroll_im2col_grouped(input, layer)?;
    if parts.len() == 1 {
        return reference_forward(&parts[0], weights);
    }
    let per_group = layer.c_out / layer.groups;
    let cols = parts[0].cols();
    let mut out = Matrix::zeros(layer.c_out, cols);
    for (g, x) in parts.iter().enumerate() {
        let rows: Vec<f64> = (g * per_group..(g + 1) * per_group)
            .flat_map(|o| weights.row(o).to_vec())
            .collect();
        let wg = Matrix::new(per_group, weights.cols(), rows)?;
        let y = reference_forward(x, &wg)?;
        for o in 0..per_group {
            for j in 0..cols {
                out.set(g * per_group + o, j, y.get(o, j));
            }
        }
    }
    Ok(out)
}

/// Runs one layer and rolls its output back into a spatial tensor.
pub fn layer_forward(input: &Tensor3, layer: &NetworkLayer) -> Result<Tensor3> {
    let spec = &layer.spec;
    let x = prepare_input(input, spec)?;
    let mut y = match &layer.exec {
        LayerExec::Dense(w) => dense_layer_forward(&x, spec, w)?,
        LayerExec::Pq(rt) => {
            if rt.layer().c_in != spec.c_in || rt.layer().c_out != spec.c_out || rt.layer().unrolled_rows() != spec.unrolled_rows() {
                return shape_err(format!("PQ runtime does not match layer '{}'", spec.name));
            }
            let xu = unroll_im2col(&x, spec)?;
            pq_forward(&xu, rt)?
        }
    };
    if layer.activation == Activation::Relu {
        y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Tensor3::from_matrix(&y, spec.out_h(), spec.out_w())
}

/// Executes all layers and returns each layer's input followed by the final
/// output.
pub fn forward_trace(input: &Tensor3, layers: &[NetworkLayer]) -> Result<Vec<Tensor3>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.clone());
    for layer in layers {
        let next = layer_forward(acts.last().expect("non-empty"), layer).map_err(|e| match e {
            PqaError::Shape(msg) if !msg.contains(&layer.spec.name) => {
                PqaError::Shape(format!("layer '{}': {msg}", layer.spec.name))
            }
            other => other,
        })?;
        acts.push(next);
    }
    Ok(acts)
}

/// Executes the layer chain on one input and returns the flattened output.
pub fn network_forward(input: &Tensor3, layers: &[NetworkLayer]) -> Result<Vec<f64>> {
    let mut acts = forward_trace(input, layers)?;
    Ok(acts.pop().expect("non-empty").into_vec())
}
