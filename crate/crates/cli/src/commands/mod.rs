//! Command implementations. Each returns a summary value so tests can
//! inspect results without parsing output files.

pub mod eval;
pub mod fit;
pub mod quantize;
pub mod simulate;
pub mod sweep;

use std::path::{Path, PathBuf};

use pqa_core::encoder::{LutPQ, PrototypeBank};
use pqa_core::inference::{LayerExec, NetworkLayer, PQLayerRuntime};
use pqa_core::{LayerSpec, Matrix, Tensor3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::modelspec::ModelSpec;
use crate::tensorfile::TensorFile;

/// Loads the model and applies any uniform PQ overrides from the settings.
pub fn load_model(s: &Settings) -> CliResult<ModelSpec> {
    Ok(ModelSpec::load(s.require_model()?)?.with_uniform_pq(s.l_s, s.n_p, s.metric))
}

pub fn weights_path(dir: &Path, layer: &str) -> PathBuf {
    dir.join(format!("{layer}.weights.pqt"))
}

pub fn bank_path(dir: &Path, layer: &str) -> PathBuf {
    dir.join(format!("{layer}.bank.pqt"))
}

pub fn lut_path(dir: &Path, layer: &str) -> PathBuf {
    dir.join(format!("{layer}.lut.pqt"))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Seeded He-normal weights, `c_out × A`.
pub fn he_weights(spec: &LayerSpec, seed: u64, index: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + index as u64);
    let fan_in = spec.unrolled_rows();
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Matrix::from_fn(spec.c_out, fan_in, |_, _| normal.sample(&mut rng))
}

/// Inputs from the sample file, or seeded standard-normal tensors.
pub fn load_inputs(s: &Settings, model: &ModelSpec) -> CliResult<Vec<Tensor3>> {
    let (c, h, w) = model.input_shape();
    if let Some(path) = &s.samples {
        let t = TensorFile::load(path)?;
        let dims: Vec<usize> = t.dims.iter().map(|d| *d as usize).collect();
        let (n, shape) = match dims.as_slice() {
            [n, c, h, w] => (*n, (*c, *h, *w)),
            [c, h, w] => (1, (*c, *h, *w)),
            _ => {
                return Err(CliError::Data(format!(
                    "{}: samples must be [N, C, H, W] or [C, H, W], got {dims:?}",
                    path.display()
                )))
            }
        };
        if shape != (c, h, w) {
            return Err(CliError::Data(format!(
                "{}: samples are {}x{}x{} but layer '{}' expects {c}x{h}x{w}",
                path.display(),
                shape.0,
                shape.1,
                shape.2,
                model.layers[0].spec.name
            )));
        }
        let values = t.to_f64();
        let per = c * h * w;
        return (0..n)
            .map(|i| Ok(Tensor3::new(c, h, w, values[i * per..(i + 1) * per].to_vec())?))
            .collect();
    }
    if s.num_samples == 0 {
        return Err(CliError::Usage("num_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    Ok((0..s.num_samples)
        .map(|_| {
            let v = (0..c * h * w).map(|_| StandardNormal.sample(&mut rng)).collect();
            Tensor3::new(c, h, w, v).expect("finite normal samples")
        })
        .collect())
}

fn load_matrix(path: &Path, rows: usize, cols: usize) -> CliResult<Matrix> {
    let m = TensorFile::load(path)?.to_matrix()?;
    if (m.rows(), m.cols()) != (rows, cols) {
        return Err(CliError::Data(format!(
            "{}: expected {rows}x{cols}, found {}x{}",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

pub fn load_weights(dir: &Path, spec: &LayerSpec) -> CliResult<Matrix> {
    load_matrix(&weights_path(dir, &spec.name), spec.c_out, spec.unrolled_rows())
}

fn dims3(t: &TensorFile, path: &Path) -> CliResult<(usize, usize, usize)> {
    match t.dims.as_slice() {
        [a, b, c] => Ok((*a as usize, *b as usize, *c as usize)),
        d => Err(CliError::Data(format!("{}: expected a rank-3 tensor, got {d:?}", path.display()))),
    }
}

/// PQ runtime of one layer from its saved bank and table.
pub fn load_runtime(dir: &Path, layer: &crate::modelspec::ModelLayer) -> CliResult<PQLayerRuntime> {
    let spec = &layer.spec;
    let cfg = layer
        .pq
        .ok_or_else(|| CliError::Usage(format!("layer '{}' has no PQ configuration", spec.name)))?;
    let bp = bank_path(dir, &spec.name);
    let bt = TensorFile::load(&bp)?;
    let (n_s, n_p, l_s) = dims3(&bt, &bp)?;
    let bank = PrototypeBank::new(n_s, n_p, l_s, bt.to_f64())?;
    let lp = lut_path(dir, &spec.name);
    let lt = TensorFile::load(&lp)?;
    let (c_out, ln_s, ln_p) = dims3(&lt, &lp)?;
    let lut = LutPQ::new(c_out, ln_s, ln_p, lt.to_f64())?;
    PQLayerRuntime::new(spec.clone(), cfg, bank, lut).map_err(|e| {
        CliError::Data(format!(
            "artifacts for layer '{}' do not match the model: {e}",
            spec.name
        ))
    })
}

/// Executable network; PQ-enabled layers use their saved tables when
/// `use_pq` is set, otherwise every layer runs densely.
pub fn load_network(dir: &Path, model: &ModelSpec, use_pq: bool) -> CliResult<Vec<NetworkLayer>> {
    model
        .layers
        .iter()
        .map(|l| {
            let exec = if use_pq && l.spec.pq_enabled {
                LayerExec::Pq(Box::new(load_runtime(dir, l)?))
            } else {
                LayerExec::Dense(load_weights(dir, &l.spec)?)
            };
            Ok(NetworkLayer {
                spec: l.spec.clone(),
                exec,
                activation: l.activation,
            })
        })
        .collect()
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn finish_csv(mut w: csv::Writer<std::fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}
