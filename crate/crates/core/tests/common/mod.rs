#![allow(dead_code)]

use pqa_core::encoder::{build_lut, PrototypeBank};
use pqa_core::inference::PQLayerRuntime;
use pqa_core::{subspace_layout, LayerSpec, Matrix, PQConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// A pointwise layer whose unrolled input is `a × (h·w)`.
pub fn pointwise(a: usize, c_out: usize, h: usize, w: usize) -> LayerSpec {
    LayerSpec::pointwise("pw", a, c_out, h, w).with_pq(true)
}

/// Random bank and weights for a pointwise layer.
pub fn random_runtime(rng: &mut impl Rng, layer: LayerSpec, config: PQConfig) -> (PQLayerRuntime, Matrix) {
    let layout = subspace_layout(layer.c_in, config.l_s).unwrap();
    let values = (0..layout.n_s * config.n_p * config.l_s)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let bank = PrototypeBank::new(layout.n_s, config.n_p, config.l_s, values).unwrap();
    let w = random_matrix(rng, layer.c_out, layer.c_in, -1.0, 1.0);
    let lut = build_lut(&w, &bank, &layout).unwrap();
    (PQLayerRuntime::new(layer, config, bank, lut).unwrap(), w)
}
