//! Quantized PQ execution against the float layer.

mod common;

use common::*;
use pqa_core::inference::pq_forward;
use pqa_core::quantizer::{
    code_distance_to_real, distance_perturbation_bound, quantize_model, quantize_runtime, quantized_pq_forward,
    Calibration, Granularity, QuantScheme,
};
use pqa_core::{Matrix, Metric, PQConfig};

fn scheme(granularity: Granularity, bits: u32) -> QuantScheme {
    QuantScheme { granularity, calibration: Calibration::FullRange, proto_bits: bits, lut_bits: bits }
}

#[test]
fn sixteen_bit_agrees_where_the_margin_allows() {
    let mut r = rng(3);
    let (a, l_s, n_p) = (16, 4, 8);
    let (rt, _) = random_runtime(&mut r, pointwise(a, 6, 16, 16), PQConfig::new(n_p, l_s));
    let x = random_matrix(&mut r, a, 256, -1.0, 1.0);
    let q = quantize_runtime(&rt, &scheme(Granularity::PerSubspace, 16), &x).unwrap();
    let qo = quantized_pq_forward(&x, &q).unwrap();
    let enc = rt.encode(&x).unwrap();
    let y = pq_forward(&x, &rt).unwrap();

    let mut guaranteed = 0;
    let mut all_same = true;
    for n in 0..rt.layout().n_s {
        let s = q.proto_params[n].scale;
        for j in 0..x.cols() {
            let sub: Vec<f64> = (0..l_s).map(|e| x.get(n * l_s + e, j)).collect();
            let best = enc.index(n, j);
            let d = |p: usize| Metric::L2Squared.distance(&sub, rt.bank().prototype(n, p));
            let bound = |p: usize| distance_perturbation_bound(&sub, rt.bank().prototype(n, p), s, Metric::L2Squared);
            let safe = (0..n_p).filter(|p| *p != best).all(|p| d(p) - d(best) > bound(p) + bound(best));
            let same = qo.indices[n * x.cols() + j] as usize == best;
            if safe {
                guaranteed += 1;
                assert!(same, "subspace {n} column {j} flipped despite margin");
            }
            all_same &= same;
        }
    }
    assert!(guaranteed > 0);
    assert_eq!(qo.saturations, 0);
    if all_same {
        let bound = q.output_error_bound();
        for (a, b) in qo.output.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() <= bound * (1.0 + 1e-9));
        }
    }
}

#[test]
fn rescaled_code_distance_is_close() {
    assert_eq!(code_distance_to_real(4, 0.5, Metric::L2Squared), 1.0);
    assert_eq!(code_distance_to_real(4, 0.5, Metric::L1), 2.0);
}

#[test]
fn finer_granularity_never_widens_the_bound() {
    // subspace ranges differ by 100x within a layer, and the second layer is
    // wider than the first
    let mut r = rng(21);
    let (a, l_s, n_p) = (8, 4, 4);
    let (mut rt1, _) = random_runtime(&mut r, pointwise(a, 3, 4, 4), PQConfig::new(n_p, l_s));
    let (rt2, _) = random_runtime(&mut r, pointwise(a, 3, 4, 4), PQConfig::new(n_p, l_s));
    let mut x1 = random_matrix(&mut r, a, 16, -1.0, 1.0);
    for j in 0..16 {
        for e in l_s..a {
            x1.set(e, j, x1.get(e, j) * 100.0);
        }
    }
    let x2 = Matrix::from_fn(a, 16, |i, j| x1.get(i, j) * 3.0);
    // stretch the first layer's second-subspace prototypes to match
    let bank = rt1.bank().clone();
    let mut vals = bank.values().to_vec();
    for v in vals[n_p * l_s..].iter_mut() {
        *v *= 100.0;
    }
    let bank = pqa_core::encoder::PrototypeBank::new(2, n_p, l_s, vals).unwrap();
    rt1 = pqa_core::inference::PQLayerRuntime::new(rt1.layer().clone(), *rt1.config(), bank, rt1.lut().clone()).unwrap();

    for bits in [4, 8, 12] {
        let worst = |g| {
            let qs = quantize_model(&[&rt1, &rt2], &[&x1, &x2], &scheme(g, bits)).unwrap();
            let proto = qs[0].proto_params.iter().map(|p| p.scale / 2.0).fold(0.0, f64::max);
            let sub0 = qs[0].proto_params[0].scale / 2.0;
            (proto, sub0, qs[0].output_error_bound())
        };
        let (ps, ss, os) = worst(Granularity::PerSubspace);
        let (pl, sl, ol) = worst(Granularity::PerLayer);
        let (pg, sg, og) = worst(Granularity::Global);
        assert!(ps <= pl && pl <= pg, "{ps} {pl} {pg}");
        assert!(os <= ol && ol <= og, "{os} {ol} {og}");
        // the narrow subspace gains the full 100x
        assert!(ss * 50.0 < sl && sl <= sg);
    }
}

#[test]
fn divergence_bound_covers_flips() {
    use pqa_core::quantizer::divergence_bound;
    let mut r = rng(17);
    for bits in [4, 8, 16] {
        let (rt, _) = random_runtime(&mut r, pointwise(12, 5, 8, 8), PQConfig::new(8, 3));
        let x = random_matrix(&mut r, 12, 64, -1.0, 1.0);
        let q = quantize_runtime(&rt, &scheme(Granularity::PerSubspace, bits), &x).unwrap();
        let qo = quantized_pq_forward(&x, &q).unwrap();
        assert_eq!(qo.saturations, 0);
        let y = pq_forward(&x, &rt).unwrap();
        let bound = divergence_bound(&x, &rt, &q).unwrap();
        let diff = qo.output.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= bound * (1.0 + 1e-9), "{bits} bits: {diff} > {bound}");
    }
}
