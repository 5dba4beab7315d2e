//! PQ execution against a brute-force nearest-prototype oracle.

mod common;

use common::*;
use pqa_core::inference::pq_forward;
use pqa_core::{Metric, PQConfig};
use rand::Rng;

/// Nearest prototype by exhaustive search, then dense dot products with the
/// (zero-extended) weight sub-rows.
fn oracle(x: &pqa_core::Matrix, w: &pqa_core::Matrix, bank: &pqa_core::encoder::PrototypeBank, metric: Metric) -> Vec<f64> {
    let (a, cols, c_out) = (x.rows(), x.cols(), w.rows());
    let (n_s, n_p, l_s) = (bank.n_s(), bank.n_p(), bank.l_s());
    let mut out = vec![0.0; c_out * cols];
    for j in 0..cols {
        for n in 0..n_s {
            let sub: Vec<f64> = (0..l_s)
                .map(|e| if n * l_s + e < a { x.get(n * l_s + e, j) } else { 0.0 })
                .collect();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for p in 0..n_p {
                let d: f64 = sub
                    .iter()
                    .zip(bank.prototype(n, p))
                    .map(|(u, v)| match metric {
                        Metric::L2Squared => (u - v) * (u - v),
                        Metric::L1 => (u - v).abs(),
                    })
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
            let proto = bank.prototype(n, best);
            for o in 0..c_out {
                let dot: f64 = (0..l_s)
                    .filter(|e| n * l_s + e < a)
                    .map(|e| w.get(o, n * l_s + e) * proto[e])
                    .sum();
                out[o * cols + j] += dot;
            }
        }
    }
    out
}

#[test]
fn pq_forward_matches_oracle_on_random_layers() {
    let mut r = rng(0x0AC1E);
    let mut checked = 0;
    for case in 0..1200 {
        let a = r.random_range(1..=16);
        let l_s = r.random_range(1..=a);
        let n_p = r.random_range(1..=8);
        let c_out = r.random_range(1..=8);
        let (h, w) = (r.random_range(1..=4), r.random_range(1..=4));
        let metric = if case % 2 == 0 { Metric::L2Squared } else { Metric::L1 };
        let config = PQConfig::new(n_p, l_s).with_metric(metric);
        let (rt, weights) = random_runtime(&mut r, pointwise(a, c_out, h, w), config);
        let x = random_matrix(&mut r, a, h * w, -2.0, 2.0);
        let got = pq_forward(&x, &rt).unwrap();
        let want = oracle(&x, &weights, rt.bank(), metric);
        for (g, e) in got.as_slice().iter().zip(&want) {
            assert!((g - e).abs() <= 1e-6 * e.abs().max(1.0), "case {case}: {g} vs {e}");
        }
        checked += 1;
    }
    assert!(checked >= 1000);
}
