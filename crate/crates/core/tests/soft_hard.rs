//! Low-temperature soft encoding collapses onto the hard assignment.

mod common;

use common::*;
use pqa_core::encoder::{encode_hard_with_distances, soft_weights};
use pqa_core::{subspace_layout, Metric, PQConfig};

#[test]
fn soft_argmax_equals_hard_index_at_low_temperature() {
    let mut r = rng(7);
    let (a, l_s, n_p) = (12, 4, 8);
    let layout = subspace_layout(a, l_s).unwrap();
    let (rt, _) = random_runtime(&mut r, pointwise(a, 4, 64, 64), PQConfig::new(n_p, l_s));
    let x = random_matrix(&mut r, a, 64 * 64, -1.0, 1.0);
    let enc = encode_hard_with_distances(&x, rt.bank(), &layout, Metric::L2Squared).unwrap();
    let (mut agree, mut total) = (0usize, 0usize);
    for n in 0..layout.n_s {
        for j in 0..x.cols() {
            let d = enc.distances_at(n, j).unwrap();
            let mut sorted = d.to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted[1] - sorted[0] < 1e-9 {
                continue;
            }
            let w = soft_weights(d, 1e-6).unwrap();
            let argmax = (0..n_p).fold(0, |b, p| if w[p] > w[b] { p } else { b });
            total += 1;
            agree += usize::from(argmax == enc.index(n, j));
        }
    }
    assert!(total >= 10_000);
    assert_eq!(agree, total);
}
