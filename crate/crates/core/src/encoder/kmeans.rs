//! Per-subspace Lloyd k-means for prototype fitting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{arg_err, shape_err, Result};
use crate::shape::{Metric, PQConfig, SubspaceLayout};
use crate::tensor::Matrix;

use super::encode::argmin;
use super::PrototypeBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMethod {
    #[default]
    KMeansPlusPlus,
    RandomSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub max_iters: usize,
    pub seed: u64,
    pub init: InitMethod,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 25,
            seed: 0,
            init: InitMethod::KMeansPlusPlus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Ok,
    /// Fewer sample columns than prototypes; surplus centroids are jittered
    /// copies of samples.
    TooFewSamples { samples: usize, n_p: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFit {
    pub bank: PrototypeBank,
    /// Per subspace, the encoding MSE after initialisation and after every
    /// Lloyd iteration. Never increases.
    pub mse_history: Vec<Vec<f64>>,
    pub status: FitStatus,
}

impl PrototypeFit {
    /// Final encoding MSE over all `a·M` real sample elements.
    pub fn mse_enc(&self, layout: &SubspaceLayout) -> f64 {
        let per_elem: f64 = self
            .mse_history
            .iter()
            .map(|h| h.last().copied().unwrap_or(0.0))
            .sum::<f64>()
            * layout.l_s as f64;
        per_elem / layout.a as f64
    }

    pub fn iterations(&self) -> usize {
        self.mse_history.iter().map(|h| h.len().saturating_sub(1)).max().unwrap_or(0)
    }
}

/// Fits `n_p` prototypes per subspace with k-means on the sample columns.
pub fn fit_prototypes(
    samples: &Matrix,
    config: &PQConfig,
    layout: &SubspaceLayout,
    opts: &FitOptions,
) -> Result<PrototypeFit> {
    config.validate()?;
    if config.l_s != layout.l_s {
        return shape_err(format!("config l_s {} != layout l_s {}", config.l_s, layout.l_s));
    }
    if samples.cols() == 0 {
        return arg_err("prototype fitting needs at least one sample column");
    }
    if samples.rows() != layout.a && samples.rows() != layout.padded_rows() {
        return shape_err(format!(
            "sample matrix has {} rows, expected {}",
            samples.rows(),
            layout.a
        ));
    }
    let m = samples.cols();
    let (l_s, n_p) = (layout.l_s, config.n_p);

    let per_subspace: Vec<(Vec<f64>, Vec<f64>)> = (0..layout.n_s)
        .into_par_iter()
        .map(|n| {
            let mut points = vec![0.0; m * l_s];
            for j in 0..m {
                super::gather_subvector(samples, l_s, n, j, &mut points[j * l_s..(j + 1) * l_s]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(n as u64);
            lloyd(&points, m, l_s, n_p, opts, &mut rng)
        })
        .collect();

    let mut values = Vec::with_capacity(layout.n_s * n_p * l_s);
    let mut mse_history = Vec::with_capacity(layout.n_s);
    for (centroids, hist) in per_subspace {
        values.extend(centroids);
        mse_history.push(hist);
    }
    let status = if m < n_p {
        FitStatus::TooFewSamples { samples: m, n_p }
    } else {
        FitStatus::Ok
    };
    Ok(PrototypeFit {
        bank: PrototypeBank::new(layout.n_s, n_p, l_s, values)?,
        mse_history,
        status,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    Metric::L2Squared.distance(a, b)
}

fn init_centroids(points: &[f64], m: usize, l_s: usize, n_p: usize, init: InitMethod, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let point = |i: usize| &points[i * l_s..(i + 1) * l_s];
    let mut centroids = Vec::with_capacity(n_p * l_s);
    let seeded = n_p.min(m);
    match init {
        InitMethod::KMeansPlusPlus => {
            let first = rng.random_range(0..m);
            centroids.extend_from_slice(point(first));
            let mut nearest: Vec<f64> = (0..m).map(|i| sq_dist(point(i), point(first))).collect();
            for _ in 1..seeded {
                let total: f64 = nearest.iter().sum();
                let pick = if total > 0.0 {
                    let target = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut chosen = m - 1;
                    for (i, d) in nearest.iter().enumerate() {
                        acc += d;
                        if acc > target && *d > 0.0 {
                            chosen = i;
                            break;
                        }
                    }
                    chosen
                } else {
                    rng.random_range(0..m)
                };
                centroids.extend_from_slice(point(pick));
                let c = &centroids[centroids.len() - l_s..].to_vec();
                for (i, d) in nearest.iter_mut().enumerate() {
                    *d = d.min(sq_dist(point(i), c));
                }
            }
        }
        InitMethod::RandomSample => {
            let mut order: Vec<usize> = (0..m).collect();
            for k in 0..seeded {
                let swap = rng.random_range(k..m);
                order.swap(k, swap);
                centroids.extend_from_slice(point(order[k]));
            }
        }
    }
    for _ in seeded..n_p {
        let src = rng.random_range(0..m);
        let p = point(src);
        let span = 1.0 + p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for v in p {
            centroids.push(v + 1e-6 * span * rng.random_range(-1.0..1.0));
        }
    }
    centroids
}

/// Assigns each point to its nearest centroid, returning whether any
/// assignment changed. `terms[i]` receives the squared distance.
fn assign(points: &[f64], centroids: &[f64], l_s: usize, labels: &mut [usize], terms: &mut [f64]) -> bool {
    let k = centroids.len() / l_s;
    let mut changed = false;
    let mut d = vec![0.0; k];
    for (i, x) in points.chunks_exact(l_s).enumerate() {
        for (c, slot) in d.iter_mut().enumerate() {
            *slot = sq_dist(x, &centroids[c * l_s..(c + 1) * l_s]);
        }
        let best = argmin(&d);
        if best != labels[i] {
            changed = true;
            labels[i] = best;
        }
        terms[i] = d[best];
    }
    changed
}

fn point_terms(points: &[f64], centroids: &[f64], l_s: usize, labels: &[usize], terms: &mut [f64]) {
    for (i, x) in points.chunks_exact(l_s).enumerate() {
        let c = labels[i];
        terms[i] = sq_dist(x, &centroids[c * l_s..(c + 1) * l_s]);
    }
}

/// Runs Lloyd iterations; returns centroids and the per-iteration MSE.
fn lloyd(points: &[f64], m: usize, l_s: usize, n_p: usize, opts: &FitOptions, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut centroids = init_centroids(points, m, l_s, n_p, opts.init, rng);
    let mut labels = vec![usize::MAX; m];
    let mut terms = vec![0.0; m];
    let norm = (m * l_s) as f64;

    assign(points, &centroids, l_s, &mut labels, &mut terms);
    let mut sse: f64 = terms.iter().sum();
    let mut history = vec![sse / norm];

    let mut trial_terms = vec![0.0; m];
    for _ in 0..opts.max_iters {
        // update step
        let mut sums = vec![0.0; n_p * l_s];
        let mut counts = vec![0usize; n_p];
        for (i, x) in points.chunks_exact(l_s).enumerate() {
            let c = labels[i];
            counts[c] += 1;
            for (s, v) in sums[c * l_s..(c + 1) * l_s].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut updated = centroids.clone();
        for c in 0..n_p {
            if counts[c] > 0 {
                for e in 0..l_s {
                    updated[c * l_s + e] = sums[c * l_s + e] / counts[c] as f64;
                }
            }
        }
        point_terms(points, &updated, l_s, &labels, &mut trial_terms);
        let mut trial_sse: f64 = trial_terms.iter().sum();
        if trial_sse > sse {
            // Rounding can make a recomputed mean marginally worse than the
            // centroid it replaces; keep the old centroid for such clusters.
            let mut old_c = vec![0.0; n_p];
            let mut new_c = vec![0.0; n_p];
            for i in 0..m {
                old_c[labels[i]] += terms[i];
                new_c[labels[i]] += trial_terms[i];
            }
            for c in 0..n_p {
                if new_c[c] > old_c[c] {
                    updated[c * l_s..(c + 1) * l_s].copy_from_slice(&centroids[c * l_s..(c + 1) * l_s]);
                }
            }
            point_terms(points, &updated, l_s, &labels, &mut trial_terms);
            trial_sse = trial_terms.iter().sum();
            if trial_sse > sse {
                updated.copy_from_slice(&centroids);
                trial_terms.copy_from_slice(&terms);
            }
        }
        centroids = updated;
        terms.copy_from_slice(&trial_terms);

        // assignment step; each point's term can only shrink
        let changed = assign(points, &centroids, l_s, &mut labels, &mut terms);
        sse = terms.iter().sum();
        history.push(sse / norm);
        if !changed {
            break;
        }
    }
    (centroids, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::subspace_layout;

    fn opts(seed: u64) -> FitOptions {
        FitOptions { max_iters: 50, seed, init: InitMethod::KMeansPlusPlus }
    }

    #[test]
    fn identical_samples_collapse() {
        let layout = subspace_layout(4, 2).unwrap();
        let v = [0.5, -1.0, 2.0, 3.0];
        let x = Matrix::from_fn(4, 10, |r, _| v[r]);
        let fit = fit_prototypes(&x, &PQConfig::new(3, 2), &layout, &opts(1)).unwrap();
        for n in 0..2 {
            for p in 0..3 {
                assert_eq!(fit.bank.prototype(n, p), &v[n * 2..n * 2 + 2]);
            }
        }
        assert_eq!(fit.mse_enc(&layout), 0.0);
        assert_eq!(fit.status, FitStatus::Ok);
    }

    #[test]
    fn two_point_clusters_recovered() {
        let layout = subspace_layout(2, 2).unwrap();
        let a = [1.0, 1.0];
        let b = [-3.0, 4.0];
        let x = Matrix::from_fn(2, 12, |r, c| if c % 3 == 0 { a[r] } else { b[r] });
        for seed in 0..10 {
            let fit = fit_prototypes(&x, &PQConfig::new(2, 2), &layout, &opts(seed)).unwrap();
            let mut protos = vec![fit.bank.prototype(0, 0).to_vec(), fit.bank.prototype(0, 1).to_vec()];
            protos.sort_by(|x, y| x[0].partial_cmp(&y[0]).unwrap());
            assert_eq!(protos, vec![b.to_vec(), a.to_vec()]);
            assert_eq!(fit.mse_enc(&layout), 0.0);
        }
    }

    #[test]
    fn single_prototype_is_mean() {
        let layout = subspace_layout(3, 3).unwrap();
        let x = Matrix::from_fn(3, 7, |r, c| (r * 7 + c * c) as f64 * 0.37 - 2.0);
        let fit = fit_prototypes(&x, &PQConfig::new(1, 3), &layout, &opts(5)).unwrap();
        for r in 0..3 {
            let mean = (0..7).map(|c| x.get(r, c)).sum::<f64>() / 7.0;
            assert!((fit.bank.prototype(0, 0)[r] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples_warns() {
        let layout = subspace_layout(2, 2).unwrap();
        let x = Matrix::from_fn(2, 2, |r, c| (r + 3 * c) as f64);
        let fit = fit_prototypes(&x, &PQConfig::new(4, 2), &layout, &opts(0)).unwrap();
        assert_eq!(fit.status, FitStatus::TooFewSamples { samples: 2, n_p: 4 });
        assert_eq!(fit.bank.n_p(), 4);
        assert!(fit.bank.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_samples_rejected() {
        let layout = subspace_layout(2, 2).unwrap();
        let x = Matrix::zeros(2, 0);
        assert!(matches!(
            fit_prototypes(&x, &PQConfig::new(2, 2), &layout, &opts(0)),
            Err(crate::PqaError::Argument(_))
        ));
    }

    #[test]
    fn deterministic_and_monotone() {
        let layout = subspace_layout(10, 4).unwrap();
        let x = Matrix::from_fn(10, 60, |r, c| ((r * 31 + c * 17) % 23) as f64 / 7.0 - 1.5);
        let a = fit_prototypes(&x, &PQConfig::new(5, 4), &layout, &opts(9)).unwrap();
        let b = fit_prototypes(&x, &PQConfig::new(5, 4), &layout, &opts(9)).unwrap();
        assert_eq!(a, b);
        for h in &a.mse_history {
            assert!(h.windows(2).all(|w| w[1] <= w[0]));
        }
        // padded tail stays zero
        for p in 0..5 {
            assert_eq!(&a.bank.prototype(2, p)[2..], &[0.0, 0.0]);
        }
        let r = FitOptions { init: InitMethod::RandomSample, ..opts(9) };
        let c = fit_prototypes(&x, &PQConfig::new(5, 4), &layout, &r).unwrap();
        for h in &c.mse_history {
            assert!(h.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
