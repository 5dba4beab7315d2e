//! Fits prototypes and builds tables for every PQ layer of a model.
//!
//! The model runs densely with seeded He-initialised weights; each PQ
//! layer is fitted on the unrolled inputs it receives from that dense
//! network.

use std::path::PathBuf;

use pqa_core::encoder::{build_lut, encode_hard, fit_prototypes, refit_lut, unroll_im2col, FitOptions, FitStatus};
use pqa_core::inference::{accumulate_lookups, error_report, layer_forward, prepare_input, reference_forward, LayerExec, NetworkLayer};
use pqa_core::{subspace_layout, Matrix, Tensor3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::*;
use crate::config::Settings;
use crate::error::CliResult;
use crate::tensorfile::TensorFile;

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub layer: String,
    pub a: usize,
    pub n_s: usize,
    pub n_p: usize,
    pub l_s: usize,
    pub columns: usize,
    pub iterations: usize,
    pub mse_enc: f64,
    pub mse_out: f64,
    pub max_abs_err: f64,
    pub status: String,
}

#[derive(Debug, Clone, Default)]
pub struct FitSummary {
    pub rows: Vec<FitRow>,
    pub files: Vec<PathBuf>,
}

/// Keeps at most `max` columns, chosen by a seeded draw and kept in order.
fn subsample(x: Matrix, max: usize, seed: u64) -> Matrix {
    if x.cols() <= max {
        return x;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, x.cols(), max).into_vec();
    keep.sort_unstable();
    Matrix::from_fn(x.rows(), max, |r, j| x.get(r, keep[j]))
}

pub fn run(s: &Settings) -> CliResult<FitSummary> {
    let model = load_model(s)?;
    model.require_pq()?;
    if model.pq_layer_count() == 0 {
        eprintln!("warning: model '{}' has no PQ-enabled layers; nothing to fit", model.name);
        return Ok(FitSummary::default());
    }
    create_dir(&s.out)?;
    let mut acts: Vec<Tensor3> = load_inputs(s, &model)?;
    let mut summary = FitSummary::default();

    for (i, layer) in model.layers.iter().enumerate() {
        let spec = &layer.spec;
        let w = he_weights(spec, s.seed, i);
        let wp = weights_path(&s.out, &spec.name);
        TensorFile::from_matrix(&w).save(&wp)?;
        summary.files.push(wp);

        if let Some(cfg) = layer.pq.filter(|_| spec.pq_enabled) {
            let parts = acts
                .par_iter()
                .map(|t| unroll_im2col(&prepare_input(t, spec)?, spec))
                .collect::<pqa_core::Result<Vec<_>>>()
                .map_err(|e| CliError::Data(format!("layer '{}': {e}", spec.name)))?;
            let x = subsample(Matrix::hstack(&parts)?, s.max_columns, s.seed ^ i as u64);
            let layout = subspace_layout(x.rows(), cfg.l_s)?;
            let opts = FitOptions {
                max_iters: s.max_iters,
                seed: s.seed.wrapping_add(i as u64),
                ..FitOptions::default()
            };
            let fit = fit_prototypes(&x, &cfg, &layout, &opts)?;
            if let FitStatus::TooFewSamples { samples, n_p } = fit.status {
                eprintln!("warning: layer '{}': {samples} columns for {n_p} prototypes", spec.name);
            }
            let mut lut = build_lut(&w, &fit.bank, &layout)?;
            let enc = encode_hard(&x, &fit.bank, &layout, cfg.metric)?;
            let y_ref = reference_forward(&x, &w)?;
            if let Some(ridge) = s.refit_ridge {
                lut = refit_lut(&lut, &enc, &y_ref, ridge)?;
            }
            let y_pq = accumulate_lookups(&lut, &enc);
            let x_enc = enc.reconstruct(&fit.bank, x.rows());
            let report = error_report(&y_pq, &y_ref, Some((&x_enc, &x)))?;

            let bp = bank_path(&s.out, &spec.name);
            TensorFile::f64(
                vec![layout.n_s as u32, cfg.n_p as u32, cfg.l_s as u32],
                fit.bank.values().to_vec(),
            )?
            .save(&bp)?;
            let lp = lut_path(&s.out, &spec.name);
            TensorFile::f64(
                vec![spec.c_out as u32, layout.n_s as u32, cfg.n_p as u32],
                lut.values().to_vec(),
            )?
            .save(&lp)?;
            summary.files.extend([bp, lp]);
            summary.rows.push(FitRow {
                layer: spec.name.clone(),
                a: layout.a,
                n_s: layout.n_s,
                n_p: cfg.n_p,
                l_s: cfg.l_s,
                columns: x.cols(),
                iterations: fit.iterations(),
                mse_enc: report.mse_enc,
                mse_out: report.mse_out,
                max_abs_err: report.max_abs_err,
                status: match fit.status {
                    FitStatus::Ok => "ok".into(),
                    FitStatus::TooFewSamples { .. } => "too_few_samples".into(),
                },
            });
        }

        if i + 1 < model.layers.len() {
            let dense = NetworkLayer {
                spec: spec.clone(),
                exec: LayerExec::Dense(w),
                activation: layer.activation,
            };
            acts = acts
                .par_iter()
                .map(|t| layer_forward(t, &dense))
                .collect::<pqa_core::Result<Vec<_>>>()
                .map_err(|e| CliError::Data(format!("layer '{}': {e}", spec.name)))?;
        }
    }

    let rp = s.out.join("fit_report.csv");
    let mut w = csv_writer(&rp)?;
    w.write_record(["layer", "a", "n_s", "n_p", "l_s", "columns", "iterations", "mse_enc", "mse_out", "max_abs_err", "status"])?;
    for r in &summary.rows {
        w.write_record([
            r.layer.clone(),
            r.a.to_string(),
            r.n_s.to_string(),
            r.n_p.to_string(),
            r.l_s.to_string(),
            r.columns.to_string(),
            r.iterations.to_string(),
            format!("{:e}", r.mse_enc),
            format!("{:e}", r.mse_out),
            format!("{:e}", r.max_abs_err),
            r.status.clone(),
        ])?;
    }
    finish_csv(w, &rp)?;
    summary.files.push(rp);
    Ok(summary)
}
