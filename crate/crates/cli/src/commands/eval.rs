//! Per-layer and end-to-end error of a fitted PQ model against the dense
//! model, optionally with quantized tables.

use pqa_core::encoder::unroll_im2col;
use pqa_core::inference::{error_report, forward_trace, network_forward, pq_forward, prepare_input, reference_forward, ErrorReport};
use pqa_core::quantizer::{divergence_bound, quantize_runtime, quantized_pq_forward};
use pqa_core::Matrix;
use rayon::prelude::*;

use super::*;
use crate::config::Settings;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantRow {
    /// Largest quantized-vs-float output difference.
    pub max_diff: f64,
    /// Per-element bound on `max_diff`, allowing for flipped prototype
    /// choices; meaningful with full-range calibration and no saturation.
    pub bound: f64,
    pub index_agreement: f64,
    pub saturations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub layer: String,
    pub report: ErrorReport,
    pub quant: Option<QuantRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub layers: Vec<EvalRow>,
    /// End-to-end PQ network versus dense network.
    pub network: ErrorReport,
}

pub fn run(s: &Settings) -> CliResult<EvalSummary> {
    let model = load_model(s)?;
    model.require_pq()?;
    let dir = s.require_artifacts()?;
    let dense = load_network(dir, &model, false)?;
    let pq = load_network(dir, &model, true)?;
    let inputs = load_inputs(s, &model)?;

    let traces = inputs
        .par_iter()
        .map(|x| forward_trace(x, &dense))
        .collect::<pqa_core::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        let pqa_core::inference::LayerExec::Pq(rt) = &pq[i].exec else {
            continue;
        };
        let spec = &layer.spec;
        let parts = traces
            .iter()
            .map(|t| unroll_im2col(&prepare_input(&t[i], spec)?, spec))
            .collect::<pqa_core::Result<Vec<_>>>()?;
        let x = Matrix::hstack(&parts)?;
        let w = load_weights(dir, spec)?;
        let enc = rt.encode(&x)?;
        let x_enc = enc.reconstruct(rt.bank(), x.rows());
        let y_pq = pq_forward(&x, rt)?;
        let y_ref = reference_forward(&x, &w)?;
        let report = error_report(&y_pq, &y_ref, Some((&x_enc, &x)))?;
        let quant = if s.quantize {
            let q = quantize_runtime(rt, &s.scheme, &x)?;
            let qo = quantized_pq_forward(&x, &q)?;
            let agree = qo.indices.iter().zip(&enc.indices).filter(|(a, b)| a == b).count();
            let max_diff = qo
                .output
                .as_slice()
                .iter()
                .zip(y_pq.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Some(QuantRow {
                max_diff,
                bound: divergence_bound(&x, rt, &q)?,
                index_agreement: agree as f64 / enc.indices.len().max(1) as f64,
                saturations: qo.saturations,
            })
        } else {
            None
        };
        rows.push(EvalRow {
            layer: spec.name.clone(),
            report,
            quant,
        });
    }

    let outs = inputs
        .par_iter()
        .map(|x| Ok((network_forward(x, &pq)?, network_forward(x, &dense)?)))
        .collect::<pqa_core::Result<Vec<_>>>()?;
    let (got, want): (Vec<f64>, Vec<f64>) = outs.into_iter().flat_map(|(a, b)| a.into_iter().zip(b)).unzip();
    let n = got.len();
    let network = error_report(&Matrix::new(1, n, got)?, &Matrix::new(1, n, want)?, None)?;

    create_dir(&s.out)?;
    let path = s.out.join("eval_report.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["layer", "mse_enc", "mse_out", "max_abs_err"];
    if s.quantize {
        header.extend(["q_max_diff", "q_bound", "q_index_agreement", "q_saturations"]);
    }
    w.write_record(&header)?;
    let fmt = |v: f64| format!("{v:e}");
    for r in &rows {
        let mut rec = vec![r.layer.clone(), fmt(r.report.mse_enc), fmt(r.report.mse_out), fmt(r.report.max_abs_err)];
        if let Some(q) = r.quant {
            rec.extend([fmt(q.max_diff), fmt(q.bound), format!("{:.6}", q.index_agreement), q.saturations.to_string()]);
        }
        w.write_record(&rec)?;
    }
    let mut rec = vec!["network".to_string(), String::new(), fmt(network.mse_out), fmt(network.max_abs_err)];
    if s.quantize {
        rec.extend([String::new(), String::new(), String::new(), String::new()]);
    }
    w.write_record(&rec)?;
    finish_csv(w, &path)?;
    Ok(EvalSummary { layers: rows, network })
}
