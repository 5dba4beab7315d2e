//! Applies a quantization scheme to saved banks and tables.

use std::path::PathBuf;

use pqa_core::encoder::unroll_im2col;
use pqa_core::inference::{forward_trace, prepare_input, LayerExec, PQLayerRuntime};
use pqa_core::quantizer::{quantize_model, QuantizedRuntime};
use pqa_core::Matrix;
use rayon::prelude::*;

use super::*;
use crate::config::Settings;
use crate::error::CliResult;
use crate::tensorfile::{TensorData, TensorFile};

#[derive(Debug, Clone)]
pub struct QuantizeSummary {
    pub layers: Vec<QuantizedRuntime>,
    pub files: Vec<PathBuf>,
}

fn codes(values: &[u32], bits: u32) -> TensorData {
    if bits <= 8 {
        TensorData::U8(values.iter().map(|v| *v as u8).collect())
    } else {
        TensorData::I32(values.iter().map(|v| *v as i32).collect())
    }
}

pub fn run(s: &Settings) -> CliResult<QuantizeSummary> {
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

    let mut runtimes: Vec<&PQLayerRuntime> = Vec::new();
    let mut calib = Vec::new();
    for (i, layer) in pq.iter().enumerate() {
        if let LayerExec::Pq(rt) = &layer.exec {
            let parts = traces
                .iter()
                .map(|t| unroll_im2col(&prepare_input(&t[i], &layer.spec)?, &layer.spec))
                .collect::<pqa_core::Result<Vec<_>>>()?;
            runtimes.push(rt);
            calib.push(Matrix::hstack(&parts)?);
        }
    }
    let calib_refs: Vec<&Matrix> = calib.iter().collect();
    let quantized = quantize_model(&runtimes, &calib_refs, &s.scheme)?;

    create_dir(&s.out)?;
    let mut files = Vec::new();
    let params_path = s.out.join("quant_params.csv");
    let mut pw = csv_writer(&params_path)?;
    pw.write_record(["layer", "component", "subspace", "scale", "zero_point", "bits", "min", "max"])?;
    let layers_path = s.out.join("quant_layers.csv");
    let mut lw = csv_writer(&layers_path)?;
    lw.write_record(["layer", "granularity", "accumulator_frac_bits", "accumulator_step", "output_error_bound"])?;

    for q in &quantized {
        let name = &q.layer.name;
        let (n_s, n_p, l_s) = (q.layout.n_s as u32, q.config.n_p as u32, q.layout.l_s as u32);
        let pp = s.out.join(format!("{name}.proto_codes.pqt"));
        TensorFile::new(vec![n_s, n_p, l_s], codes(&q.proto_codes, q.scheme.proto_bits))?.save(&pp)?;
        let lp = s.out.join(format!("{name}.lut_codes.pqt"));
        TensorFile::new(vec![q.layer.c_out as u32, n_s, n_p], codes(&q.lut_codes, q.scheme.lut_bits))?.save(&lp)?;
        files.extend([pp, lp]);
        for (component, params) in [("proto", q.stored_proto_params()), ("lut", q.stored_lut_params())] {
            for (n, p) in params.iter().enumerate() {
                pw.write_record([
                    name.clone(),
                    component.to_string(),
                    if params.len() == 1 { "all".to_string() } else { n.to_string() },
                    format!("{:e}", p.scale),
                    p.zero_point.to_string(),
                    p.bits.to_string(),
                    format!("{:e}", p.min),
                    format!("{:e}", p.max),
                ])?;
            }
        }
        lw.write_record([
            name.clone(),
            format!("{:?}", q.scheme.granularity),
            q.accumulator.frac_bits.to_string(),
            format!("{:e}", q.accumulator.step()),
            format!("{:e}", q.output_error_bound()),
        ])?;
    }
    finish_csv(pw, &params_path)?;
    finish_csv(lw, &layers_path)?;
    files.extend([params_path, layers_path]);
    Ok(QuantizeSummary { layers: quantized, files })
}
