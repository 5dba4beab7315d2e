//! Cycle, latency and footprint report for a model on the accelerator.

use pqa_core::perfmodel::{latency_us, memory_footprint, network_report, NetworkReport, ParamConvention, PqGeometry};

use super::*;
use crate::config::Settings;
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub model: String,
    pub report: NetworkReport,
    pub latency_us: f64,
    pub params_lut_plus_dense: u64,
    pub params_lut_plus_protos_plus_dense: u64,
    pub dense_params: u64,
    pub speedup: Option<f64>,
}

impl SimulateSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "model {}: {} PQ layers, {} cycles, {:.2} us\n",
            self.model,
            self.report.layers.len(),
            self.report.total_cycles,
            self.latency_us
        );
        let bound = self.report.layers.iter().filter(|(_, r)| r.memory_bound).count();
        s += &format!("memory-bound layers: {bound}\n");
        s += &format!(
            "params: dense {}, lut+dense {}, lut+protos+dense {}\n",
            self.dense_params, self.params_lut_plus_dense, self.params_lut_plus_protos_plus_dense
        );
        if let Some(x) = self.speedup {
            s += &format!("speedup vs baseline: {x:.3}x\n");
        }
        s
    }
}

pub fn run(s: &Settings) -> CliResult<SimulateSummary> {
    let model = load_model(s)?;
    model.require_pq()?;
    let specs = model.specs();
    let configs = model.pq_configs();
    let report = network_report(&specs, &configs, &s.hw)?;
    let summary = SimulateSummary {
        model: model.name.clone(),
        latency_us: latency_us(report.total_cycles, s.hw.fmax_hz),
        params_lut_plus_dense: memory_footprint(&specs, &configs, ParamConvention::LutPlusDense)?,
        params_lut_plus_protos_plus_dense: memory_footprint(&specs, &configs, ParamConvention::LutPlusProtosPlusDense)?,
        dense_params: model.dense_params() as u64,
        speedup: s.baseline_cycles.map(|b| b as f64 / report.total_cycles as f64),
        report,
    };

    create_dir(&s.out)?;
    let path = s.out.join("simulate.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "layer", "n_s", "n_p", "l_s", "c_out", "cols", "compute_cycles", "load_cycles", "total_cycles", "memory_bound", "bits_loaded",
    ])?;
    let mut rows = summary.report.layers.iter();
    for (layer, cfg) in model.layers.iter().zip(&configs) {
        let Some(cfg) = cfg.filter(|_| layer.spec.pq_enabled) else {
            continue;
        };
        let (_, r) = rows.next().expect("one report per PQ layer");
        let g = PqGeometry::for_layer(&layer.spec, &cfg)?;
        w.write_record([
            layer.spec.name.clone(),
            g.n_s.to_string(),
            g.n_p.to_string(),
            g.l_s.to_string(),
            g.c_out.to_string(),
            g.cols.to_string(),
            r.compute_cycles.to_string(),
            r.load_cycles.to_string(),
            r.total_cycles.to_string(),
            r.memory_bound.to_string(),
            r.bits_loaded.to_string(),
        ])?;
    }
    let t = &summary.report;
    w.write_record([
        "total".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        t.compute_only_cycles().to_string(),
        t.layers.iter().map(|(_, r)| r.load_cycles).sum::<u64>().to_string(),
        t.total_cycles.to_string(),
        t.layers.iter().any(|(_, r)| r.memory_bound).to_string(),
        t.layers.iter().map(|(_, r)| r.bits_loaded).sum::<u64>().to_string(),
    ])?;
    finish_csv(w, &path)?;

    let spath = s.out.join("simulate_summary.csv");
    let mut w = csv_writer(&spath)?;
    w.write_record(["key", "value"])?;
    let speedup = summary.speedup.map_or(String::new(), |x| format!("{x:.6}"));
    for (k, v) in [
        ("model", summary.model.clone()),
        ("memory", s.memory.label()),
        ("fmax_hz", format!("{}", s.hw.fmax_hz)),
        ("total_cycles", summary.report.total_cycles.to_string()),
        ("latency_us", format!("{:.4}", summary.latency_us)),
        ("dense_params", summary.dense_params.to_string()),
        ("params_lut_plus_dense", summary.params_lut_plus_dense.to_string()),
        ("params_lut_plus_protos_plus_dense", summary.params_lut_plus_protos_plus_dense.to_string()),
        ("baseline_cycles", s.baseline_cycles.map_or(String::new(), |b| b.to_string())),
        ("speedup", speedup),
    ] {
        w.write_record([k.to_string(), v])?;
    }
    finish_csv(w, &spath)?;
    Ok(summary)
}
