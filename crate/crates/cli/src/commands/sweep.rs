//! Layerwise design-space sweep written as CSV.
//!
//! Columns, in order: memory, n_p, l_s, input_size, channels, kernel, n_s,
//! cols, ls_vec, np_vec, ns_vec, nout_vec, fmax_hz, mem_bw_bytes_per_s,
//! compute_cycles, load_cycles, total_cycles, memory_bound, bits_loaded,
//! flops_im2col, flops_pq, flops_ratio, lut_entries, proto_entries,
//! params_pq, baseline_cycles, speedup.

use std::path::{Path, PathBuf};

use pqa_core::perfmodel::{sweep, BaselineTable, MemoryKind, SweepGrid, SweepRecord};
use pqa_core::Metric;
use serde::Deserialize;

use super::*;
use crate::config::Settings;
use crate::error::CliResult;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    input_sizes: Vec<usize>,
    channels: Vec<usize>,
    n_p: Vec<usize>,
    l_s: Vec<usize>,
    #[serde(default)]
    memories: Option<Vec<String>>,
    kernel: Option<usize>,
    metric: Option<Metric>,
}

pub fn load_grid(path: &Path) -> CliResult<SweepGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let g: GridFile = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let memories = match g.memories {
        Some(m) => m
            .iter()
            .map(|s| s.parse::<MemoryKind>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Usage)?,
        None => vec![MemoryKind::Ddr4, MemoryKind::Hbm],
    };
    Ok(SweepGrid {
        input_sizes: g.input_sizes,
        channels: g.channels,
        n_p: g.n_p,
        l_s: g.l_s,
        memories,
        kernel: g.kernel.unwrap_or(3),
        metric: g.metric.unwrap_or_default(),
    })
}

#[derive(Debug, Deserialize)]
struct BaselineRow {
    input_size: usize,
    channels: usize,
    cycles: u64,
}

pub fn load_baseline(path: &Path) -> CliResult<BaselineTable> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut table = BaselineTable::new();
    for row in csv::Reader::from_reader(f).deserialize() {
        let r: BaselineRow = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        table.insert((r.input_size, r.channels), r.cycles);
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub records: Vec<SweepRecord>,
    pub csv: PathBuf,
}

pub fn run(s: &Settings) -> CliResult<SweepSummary> {
    let grid = match &s.grid {
        Some(p) => load_grid(p)?,
        None => SweepGrid::heatmap_default(),
    };
    let baseline = s.baseline_table.as_deref().map(load_baseline).transpose()?;
    let records = sweep(&grid, &s.hw, baseline.as_ref())?;

    create_dir(&s.out)?;
    let path = s.out.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "memory", "n_p", "l_s", "input_size", "channels", "kernel", "n_s", "cols", "ls_vec", "np_vec", "ns_vec", "nout_vec",
        "fmax_hz", "mem_bw_bytes_per_s", "compute_cycles", "load_cycles", "total_cycles", "memory_bound", "bits_loaded",
        "flops_im2col", "flops_pq", "flops_ratio", "lut_entries", "proto_entries", "params_pq", "baseline_cycles", "speedup",
    ])?;
    for r in &records {
        w.write_record([
            r.memory.label(),
            r.n_p.to_string(),
            r.l_s.to_string(),
            r.input_size.to_string(),
            r.channels.to_string(),
            r.kernel.to_string(),
            r.n_s.to_string(),
            r.cols.to_string(),
            r.hw.ls_vec.to_string(),
            r.hw.np_vec.to_string(),
            r.hw.ns_vec.to_string(),
            r.hw.nout_vec.to_string(),
            format!("{}", r.hw.fmax_hz),
            format!("{}", r.hw.mem_bw_bytes_per_s),
            r.cycles.compute_cycles.to_string(),
            r.cycles.load_cycles.to_string(),
            r.cycles.total_cycles.to_string(),
            r.cycles.memory_bound.to_string(),
            r.cycles.bits_loaded.to_string(),
            r.footprint.flops_im2col.to_string(),
            r.footprint.flops_pq.to_string(),
            format!("{:.6}", r.footprint.ratio),
            r.footprint.lut_entries.to_string(),
            r.footprint.proto_entries.to_string(),
            r.footprint.params_pq.to_string(),
            r.baseline_cycles.map_or(String::new(), |b| b.to_string()),
            r.speedup.map_or(String::new(), |x| format!("{x:.6}")),
        ])?;
    }
    finish_csv(w, &path)?;
    Ok(SweepSummary { records, csv: path })
}
