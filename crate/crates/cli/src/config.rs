//! Run settings shared by all commands.
//!
//! Every command-line flag has a key of the same name (with underscores)
//! in the optional TOML config file. Defaults are overridden by the file,
//! and the file by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use pqa_core::perfmodel::{HwConfig, MemoryKind};
use pqa_core::quantizer::{Calibration, Granularity, QuantScheme};
use pqa_core::Metric;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

macro_rules! run_config {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty ),* $(,)?) => {
        #[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct RunConfig {
            /// TOML file with defaults for any of these flags.
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$doc])* #[arg(long)] pub $field: Option<$ty>, )*
        }

        impl RunConfig {
            /// Fills every unset field from `lower`.
            pub fn over(self, lower: RunConfig) -> RunConfig {
                RunConfig {
                    config: self.config.or(lower.config),
                    $( $field: self.$field.or(lower.$field), )*
                }
            }
        }
    };
}

run_config! {
    /// Zoo model name or model spec path.
    model: String,
    /// Output directory (or file, for `sweep`).
    out: PathBuf,
    /// Directory holding fitted weights, banks and tables.
    artifacts: PathBuf,
    /// Input tensor file, `[N, C, H, W]` or `[C, H, W]`.
    samples: PathBuf,
    /// Number of random inputs when no sample file is given.
    num_samples: usize,
    seed: u64,
    l_s: usize,
    n_p: usize,
    metric: Metric,
    max_iters: usize,
    /// Cap on unrolled columns used for fitting each layer.
    max_columns: usize,
    /// Ridge weight for re-solving table entries after fitting.
    refit_ridge: f64,
    /// `ddr4`, `hbm` or `custom:<bytes per second>`.
    memory: String,
    ls_vec: u64,
    np_vec: u64,
    ns_vec: u64,
    nout_vec: u64,
    ls_max: u64,
    np_max: u64,
    ns_max: u64,
    nout_max: u64,
    nin_max: u64,
    fmax_mhz: f64,
    /// Prototype bitwidth, for memory traffic and quantization.
    proto_bits: u32,
    /// Table bitwidth, for memory traffic and quantization.
    lut_bits: u32,
    /// `global`, `per_layer` or `per_subspace`.
    granularity: Granularity,
    /// `full_range` or `percentile`.
    calibration: String,
    lo_pct: f64,
    hi_pct: f64,
    /// Quantize with the configured scheme during `eval`.
    quantize: bool,
    /// Baseline cycles for speedup reporting.
    baseline_cycles: u64,
    /// CSV with `input_size,channels,cycles` baseline rows for `sweep`.
    baseline_table: PathBuf,
    /// TOML sweep grid; the default is the layerwise heatmap grid.
    grid: PathBuf,
}

impl RunConfig {
    /// Flags layered over the config file named by `--config`, if any.
    pub fn resolve(self) -> CliResult<Settings> {
        let merged = match &self.config {
            Some(path) => self.clone().over(Self::from_file(path)?),
            None => self,
        };
        Settings::from_config(merged)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: Option<String>,
    pub out: PathBuf,
    pub artifacts: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub num_samples: usize,
    pub seed: u64,
    pub l_s: Option<usize>,
    pub n_p: Option<usize>,
    pub metric: Option<Metric>,
    pub max_iters: usize,
    pub max_columns: usize,
    pub refit_ridge: Option<f64>,
    pub memory: MemoryKind,
    pub hw: HwConfig,
    pub scheme: QuantScheme,
    pub quantize: bool,
    pub baseline_cycles: Option<u64>,
    pub baseline_table: Option<PathBuf>,
    pub grid: Option<PathBuf>,
}

impl Settings {
    pub fn from_config(c: RunConfig) -> CliResult<Self> {
        let memory: MemoryKind = c
            .memory
            .as_deref()
            .unwrap_or("ddr4")
            .parse()
            .map_err(CliError::Usage)?;
        let d = HwConfig::default();
        let proto_bits = c.proto_bits.unwrap_or(16);
        let lut_bits = c.lut_bits.unwrap_or(16);
        let hw = HwConfig {
            ls_vec: c.ls_vec.unwrap_or(d.ls_vec),
            np_vec: c.np_vec.unwrap_or(d.np_vec),
            ns_vec: c.ns_vec.unwrap_or(d.ns_vec),
            nout_vec: c.nout_vec.unwrap_or(d.nout_vec),
            ls_max: c.ls_max.unwrap_or(d.ls_max),
            np_max: c.np_max.unwrap_or(d.np_max),
            ns_max: c.ns_max.unwrap_or(d.ns_max),
            nout_max: c.nout_max.unwrap_or(d.nout_max),
            nin_max: c.nin_max.unwrap_or(d.nin_max),
            fmax_hz: c.fmax_mhz.map_or(d.fmax_hz, |m| m * 1e6),
            mem_bw_bytes_per_s: memory.bytes_per_s(),
            proto_bits: proto_bits as u64,
            lut_bits: lut_bits as u64,
        };
        hw.validate()?;
        let calibration = match c.calibration.as_deref().unwrap_or("full_range") {
            "full_range" => Calibration::FullRange,
            "percentile" => Calibration::Percentile {
                lo_pct: c.lo_pct.unwrap_or(30.0),
                hi_pct: c.hi_pct.unwrap_or(70.0),
            },
            other => return Err(CliError::Usage(format!("unknown calibration '{other}'"))),
        };
        let scheme = QuantScheme {
            granularity: c.granularity.unwrap_or(Granularity::PerSubspace),
            calibration,
            proto_bits,
            lut_bits,
        };
        Ok(Self {
            model: c.model,
            out: c.out.unwrap_or_else(|| PathBuf::from("out")),
            artifacts: c.artifacts,
            samples: c.samples,
            num_samples: c.num_samples.unwrap_or(8),
            seed: c.seed.unwrap_or(0),
            l_s: c.l_s,
            n_p: c.n_p,
            metric: c.metric,
            max_iters: c.max_iters.unwrap_or(25),
            max_columns: c.max_columns.unwrap_or(8192),
            refit_ridge: c.refit_ridge,
            memory,
            hw,
            scheme,
            quantize: c.quantize.unwrap_or(false),
            baseline_cycles: c.baseline_cycles,
            baseline_table: c.baseline_table,
            grid: c.grid,
        })
    }

    pub fn require_model(&self) -> CliResult<&str> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::Usage("a model is required (--model <zoo name or path>)".into()))
    }

    pub fn require_artifacts(&self) -> CliResult<&Path> {
        self.artifacts
            .as_deref()
            .ok_or_else(|| CliError::Usage("--artifacts <dir> is required".into()))
    }
}
