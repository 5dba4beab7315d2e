//! Analytical cycle, latency, FLOP and footprint model of the PQ
//! accelerator, and a concurrent parameter sweep.
//!
//! Compute and table loading overlap, so each layer costs the larger of the
//! two; a network costs the sum over its PQ layers. Dense layers are not
//! executed on the accelerator and contribute no cycles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::shape::{derive_unrolled_dims, subspace_layout, LayerSpec, Metric, PQConfig, UnrolledDims};

pub const DDR4_BYTES_PER_S: f64 = 36e9;
pub const HBM_BYTES_PER_S: f64 = 460e9;
pub const ALMS_PER_DSP: u64 = 30;
pub const ALMS_PER_BRAM: u64 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Ddr4,
    Hbm,
    Custom(f64),
}

impl MemoryKind {
    pub fn bytes_per_s(self) -> f64 {
        match self {
            MemoryKind::Ddr4 => DDR4_BYTES_PER_S,
            MemoryKind::Hbm => HBM_BYTES_PER_S,
            MemoryKind::Custom(bw) => bw,
        }
    }

    pub fn label(self) -> String {
        match self {
            MemoryKind::Ddr4 => "ddr4".into(),
            MemoryKind::Hbm => "hbm".into(),
            MemoryKind::Custom(bw) => format!("custom:{bw}"),
        }
    }
}

impl std::str::FromStr for MemoryKind {
    type Err = String;

    /// `ddr4`, `hbm` or `custom:<bytes per second>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ddr4" => Ok(MemoryKind::Ddr4),
            "hbm" => Ok(MemoryKind::Hbm),
            _ => {
                let bw = s
                    .strip_prefix("custom:")
                    .ok_or_else(|| format!("unknown memory kind '{s}'"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad bandwidth in '{s}': {e}"))?;
                if bw > 0.0 && bw.is_finite() {
                    Ok(MemoryKind::Custom(bw))
                } else {
                    Err(format!("bandwidth must be positive, got {bw}"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwConfig {
    pub ls_vec: u64,
    pub np_vec: u64,
    pub ns_vec: u64,
    pub nout_vec: u64,
    pub ls_max: u64,
    pub np_max: u64,
    pub ns_max: u64,
    pub nout_max: u64,
    pub nin_max: u64,
    pub fmax_hz: f64,
    pub mem_bw_bytes_per_s: f64,
    pub proto_bits: u64,
    pub lut_bits: u64,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            ls_vec: 16,
            np_vec: 16,
            ns_vec: 16,
            nout_vec: 32,
            ls_max: 64,
            np_max: 256,
            ns_max: 1024,
            nout_max: 1024,
            nin_max: 1024,
            fmax_hz: 490e6,
            mem_bw_bytes_per_s: DDR4_BYTES_PER_S,
            proto_bits: 16,
            lut_bits: 16,
        }
    }
}

impl HwConfig {
    pub fn with_memory(mut self, kind: MemoryKind) -> Self {
        self.mem_bw_bytes_per_s = kind.bytes_per_s();
        self
    }

    pub fn with_vecs(mut self, ls: u64, np: u64, ns: u64, nout: u64) -> Self {
        self.ls_vec = ls;
        self.np_vec = np;
        self.ns_vec = ns;
        self.nout_vec = nout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("ls_vec", self.ls_vec),
            ("np_vec", self.np_vec),
            ("ns_vec", self.ns_vec),
            ("nout_vec", self.nout_vec),
            ("ls_max", self.ls_max),
            ("np_max", self.np_max),
            ("ns_max", self.ns_max),
            ("nout_max", self.nout_max),
            ("nin_max", self.nin_max),
            ("proto_bits", self.proto_bits),
            ("lut_bits", self.lut_bits),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return arg_err(format!("{name} must be at least 1"));
        }
        for (name, v, m) in [
            ("ls", self.ls_vec, self.ls_max),
            ("np", self.np_vec, self.np_max),
            ("ns", self.ns_vec, self.ns_max),
            ("nout", self.nout_vec, self.nout_max),
        ] {
            if v > m {
                return arg_err(format!("{name}_vec {v} exceeds {name}_max {m}"));
            }
        }
        if !(self.fmax_hz > 0.0 && self.fmax_hz.is_finite()) {
            return arg_err("fmax_hz must be positive");
        }
        if self.mem_bw_bytes_per_s.is_nan() || self.mem_bw_bytes_per_s <= 0.0 {
            return arg_err("memory bandwidth must be positive");
        }
        Ok(())
    }

    /// External memory bits delivered per accelerator clock cycle.
    pub fn bits_per_cycle(&self) -> f64 {
        self.mem_bw_bytes_per_s * 8.0 / self.fmax_hz
    }
}

/// Geometry of one PQ layer as seen by the cycle model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PqGeometry {
    pub n_s: u64,
    pub n_p: u64,
    pub l_s: u64,
    pub c_out: u64,
    pub cols: u64,
}

impl PqGeometry {
    pub fn new(dims: &UnrolledDims, pq: &PQConfig) -> Result<Self> {
        let layout = subspace_layout(dims.a, pq.l_s)?;
        Ok(Self {
            n_s: layout.n_s as u64,
            n_p: pq.n_p as u64,
            l_s: pq.l_s as u64,
            c_out: dims.c_out as u64,
            cols: dims.cols as u64,
        })
    }

    pub fn for_layer(layer: &LayerSpec, pq: &PQConfig) -> Result<Self> {
        Self::new(&derive_unrolled_dims(layer)?, pq)
    }

    pub fn proto_entries(&self) -> u64 {
        self.n_s * self.n_p * self.l_s
    }

    pub fn lut_entries(&self) -> u64 {
        self.n_s * self.n_p * self.c_out
    }
}

pub fn compute_cycles(g: &PqGeometry, hw: &HwConfig) -> u64 {
    let search = g.n_p.div_ceil(hw.np_vec) * g.l_s.div_ceil(hw.ls_vec);
    let accumulate = g.c_out.div_ceil(hw.nout_vec);
    search.max(accumulate) * g.n_s.div_ceil(hw.ns_vec) * g.cols
}

/// Bits of prototypes and table moved from external memory for one layer.
pub fn bits_loaded(g: &PqGeometry, hw: &HwConfig) -> u64 {
    g.proto_entries() * hw.proto_bits + g.lut_entries() * hw.lut_bits
}

pub fn load_cycles(g: &PqGeometry, hw: &HwConfig) -> Result<u64> {
    if hw.mem_bw_bytes_per_s.is_nan() || hw.mem_bw_bytes_per_s <= 0.0 || hw.fmax_hz.is_nan() || hw.fmax_hz <= 0.0 {
        return arg_err("bandwidth and clock frequency must be positive");
    }
    let internal = (g.c_out * g.n_p * g.n_s).div_ceil(hw.nout_vec * hw.ns_vec);
    let external = (bits_loaded(g, hw) as f64 / hw.bits_per_cycle()).ceil() as u64;
    Ok(internal.max(external))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCycleReport {
    pub compute_cycles: u64,
    pub load_cycles: u64,
    pub total_cycles: u64,
    pub memory_bound: bool,
    pub bits_loaded: u64,
}

pub fn layer_report(g: &PqGeometry, hw: &HwConfig) -> Result<LayerCycleReport> {
    let compute = compute_cycles(g, hw);
    let load = load_cycles(g, hw)?;
    Ok(LayerCycleReport {
        compute_cycles: compute,
        load_cycles: load,
        total_cycles: compute.max(load),
        memory_bound: load > compute,
        bits_loaded: bits_loaded(g, hw),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub layers: Vec<(String, LayerCycleReport)>,
    pub total_cycles: u64,
}

impl NetworkReport {
    pub fn latency_us(&self, fmax_hz: f64) -> f64 {
        latency_us(self.total_cycles, fmax_hz)
    }

    pub fn compute_only_cycles(&self) -> u64 {
        self.layers.iter().map(|(_, r)| r.compute_cycles).sum()
    }
}

/// Cycle report over the PQ-enabled layers of a model. `configs[i]` holds
/// the PQ configuration of `layers[i]`.
pub fn network_report(layers: &[LayerSpec], configs: &[Option<PQConfig>], hw: &HwConfig) -> Result<NetworkReport> {
    hw.validate()?;
    if layers.len() != configs.len() {
        return arg_err("one PQ configuration slot per layer is required");
    }
    let mut out = Vec::new();
    for (layer, cfg) in layers.iter().zip(configs) {
        if !layer.pq_enabled {
            continue;
        }
        let cfg = cfg
            .as_ref()
            .ok_or_else(|| crate::PqaError::Argument(format!("layer '{}' has no PQ configuration", layer.name)))?;
        let g = PqGeometry::for_layer(layer, cfg)?;
        out.push((layer.name.clone(), layer_report(&g, hw)?));
    }
    let total_cycles = out.iter().map(|(_, r)| r.total_cycles).sum();
    Ok(NetworkReport { layers: out, total_cycles })
}

pub fn latency_us(total_cycles: u64, fmax_hz: f64) -> f64 {
    total_cycles as f64 / fmax_hz * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub flops_im2col: u64,
    pub flops_pq: u64,
    pub flops_enc: u64,
    pub flops_add: u64,
    pub ratio: f64,
    pub lut_entries: u64,
    pub proto_entries: u64,
    pub params_pq: u64,
}

/// FLOPs of one distance evaluation against a whole prototype bank.
pub fn distance_flops(n_p: u64, l_s: u64, metric: Metric) -> u64 {
    match metric {
        Metric::L2Squared => 3 * n_p * l_s,
        Metric::L1 => 2 * n_p * l_s,
    }
}

pub fn flops_footprint(dims: &UnrolledDims, pq: &PQConfig) -> Result<FootprintReport> {
    let g = PqGeometry::new(dims, pq)?;
    let flops_im2col = 2 * dims.a as u64 * g.cols * g.c_out;
    let flops_enc = g.n_s * distance_flops(g.n_p, g.l_s, pq.metric) * g.cols;
    let flops_add = (g.n_s - 1) * g.cols * g.c_out;
    let flops_pq = flops_enc + flops_add;
    Ok(FootprintReport {
        flops_im2col,
        flops_pq,
        flops_enc,
        flops_add,
        ratio: flops_im2col as f64 / flops_pq as f64,
        lut_entries: g.lut_entries(),
        proto_entries: g.proto_entries(),
        params_pq: g.lut_entries() + g.proto_entries(),
    })
}

/// Simplified savings ratio with `N_s - 1` approximated by `N_s`
/// (Euclidean distances).
pub fn savings_ratio_closed_form(c_out: u64, n_p: u64, l_s: u64) -> f64 {
    (2 * c_out * l_s) as f64 / (3 * n_p * l_s + c_out) as f64
}

/// Savings ratio keeping `N_s - 1` (no padding, Euclidean distances).
pub fn savings_ratio_exact(n_s: u64, c_out: u64, n_p: u64, l_s: u64) -> f64 {
    (2 * n_s * l_s * c_out) as f64 / (3 * n_s * n_p * l_s + (n_s - 1) * c_out) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamConvention {
    LutPlusDense,
    LutPlusProtosPlusDense,
}

/// Parameter count of a model whose PQ layers store tables (and optionally
/// prototypes) instead of weights. Biases are kept on every layer.
pub fn memory_footprint(layers: &[LayerSpec], configs: &[Option<PQConfig>], convention: ParamConvention) -> Result<u64> {
    if layers.len() != configs.len() {
        return arg_err("one PQ configuration slot per layer is required");
    }
    let mut total = 0u64;
    for (layer, cfg) in layers.iter().zip(configs) {
        match (layer.pq_enabled, cfg) {
            (true, Some(cfg)) => {
                let g = PqGeometry::for_layer(layer, cfg)?;
                total += g.lut_entries();
                if convention == ParamConvention::LutPlusProtosPlusDense {
                    total += g.proto_entries();
                }
                if layer.bias {
                    total += layer.c_out as u64;
                }
            }
            (true, None) => {
                return arg_err(format!("layer '{}' has no PQ configuration", layer.name));
            }
            (false, _) => total += layer.dense_params() as u64,
        }
    }
    Ok(total)
}

pub fn area_ealm(alms: u64, dsps: u64, brams: u64) -> u64 {
    alms + ALMS_PER_DSP * dsps + ALMS_PER_BRAM * brams
}

/// Grid of square 3-D convolutions with equal input and output channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub input_sizes: Vec<usize>,
    pub channels: Vec<usize>,
    pub n_p: Vec<usize>,
    pub l_s: Vec<usize>,
    pub memories: Vec<MemoryKind>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default)]
    pub metric: Metric,
}

fn default_kernel() -> usize {
    3
}

impl SweepGrid {
    /// Layer-size and PQ ranges of the layerwise speedup heatmaps.
    pub fn heatmap_default() -> Self {
        Self {
            input_sizes: vec![4, 8, 16, 32, 64],
            channels: vec![16, 32, 64, 128, 256],
            n_p: vec![16, 32, 64, 128],
            l_s: vec![4, 8, 16, 32, 64],
            memories: vec![MemoryKind::Ddr4, MemoryKind::Hbm],
            kernel: 3,
            metric: Metric::L2Squared,
        }
    }

    pub fn len(&self) -> usize {
        self.input_sizes.len() * self.channels.len() * self.n_p.len() * self.l_s.len() * self.memories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in lexicographic order `(memory, n_p, l_s, input, channels)`.
    fn points(&self) -> Vec<(MemoryKind, usize, usize, usize, usize)> {
        let mut pts = Vec::with_capacity(self.len());
        for &m in &self.memories {
            for &np in &self.n_p {
                for &ls in &self.l_s {
                    for &h in &self.input_sizes {
                        for &c in &self.channels {
                            pts.push((m, np, ls, h, c));
                        }
                    }
                }
            }
        }
        pts
    }
}

/// Externally measured baseline cycles for a layer, keyed by
/// `(input_size, channels)`.
pub type BaselineTable = std::collections::BTreeMap<(usize, usize), u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub memory: MemoryKind,
    pub n_p: usize,
    pub l_s: usize,
    pub input_size: usize,
    pub channels: usize,
    pub kernel: usize,
    pub n_s: u64,
    pub cols: u64,
    pub hw: HwConfig,
    pub cycles: LayerCycleReport,
    pub footprint: FootprintReport,
    pub baseline_cycles: Option<u64>,
    pub speedup: Option<f64>,
}

pub fn sweep_layer(input_size: usize, channels: usize, kernel: usize) -> LayerSpec {
    LayerSpec::conv("sweep", channels, channels, kernel, 1, input_size, input_size)
}

pub fn sweep(grid: &SweepGrid, hw: &HwConfig, baseline: Option<&BaselineTable>) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return arg_err("sweep grid is empty");
    }
    hw.validate()?;
    grid.points()
        .into_par_iter()
        .map(|(memory, n_p, l_s, input_size, channels)| {
            let layer = sweep_layer(input_size, channels, grid.kernel);
            layer.validate()?;
            let pq = PQConfig::new(n_p, l_s).with_metric(grid.metric);
            pq.validate()?;
            let dims = derive_unrolled_dims(&layer)?;
            let g = PqGeometry::new(&dims, &pq)?;
            let hw = hw.with_memory(memory);
            let cycles = layer_report(&g, &hw)?;
            let baseline_cycles = baseline.and_then(|b| b.get(&(input_size, channels)).copied());
            Ok(SweepRecord {
                memory,
                n_p,
                l_s,
                input_size,
                channels,
                kernel: grid.kernel,
                n_s: g.n_s,
                cols: g.cols,
                hw,
                cycles,
                footprint: flops_footprint(&dims, &pq)?,
                baseline_cycles,
                speedup: baseline_cycles.map(|b| b as f64 / cycles.total_cycles as f64),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(n_s: u64, n_p: u64, l_s: u64, c_out: u64, cols: u64) -> PqGeometry {
        PqGeometry { n_s, n_p, l_s, c_out, cols }
    }

    #[test]
    fn compute_example() {
        assert_eq!(compute_cycles(&geom(64, 16, 9, 64, 64), &HwConfig::default()), 512);
    }

    #[test]
    fn fully_vectorised_costs_cols() {
        let hw = HwConfig::default().with_vecs(8, 4, 2, 16);
        assert_eq!(compute_cycles(&geom(2, 4, 8, 16, 77), &hw), 77);
    }

    #[test]
    fn load_examples() {
        let g = geom(16, 16, 9, 64, 1);
        let ddr = HwConfig::default().with_memory(MemoryKind::Ddr4);
        assert_eq!(load_cycles(&g, &ddr).unwrap(), 509);
        let hbm = ddr.with_memory(MemoryKind::Hbm);
        assert_eq!(load_cycles(&g, &hbm).unwrap(), 40);
        // empty tables leave only the internal term
        let zero_bits = HwConfig { proto_bits: 0, lut_bits: 0, ..ddr };
        assert_eq!(load_cycles(&g, &zero_bits).unwrap(), 32);
        let bad = HwConfig { mem_bw_bytes_per_s: 0.0, ..ddr };
        assert!(load_cycles(&g, &bad).is_err());
    }

    #[test]
    fn internal_term_wins_with_huge_bandwidth() {
        let hw = HwConfig::default().with_memory(MemoryKind::Custom(1e30));
        assert_eq!(load_cycles(&geom(16, 16, 9, 64, 1), &hw).unwrap(), 32);
    }

    #[test]
    fn memory_bound_layer() {
        let g = geom(64, 256, 4, 512, 1);
        let r = layer_report(&g, &HwConfig::default()).unwrap();
        assert!(r.memory_bound);
        assert_eq!(r.total_cycles, r.load_cycles);
    }

    #[test]
    fn flops_examples() {
        assert!((savings_ratio_closed_form(64, 16, 8) - 1024.0 / 448.0).abs() < 1e-12);
        assert!((savings_ratio_closed_form(16, 16, 8) - 0.64).abs() < 1e-12);
        let dims = UnrolledDims { a: 8, cols: 10, c_out: 4 };
        let f = flops_footprint(&dims, &PQConfig::new(4, 8)).unwrap();
        assert_eq!(f.flops_add, 0);
        assert_eq!(f.flops_pq, f.flops_enc);
        let l1 = flops_footprint(&dims, &PQConfig::new(4, 8).with_metric(Metric::L1)).unwrap();
        assert_eq!(l1.flops_enc, 2 * 4 * 8 * 10);
    }

    #[test]
    fn exact_ratio_matches_components() {
        let dims = UnrolledDims { a: 64 * 9, cols: 256, c_out: 64 };
        let f = flops_footprint(&dims, &PQConfig::new(16, 9)).unwrap();
        assert!((f.ratio - savings_ratio_exact(64, 64, 16, 9)).abs() < 1e-12);
    }

    #[test]
    fn ealm() {
        assert_eq!(area_ealm(100, 0, 0), 100);
        assert_eq!(area_ealm(0, 1, 1), 70);
        assert_eq!(area_ealm(1000, 10, 5), 1500);
    }

    #[test]
    fn params_formula() {
        let layer = LayerSpec::conv("c", 16, 32, 3, 1, 8, 8).with_pq(true);
        let cfg = PQConfig::new(8, 9);
        let n = memory_footprint(&[layer], &[Some(cfg)], ParamConvention::LutPlusProtosPlusDense).unwrap();
        assert_eq!(n, 16 * 8 * (9 + 32));
    }

    #[test]
    fn missing_config_names_layer() {
        let layer = LayerSpec::conv("needs_pq", 16, 32, 3, 1, 8, 8).with_pq(true);
        let err = network_report(&[layer], &[None], &HwConfig::default()).unwrap_err();
        assert!(err.to_string().contains("needs_pq"));
    }

    #[test]
    fn empty_and_singleton_sweep() {
        let mut grid = SweepGrid::heatmap_default();
        grid.channels.clear();
        assert!(sweep(&grid, &HwConfig::default(), None).is_err());

        let grid = SweepGrid {
            input_sizes: vec![8],
            channels: vec![32],
            n_p: vec![16],
            l_s: vec![9],
            memories: vec![MemoryKind::Hbm],
            kernel: 3,
            metric: Metric::L2Squared,
        };
        let hw = HwConfig::default();
        let mut base = BaselineTable::new();
        base.insert((8, 32), 1000);
        let recs = sweep(&grid, &hw, Some(&base)).unwrap();
        assert_eq!(recs.len(), 1);
        let layer = sweep_layer(8, 32, 3);
        let dims = derive_unrolled_dims(&layer).unwrap();
        let pq = PQConfig::new(16, 9);
        let g = PqGeometry::new(&dims, &pq).unwrap();
        assert_eq!(recs[0].cycles, layer_report(&g, &hw.with_memory(MemoryKind::Hbm)).unwrap());
        assert_eq!(recs[0].footprint, flops_footprint(&dims, &pq).unwrap());
        assert_eq!(recs[0].speedup, Some(1000.0 / recs[0].cycles.total_cycles as f64));
    }

    #[test]
    fn doubling_np_doubles_bits() {
        let mut grid = SweepGrid::heatmap_default();
        grid.n_p = vec![16];
        let a = sweep(&grid, &HwConfig::default(), None).unwrap();
        grid.n_p = vec![32];
        let b = sweep(&grid, &HwConfig::default(), None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2 * x.cycles.bits_loaded, y.cycles.bits_loaded);
        }
    }

    #[test]
    fn hbm_never_slower_to_load() {
        let grid = SweepGrid::heatmap_default();
        let recs = sweep(&grid, &HwConfig::default(), None).unwrap();
        let half = recs.len() / 2;
        for (d, h) in recs[..half].iter().zip(&recs[half..]) {
            assert_eq!((d.memory, h.memory), (MemoryKind::Ddr4, MemoryKind::Hbm));
            assert!(h.cycles.load_cycles <= d.cycles.load_cycles);
            assert!(!h.cycles.memory_bound || d.cycles.memory_bound);
        }
    }

    proptest! {
        #[test]
        fn cycles_monotone(
            n_s in 1u64..200, n_p in 1u64..300, l_s in 1u64..40, c_out in 1u64..300, cols in 1u64..500,
            v in 1u64..40, which in 0usize..4,
        ) {
            let hw = HwConfig { np_max: 1024, ls_max: 1024, ns_max: 1024, nout_max: 1024, ..HwConfig::default() };
            let g = geom(n_s, n_p, l_s, c_out, cols);
            let total = |g: &PqGeometry, hw: &HwConfig| layer_report(g, hw).unwrap().total_cycles;
            let base = total(&g, &hw);
            prop_assert!(total(&geom(n_s + 1, n_p, l_s, c_out, cols), &hw) >= base);
            prop_assert!(total(&geom(n_s, n_p + 1, l_s, c_out, cols), &hw) >= base);
            prop_assert!(total(&geom(n_s, n_p, l_s, c_out, cols + 1), &hw) >= base);
            let mut lo = hw;
            let mut hi = hw;
            match which {
                0 => { lo.ls_vec = v; hi.ls_vec = v + 1; }
                1 => { lo.np_vec = v; hi.np_vec = v + 1; }
                2 => { lo.ns_vec = v; hi.ns_vec = v + 1; }
                _ => { lo.nout_vec = v; hi.nout_vec = v + 1; }
            }
            prop_assert!(total(&g, &hi) <= total(&g, &lo));
        }

        #[test]
        fn divisible_ceilings_are_exact(k1 in 1u64..8, k2 in 1u64..8, k3 in 1u64..8, k4 in 1u64..8, cols in 1u64..100) {
            let hw = HwConfig::default();
            let g = geom(k3 * hw.ns_vec, k1 * hw.np_vec, k2 * hw.ls_vec, k4 * hw.nout_vec, cols);
            let exact = (k1 * k2).max(k4) * k3 * cols;
            prop_assert_eq!(compute_cycles(&g, &hw), exact);
        }
    }
}
