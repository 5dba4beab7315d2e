//! Post-training affine quantization of prototypes and lookup tables.
//!
//! Prototypes are stored as codes and incoming inputs are quantized with
//! the same parameters, so distances are computed on integers. Table
//! entries are stored as codes and dequantized before being added into a
//! saturating signed 16-bit fixed-point accumulator.

use serde::{Deserialize, Serialize};

use crate::encoder::{gather_subvector, LutPQ};
use crate::error::{arg_err, shape_err, Result};
use crate::inference::PQLayerRuntime;
use crate::shape::{LayerSpec, Metric, PQConfig, SubspaceLayout};
use crate::tensor::Matrix;

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 16;
pub const ACCUMULATOR_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f64,
    /// Integer offset: `code = round(x/scale) + zero_point`. Not restricted
    /// to the code range, so ranges that exclude zero keep full resolution.
    pub zero_point: i32,
    pub bits: u32,
    /// Calibrated real range.
    pub min: f64,
    pub max: f64,
}

impl QuantParams {
    pub fn qmax(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    #[inline]
    pub fn quantize(&self, x: f64) -> u32 {
        let q = (x / self.scale).round() as i64 + self.zero_point as i64;
        q.clamp(0, self.qmax() as i64) as u32
    }

    #[inline]
    pub fn dequantize(&self, code: u32) -> f64 {
        (code as i64 - self.zero_point as i64) as f64 * self.scale
    }

    /// Worst-case round-trip error for inputs inside the calibrated range.
    pub fn error_bound(&self) -> f64 {
        self.scale / 2.0
    }

    pub fn clamp_to_range(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Calibration {
    FullRange,
    Percentile { lo_pct: f64, hi_pct: f64 },
}

impl Calibration {
    pub fn percentile_default() -> Self {
        Calibration::Percentile {
            lo_pct: 30.0,
            hi_pct: 70.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Global,
    PerLayer,
    PerSubspace,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "global" => Ok(Granularity::Global),
            "per_layer" => Ok(Granularity::PerLayer),
            "per_subspace" => Ok(Granularity::PerSubspace),
            other => Err(format!("unknown granularity '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantScheme {
    pub granularity: Granularity,
    pub calibration: Calibration,
    pub proto_bits: u32,
    pub lut_bits: u32,
}

impl QuantScheme {
    pub fn validate(&self) -> Result<()> {
        for bits in [self.proto_bits, self.lut_bits] {
            check_bits(bits)?;
        }
        if let Calibration::Percentile { lo_pct, hi_pct } = self.calibration {
            if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
                return arg_err(format!("invalid percentiles ({lo_pct}, {hi_pct})"));
            }
        }
        Ok(())
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return arg_err(format!("bit width {bits} outside [{MIN_BITS}, {MAX_BITS}]"));
    }
    Ok(())
}

/// Linear-interpolated percentile of sorted values.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn calibrated_range(values: &[f64], calibration: Calibration) -> (f64, f64) {
    match calibration {
        Calibration::FullRange => values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v))),
        Calibration::Percentile { lo_pct, hi_pct } => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            (percentile(&sorted, lo_pct), percentile(&sorted, hi_pct))
        }
    }
}

/// Derives affine parameters covering the calibrated range of `values`.
pub fn calibrate(values: &[f64], bits: u32, calibration: Calibration) -> Result<QuantParams> {
    check_bits(bits)?;
    if values.is_empty() {
        return arg_err("calibration needs at least one value");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return arg_err("calibration values must be finite");
    }
    let (min, max) = calibrated_range(values, calibration);
    Ok(params_for_range(min, max, bits))
}

fn params_for_range(min: f64, max: f64, bits: u32) -> QuantParams {
    let qmax = ((1u32 << bits) - 1) as f64;
    if max > min {
        let scale = (max - min) / qmax;
        QuantParams {
            scale,
            zero_point: (-min / scale).round() as i32,
            bits,
            min,
            max,
        }
    } else {
        // constant input: one step equal to the value, so it maps exactly
        let scale = if min != 0.0 { min.abs() } else { 1.0 };
        QuantParams {
            scale,
            zero_point: if min < 0.0 { 1 } else { 0 },
            bits,
            min,
            max,
        }
    }
}

/// Signed 16-bit fixed-point accumulator with `frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accumulator16 {
    pub frac_bits: i32,
}

impl Accumulator16 {
    pub const MIN: i64 = i16::MIN as i64;
    pub const MAX: i64 = i16::MAX as i64;

    pub fn step(&self) -> f64 {
        2f64.powi(-self.frac_bits)
    }

    /// Largest fractional precision that leaves 2× headroom over `max_abs`.
    pub fn for_magnitude(max_abs: f64) -> Self {
        let frac_bits = if max_abs > 0.0 {
            ((Self::MAX as f64) / (2.0 * max_abs)).log2().floor() as i32
        } else {
            12
        };
        Self {
            frac_bits: frac_bits.clamp(-16, 30),
        }
    }

    /// Converts a real addend to accumulator units, saturating.
    #[inline]
    fn to_units(self, v: f64, saturations: &mut u64) -> i64 {
        let q = (v / self.step()).round();
        if q > Self::MAX as f64 {
            *saturations += 1;
            Self::MAX
        } else if q < Self::MIN as f64 {
            *saturations += 1;
            Self::MIN
        } else {
            q as i64
        }
    }

    #[inline]
    fn add(&self, acc: i64, units: i64, saturations: &mut u64) -> i64 {
        let s = acc + units;
        if s > Self::MAX {
            *saturations += 1;
            Self::MAX
        } else if s < Self::MIN {
            *saturations += 1;
            Self::MIN
        } else {
            s
        }
    }
}

/// A PQ layer with quantized prototypes and table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedRuntime {
    pub layer: LayerSpec,
    pub config: PQConfig,
    pub layout: SubspaceLayout,
    pub scheme: QuantScheme,
    /// Prototype/input parameters per subspace (shared entries are repeated
    /// for coarser granularities).
    pub proto_params: Vec<QuantParams>,
    /// Prototype codes, `[subspace][prototype][element]`.
    pub proto_codes: Vec<u32>,
    /// Table parameters per subspace.
    pub lut_params: Vec<QuantParams>,
    /// Table codes, `[out_channel][subspace][prototype]`.
    pub lut_codes: Vec<u32>,
    pub accumulator: Accumulator16,
}

impl QuantizedRuntime {
    fn n_p(&self) -> usize {
        self.config.n_p
    }

    pub fn proto_code(&self, n: usize, p: usize) -> &[u32] {
        let l_s = self.layout.l_s;
        let start = (n * self.n_p() + p) * l_s;
        &self.proto_codes[start..start + l_s]
    }

    #[inline]
    pub fn lut_code(&self, o: usize, n: usize, p: usize) -> u32 {
        self.lut_codes[(o * self.layout.n_s + n) * self.n_p() + p]
    }

    /// Dequantized table.
    pub fn dequantized_lut(&self) -> Result<LutPQ> {
        let (c_out, n_s, n_p) = (self.layer.c_out, self.layout.n_s, self.n_p());
        let mut values = Vec::with_capacity(c_out * n_s * n_p);
        for o in 0..c_out {
            for n in 0..n_s {
                for p in 0..n_p {
                    values.push(self.lut_params[n].dequantize(self.lut_code(o, n, p)));
                }
            }
        }
        LutPQ::new(c_out, n_s, n_p, values)
    }

    /// Elementwise output error bound versus the float layer, valid when
    /// both paths select the same prototypes, the table was calibrated on
    /// its full range and nothing saturates.
    pub fn output_error_bound(&self) -> f64 {
        let step = self.accumulator.step();
        self.lut_params.iter().map(|p| p.scale / 2.0 + step / 2.0).sum()
    }

    /// The distinct parameter sets actually stored for prototypes.
    pub fn stored_proto_params(&self) -> &[QuantParams] {
        match self.scheme.granularity {
            Granularity::PerSubspace => &self.proto_params,
            _ => &self.proto_params[..1],
        }
    }

    pub fn stored_lut_params(&self) -> &[QuantParams] {
        match self.scheme.granularity {
            Granularity::PerSubspace => &self.lut_params,
            _ => &self.lut_params[..1],
        }
    }
}

/// Values each calibration scope sees: per layer, per subspace.
struct ScopeValues {
    proto: Vec<Vec<f64>>,
    lut: Vec<Vec<f64>>,
}

fn scope_values(rt: &PQLayerRuntime, calib: &Matrix) -> Result<ScopeValues> {
    let layout = rt.layout();
    if calib.rows() != layout.a && calib.rows() != layout.padded_rows() {
        return shape_err(format!(
            "calibration inputs for '{}' have {} rows, expected {}",
            rt.layer().name,
            calib.rows(),
            layout.a
        ));
    }
    let mut proto = Vec::with_capacity(layout.n_s);
    let mut lut = Vec::with_capacity(layout.n_s);
    for n in 0..layout.n_s {
        let mut v = rt.bank().subspace(n).to_vec();
        for r in layout.real_rows(n) {
            v.extend_from_slice(calib.row(r));
        }
        proto.push(v);
        lut.push(rt.lut().subspace_values(n).collect());
    }
    Ok(ScopeValues { proto, lut })
}

fn params_per_subspace(
    scopes: &[ScopeValues],
    pick: impl Fn(&ScopeValues) -> &Vec<Vec<f64>>,
    bits: u32,
    scheme: &QuantScheme,
) -> Result<Vec<Vec<QuantParams>>> {
    match scheme.granularity {
        Granularity::PerSubspace => scopes
            .iter()
            .map(|s| pick(s).iter().map(|v| calibrate(v, bits, scheme.calibration)).collect())
            .collect(),
        Granularity::PerLayer => scopes
            .iter()
            .map(|s| {
                let all: Vec<f64> = pick(s).concat();
                let p = calibrate(&all, bits, scheme.calibration)?;
                Ok(vec![p; pick(s).len()])
            })
            .collect(),
        Granularity::Global => {
            let all: Vec<f64> = scopes.iter().flat_map(|s| pick(s).concat()).collect();
            let p = calibrate(&all, bits, scheme.calibration)?;
            Ok(scopes.iter().map(|s| vec![p; pick(s).len()]).collect())
        }
    }
}

/// Quantizes several PQ layers together; `Global` granularity pools
/// calibration values across all of them.
pub fn quantize_model(runtimes: &[&PQLayerRuntime], calib: &[&Matrix], scheme: &QuantScheme) -> Result<Vec<QuantizedRuntime>> {
    scheme.validate()?;
    if runtimes.len() != calib.len() {
        return shape_err("one calibration matrix per layer is required");
    }
    let scopes = runtimes
        .iter()
        .zip(calib)
        .map(|(rt, c)| scope_values(rt, c))
        .collect::<Result<Vec<_>>>()?;
    let proto_params = params_per_subspace(&scopes, |s| &s.proto, scheme.proto_bits, scheme)?;
    let lut_params = params_per_subspace(&scopes, |s| &s.lut, scheme.lut_bits, scheme)?;

    let mut out = Vec::with_capacity(runtimes.len());
    for ((rt, calib), (pp, lp)) in runtimes.iter().zip(calib).zip(proto_params.into_iter().zip(lut_params)) {
        let layout = *rt.layout();
        let (n_p, l_s) = (rt.config().n_p, layout.l_s);
        let mut proto_codes = Vec::with_capacity(layout.n_s * n_p * l_s);
        for (n, params) in pp.iter().enumerate() {
            proto_codes.extend(rt.bank().subspace(n).iter().map(|v| params.quantize(*v)));
        }
        let lut = rt.lut();
        let mut lut_codes = Vec::with_capacity(lut.values().len());
        for o in 0..lut.c_out() {
            for (n, params) in lp.iter().enumerate() {
                for p in 0..n_p {
                    lut_codes.push(params.quantize(lut.get(o, n, p)));
                }
            }
        }
        let accumulator = Accumulator16::for_magnitude(partial_sum_magnitude(rt, calib)?);
        out.push(QuantizedRuntime {
            layer: rt.layer().clone(),
            config: *rt.config(),
            layout,
            scheme: *scheme,
            proto_params: pp,
            proto_codes,
            lut_params: lp,
            lut_codes,
            accumulator,
        });
    }
    Ok(out)
}

pub fn quantize_runtime(rt: &PQLayerRuntime, scheme: &QuantScheme, calib: &Matrix) -> Result<QuantizedRuntime> {
    Ok(quantize_model(&[rt], &[calib], scheme)?.remove(0))
}

/// Largest running-sum magnitude of the float layer on calibration data,
/// including single table entries.
fn partial_sum_magnitude(rt: &PQLayerRuntime, calib: &Matrix) -> Result<f64> {
    let lut = rt.lut();
    let mut max_abs = lut.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if calib.cols() > 0 {
        let enc = rt.encode(calib)?;
        for o in 0..lut.c_out() {
            for j in 0..enc.cols {
                let mut acc = 0.0f64;
                for n in 0..lut.n_s() {
                    acc += lut.get(o, n, enc.index(n, j));
                    max_abs = max_abs.max(acc.abs());
                }
            }
        }
    }
    Ok(max_abs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedOutput {
    /// Dequantized accumulator values, `c_out × cols`.
    pub output: Matrix,
    /// Selected prototype per `[subspace][column]`.
    pub indices: Vec<u32>,
    pub saturations: u64,
}

/// Integer-domain distance between input codes and prototype codes.
#[inline]
fn code_distance(metric: Metric, x: &[i64], b: &[u32]) -> i64 {
    match metric {
        Metric::L2Squared => x
            .iter()
            .zip(b)
            .map(|(x, b)| {
                let d = x - *b as i64;
                d * d
            })
            .sum(),
        Metric::L1 => x.iter().zip(b).map(|(x, b)| (x - *b as i64).abs()).sum(),
    }
}

/// Quantized PQ layer execution.
pub fn quantized_pq_forward(x: &Matrix, qrt: &QuantizedRuntime) -> Result<QuantizedOutput> {
    let layout = &qrt.layout;
    if x.rows() != layout.a && x.rows() != layout.padded_rows() {
        return shape_err(format!(
            "unrolled input has {} rows, expected {}",
            x.rows(),
            layout.a
        ));
    }
    let (n_s, n_p, l_s, c_out, cols) = (layout.n_s, qrt.config.n_p, layout.l_s, qrt.layer.c_out, x.cols());
    let acc_fmt = qrt.accumulator;
    let mut saturations = 0u64;

    let mut indices = vec![0u32; n_s * cols];
    let mut buf = vec![0.0; l_s];
    let mut codes = vec![0i64; l_s];
    for n in 0..n_s {
        let params = &qrt.proto_params[n];
        for j in 0..cols {
            gather_subvector(x, l_s, n, j, &mut buf);
            for (c, v) in codes.iter_mut().zip(&buf) {
                *c = params.quantize(*v) as i64;
            }
            let mut best = (i64::MAX, 0usize);
            for p in 0..n_p {
                let d = code_distance(qrt.config.metric, &codes, qrt.proto_code(n, p));
                if d < best.0 {
                    best = (d, p);
                }
            }
            indices[n * cols + j] = best.1 as u32;
        }
    }

    // dequantized table entries in accumulator units; an entry that does
    // not fit counts as a saturation every time it is read
    let mut units = vec![0i64; c_out * n_s * n_p];
    let mut clipped = vec![false; c_out * n_s * n_p];
    for o in 0..c_out {
        for n in 0..n_s {
            for p in 0..n_p {
                let k = (o * n_s + n) * n_p + p;
                let mut sat = 0;
                units[k] = acc_fmt.to_units(qrt.lut_params[n].dequantize(qrt.lut_code(o, n, p)), &mut sat);
                clipped[k] = sat > 0;
            }
        }
    }

    let mut out = Matrix::zeros(c_out, cols);
    for o in 0..c_out {
        for j in 0..cols {
            let mut acc = 0i64;
            for n in 0..n_s {
                let k = (o * n_s + n) * n_p + indices[n * cols + j] as usize;
                saturations += u64::from(clipped[k]);
                acc = acc_fmt.add(acc, units[k], &mut saturations);
            }
            out.set(o, j, acc as f64 * acc_fmt.step());
        }
    }
    Ok(QuantizedOutput {
        output: out,
        indices,
        saturations,
    })
}

/// Largest possible elementwise difference between the quantized and float
/// outputs of a layer on `x`, including prototype choices that input and
/// prototype rounding could flip. Valid when nothing saturates and neither
/// inputs nor table entries fall outside their calibrated ranges.
pub fn divergence_bound(x: &Matrix, rt: &PQLayerRuntime, qrt: &QuantizedRuntime) -> Result<f64> {
    let layout = rt.layout();
    let metric = rt.config().metric;
    let enc = crate::encoder::encode_hard_with_distances(x, rt.bank(), layout, metric)?;
    let (n_s, n_p, l_s, cols) = (layout.n_s, rt.config().n_p, layout.l_s, x.cols());
    let lut = rt.lut();
    let step = qrt.accumulator.step();
    let mut buf = vec![0.0; l_s];
    // per (subspace, column): the prototypes the quantized search may pick
    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(n_s * cols);
    for n in 0..n_s {
        let s = qrt.proto_params[n].scale;
        for j in 0..cols {
            gather_subvector(x, l_s, n, j, &mut buf);
            let d = enc.distances_at(n, j).expect("distances kept");
            let best = enc.index(n, j);
            let slack = |p: usize| distance_perturbation_bound(&buf, rt.bank().prototype(n, p), s, metric);
            let b_best = slack(best);
            candidates.push((0..n_p).filter(|&p| p == best || d[p] - d[best] <= slack(p) + b_best).collect());
        }
    }
    let mut worst = 0.0f64;
    for o in 0..lut.c_out() {
        for j in 0..cols {
            let mut total = 0.0;
            for n in 0..n_s {
                let best = enc.index(n, j);
                let flip = candidates[n * cols + j]
                    .iter()
                    .map(|&p| (lut.get(o, n, p) - lut.get(o, n, best)).abs())
                    .fold(0.0, f64::max);
                total += qrt.lut_params[n].scale / 2.0 + step / 2.0 + flip;
            }
            worst = worst.max(total);
        }
    }
    Ok(worst)
}

/// Re-quantizes a layer output with the next layer's input parameters.
pub fn requantize(y: &Matrix, params: &QuantParams) -> Vec<u32> {
    y.as_slice().iter().map(|v| params.quantize(*v)).collect()
}

/// Upper bound on how far the integer-domain distance (rescaled to real
/// units) can move from the float distance between `x` and `b` when both
/// are rounded with step `scale`. Assumes no clamping.
pub fn distance_perturbation_bound(x: &[f64], b: &[f64], scale: f64, metric: Metric) -> f64 {
    match metric {
        Metric::L2Squared => x.iter().zip(b).map(|(x, b)| scale * (2.0 * (x - b).abs() + scale)).sum(),
        Metric::L1 => scale * x.len() as f64,
    }
}

/// Rescales an integer code distance to real distance units.
pub fn code_distance_to_real(d: i64, scale: f64, metric: Metric) -> f64 {
    match metric {
        Metric::L2Squared => d as f64 * scale * scale,
        Metric::L1 => d as f64 * scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_range_byte() {
        let p = calibrate(&[0.0, 255.0], 8, Calibration::FullRange).unwrap();
        assert_eq!((p.scale, p.zero_point), (1.0, 0));
        assert_eq!(p.quantize(0.0), 0);
        assert_eq!(p.quantize(255.0), 255);
    }

    #[test]
    fn constant_round_trip_exact() {
        for c in [0.0, 0.3, -7.25, 1e6] {
            for bits in [2, 5, 16] {
                let p = calibrate(&[c, c, c], bits, Calibration::FullRange).unwrap();
                assert_eq!(p.dequantize(p.quantize(c)), c);
                let q = calibrate(&[c; 4], bits, Calibration::percentile_default()).unwrap();
                assert_eq!(q.dequantize(q.quantize(c)), c);
            }
        }
    }

    #[test]
    fn percentile_range() {
        let v: Vec<f64> = (0..=100).map(|x| x as f64).collect();
        let p = calibrate(&v, 8, Calibration::percentile_default()).unwrap();
        assert!((p.min - 30.0).abs() <= 1.0);
        assert!((p.max - 70.0).abs() <= 1.0);
    }

    #[test]
    fn hand_example() {
        let p = QuantParams { scale: 0.5, zero_point: 4, bits: 8, min: -2.0, max: 125.5 };
        assert_eq!(p.quantize(1.0), 6);
        assert_eq!(p.dequantize(6), 1.0);
        assert_eq!(p.quantize(1e9), 255);
        assert_eq!(p.quantize(-1e9), 0);
    }

    #[test]
    fn range_endpoint_codes() {
        let p = calibrate(&[10.0, 12.5, 20.0], 8, Calibration::FullRange).unwrap();
        assert_eq!(p.quantize(10.0), 0);
        assert_eq!(p.quantize(20.0), 255);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(calibrate(&[], 8, Calibration::FullRange).is_err());
        assert!(calibrate(&[1.0], 1, Calibration::FullRange).is_err());
        assert!(calibrate(&[1.0], 17, Calibration::FullRange).is_err());
        let s = QuantScheme {
            granularity: Granularity::PerLayer,
            calibration: Calibration::Percentile { lo_pct: 70.0, hi_pct: 30.0 },
            proto_bits: 8,
            lut_bits: 8,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn accumulator_saturates() {
        let acc = Accumulator16 { frac_bits: 0 };
        let mut sat = 0;
        assert_eq!(acc.add(32000, 1000, &mut sat), Accumulator16::MAX);
        assert_eq!(acc.add(-32000, -1000, &mut sat), Accumulator16::MIN);
        assert_eq!(sat, 2);
        assert_eq!(acc.to_units(1e9, &mut sat), Accumulator16::MAX);
        assert_eq!(sat, 3);
        let f = Accumulator16::for_magnitude(100.0);
        assert!(200.0 / f.step() <= Accumulator16::MAX as f64);
        assert!(400.0 / f.step() > Accumulator16::MAX as f64);
    }

    proptest! {
        #[test]
        fn round_trip_within_half_step(
            vals in proptest::collection::vec(-1e3f64..1e3, 2..50),
            x in -2e3f64..2e3,
            bits in 2u32..=16,
            pct in proptest::bool::ANY,
        ) {
            let cal = if pct { Calibration::percentile_default() } else { Calibration::FullRange };
            let p = calibrate(&vals, bits, cal).unwrap();
            let err = (p.dequantize(p.quantize(x)) - p.clamp_to_range(x)).abs();
            prop_assert!(err <= p.scale / 2.0 * (1.0 + 1e-9), "err {} scale {}", err, p.scale);
        }

        #[test]
        fn more_bits_never_coarser(vals in proptest::collection::vec(-50f64..50.0, 2..40)) {
            let mut prev = f64::INFINITY;
            for bits in MIN_BITS..=MAX_BITS {
                let p = calibrate(&vals, bits, Calibration::FullRange).unwrap();
                prop_assert!(p.error_bound() <= prev);
                prev = p.error_bound();
            }
        }
    }
}
