//! TOML model descriptions: an ordered chain of layers with optional PQ
//! settings.
//!
//! ```toml
//! name = "tiny"
//! [pq]
//! l_s = 9
//! n_p = 16
//!
//! [[layer]]
//! name = "conv1"
//! kind = "conv"
//! c_in = 3
//! c_out = 16
//! kernel = 3
//! in_h = 32
//! in_w = 32
//! pq_enabled = true
//! activation = "relu"
//! ```

use std::path::Path;

use pqa_core::inference::Activation;
use pqa_core::{LayerKind, LayerSpec, Metric, PQConfig};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::zoo;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PqDefaults {
    l_s: Option<usize>,
    n_p: Option<usize>,
    metric: Option<Metric>,
    tau: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    name: String,
    kind: LayerKind,
    c_in: usize,
    c_out: usize,
    kernel: Option<usize>,
    k_h: Option<usize>,
    k_w: Option<usize>,
    #[serde(default = "one")]
    stride: usize,
    groups: Option<usize>,
    in_h: Option<usize>,
    in_w: Option<usize>,
    #[serde(default)]
    pq_enabled: bool,
    l_s: Option<usize>,
    n_p: Option<usize>,
    metric: Option<Metric>,
    tau: Option<f64>,
    #[serde(default)]
    activation: Activation,
    #[serde(default)]
    bias: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    #[serde(default)]
    pq: PqDefaults,
    layer: Vec<LayerEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayer {
    pub spec: LayerSpec,
    /// Resolved PQ settings; `None` when the layer is dense or the file
    /// leaves `l_s`/`n_p` unspecified.
    pub pq: Option<PQConfig>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub layers: Vec<ModelLayer>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

impl ModelSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| bad(format!("model spec: {e}")))?;
        if file.layer.is_empty() {
            return Err(bad("model spec has no layers"));
        }
        let mut layers = Vec::with_capacity(file.layer.len());
        for e in file.layer {
            layers.push(resolve_layer(e, &file.pq)?);
        }
        let spec = Self { name: file.name, layers };
        spec.check_chain()?;
        Ok(spec)
    }

    /// Loads a bundled zoo model by name, or a spec file by path.
    pub fn load(name_or_path: &str) -> CliResult<Self> {
        if let Some(text) = zoo::get(name_or_path) {
            return Self::parse(text);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Data(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies uniform PQ settings to every PQ-enabled layer.
    pub fn with_uniform_pq(mut self, l_s: Option<usize>, n_p: Option<usize>, metric: Option<Metric>) -> Self {
        for layer in self.layers.iter_mut().filter(|l| l.spec.pq_enabled) {
            let base = layer.pq;
            let l = l_s.or(base.map(|c| c.l_s));
            let n = n_p.or(base.map(|c| c.n_p));
            if let (Some(l), Some(n)) = (l, n) {
                let mut cfg = PQConfig::new(n, l);
                cfg.tau = base.map_or(1.0, |c| c.tau);
                cfg.metric = metric.or(base.map(|c| c.metric)).unwrap_or_default();
                layer.pq = Some(cfg);
            }
        }
        self
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn pq_configs(&self) -> Vec<Option<PQConfig>> {
        self.layers
            .iter()
            .map(|l| if l.spec.pq_enabled { l.pq } else { None })
            .collect()
    }

    pub fn pq_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.spec.pq_enabled).count()
    }

    pub fn dense_params(&self) -> usize {
        self.layers.iter().map(|l| l.spec.dense_params()).sum()
    }

    pub fn dense_flops(&self) -> usize {
        self.layers.iter().map(|l| l.spec.dense_flops()).sum()
    }

    /// Input shape `(channels, height, width)` of the first layer.
    pub fn input_shape(&self) -> (usize, usize, usize) {
        let s = &self.layers[0].spec;
        (s.c_in, s.in_h, s.in_w)
    }

    /// PQ config of every enabled layer, or an error naming the first layer
    /// without one.
    pub fn require_pq(&self) -> CliResult<()> {
        match self.layers.iter().find(|l| l.spec.pq_enabled && l.pq.is_none()) {
            Some(l) => Err(CliError::Usage(format!(
                "layer '{}' is PQ-enabled but has no l_s/n_p",
                l.spec.name
            ))),
            None => Ok(()),
        }
    }

    fn check_chain(&self) -> CliResult<()> {
        for w in self.layers.windows(2) {
            let (prev, next) = (&w[0].spec, &w[1].spec);
            let out = (prev.c_out, prev.out_h(), prev.out_w());
            let ok = out == (next.c_in, next.in_h, next.in_w)
                || (next.kind == LayerKind::Linear && (out.0 == next.c_in || out.0 * out.1 * out.2 == next.c_in));
            if !ok {
                return Err(bad(format!(
                    "layer '{}' expects {}x{}x{} but '{}' produces {}x{}x{}",
                    next.name, next.c_in, next.in_h, next.in_w, prev.name, out.0, out.1, out.2
                )));
            }
        }
        Ok(())
    }
}

fn resolve_layer(e: LayerEntry, defaults: &PqDefaults) -> CliResult<ModelLayer> {
    let (k_h, k_w) = match (e.kernel, e.k_h, e.k_w) {
        (Some(k), None, None) => (k, k),
        (None, Some(h), Some(w)) => (h, w),
        (None, None, None) if e.kind == LayerKind::Linear || e.kind == LayerKind::Pointwise => (1, 1),
        _ => {
            return Err(bad(format!(
                "layer '{}': give either `kernel` or both `k_h` and `k_w`",
                e.name
            )))
        }
    };
    let groups = e.groups.unwrap_or(if e.kind == LayerKind::Depthwise { e.c_in } else { 1 });
    let spec = LayerSpec {
        name: e.name.clone(),
        kind: e.kind,
        c_in: e.c_in,
        c_out: e.c_out,
        k_h,
        k_w,
        stride: e.stride,
        groups,
        in_h: e.in_h.unwrap_or(1),
        in_w: e.in_w.unwrap_or(1),
        pq_enabled: e.pq_enabled,
        bias: e.bias,
    };
    spec.validate().map_err(|err| bad(format!("layer '{}': {err}", e.name)))?;
    let pq = match (e.l_s.or(defaults.l_s), e.n_p.or(defaults.n_p)) {
        (Some(l_s), Some(n_p)) if e.pq_enabled => {
            let mut cfg = PQConfig::new(n_p, l_s).with_metric(e.metric.or(defaults.metric).unwrap_or_default());
            cfg.tau = e.tau.or(defaults.tau).unwrap_or(1.0);
            cfg.validate().map_err(|err| bad(format!("layer '{}': {err}", e.name)))?;
            Some(cfg)
        }
        _ => None,
    };
    Ok(ModelLayer {
        spec,
        pq,
        activation: e.activation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
name = "tiny"
[pq]
l_s = 4
n_p = 8

[[layer]]
name = "c1"
kind = "conv"
c_in = 2
c_out = 4
kernel = 3
in_h = 6
in_w = 6
pq_enabled = true
activation = "relu"

[[layer]]
name = "fc"
kind = "linear"
c_in = 4
c_out = 3
bias = true
"#;

    #[test]
    fn parses_and_resolves() {
        let m = ModelSpec::parse(TINY).unwrap();
        assert_eq!(m.layers.len(), 2);
        assert_eq!(m.layers[0].pq, Some(PQConfig::new(8, 4)));
        assert_eq!(m.layers[1].pq, None);
        assert_eq!(m.dense_params(), 2 * 9 * 4 + 4 * 3 + 3);
        assert_eq!(m.input_shape(), (2, 6, 6));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = TINY.replace("bias = true", "bias = true\ncolour = 3");
        assert!(ModelSpec::parse(&text).is_err());
    }

    #[test]
    fn rejects_broken_chain() {
        let text = TINY.replace("c_in = 4\nc_out = 3", "c_in = 5\nc_out = 3");
        let err = ModelSpec::parse(&text).unwrap_err();
        assert!(err.to_string().contains("fc"));
    }

    #[test]
    fn uniform_override() {
        let m = ModelSpec::parse(TINY).unwrap().with_uniform_pq(Some(9), None, Some(Metric::L1));
        let cfg = m.layers[0].pq.unwrap();
        assert_eq!((cfg.l_s, cfg.n_p, cfg.metric), (9, 8, Metric::L1));
    }

    #[test]
    fn missing_pq_names_layer() {
        let text = TINY.replace("[pq]\nl_s = 4\nn_p = 8\n", "");
        let m = ModelSpec::parse(&text).unwrap();
        assert!(m.require_pq().unwrap_err().to_string().contains("c1"));
    }
}
