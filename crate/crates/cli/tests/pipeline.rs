//! End-to-end runs of the command pipeline.

use std::path::{Path, PathBuf};

use pqa_cli::commands;
use pqa_cli::config::{RunConfig, Settings};
use pqa_cli::modelspec::ModelSpec;
use pqa_core::perfmodel::{network_report, HwConfig, MemoryKind};

const TINY: &str = r#"
name = "tiny"

[[layer]]
name = "mix"
kind = "pointwise"
c_in = 2
c_out = 3
in_h = 2
in_w = 2
pq_enabled = true
l_s = 1
n_p = 4
"#;

const DENSE_ONLY: &str = r#"
name = "dense"

[[layer]]
name = "fc"
kind = "linear"
c_in = 4
c_out = 2
"#;

fn settings(c: RunConfig) -> Settings {
    c.resolve().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_cli(args: &[&str]) -> i32 {
    pqa_cli::run(std::iter::once("pqa").chain(args.iter().copied()))
}

#[test]
fn resnet20_fit_writes_a_bank_and_table_per_pq_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let s = settings(RunConfig {
        model: Some("resnet20".into()),
        out: Some(tmp.path().into()),
        num_samples: Some(1),
        max_columns: Some(256),
        max_iters: Some(3),
        ..Default::default()
    });
    let r = commands::fit::run(&s).unwrap();
    assert_eq!(r.rows.len(), 18);
    let count = |suffix: &str| {
        std::fs::read_dir(tmp.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(suffix))
            .count()
    };
    assert_eq!(count(".bank.pqt"), 18);
    assert_eq!(count(".lut.pqt"), 18);
    assert_eq!(count(".weights.pqt"), 20);
    assert!(tmp.path().join("fit_report.csv").exists());
}

#[test]
fn lossless_prototypes_give_exact_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("art");
    let base = RunConfig {
        model: Some(model.to_string_lossy().into()),
        num_samples: Some(1),
        seed: Some(3),
        ..Default::default()
    };
    let fit = commands::fit::run(&settings(RunConfig { out: Some(out.clone()), ..base.clone() })).unwrap();
    assert_eq!(fit.rows.len(), 1);
    assert!(fit.rows[0].mse_out < 1e-20);

    let ev = commands::eval::run(&settings(RunConfig {
        artifacts: Some(out.clone()),
        out: Some(tmp.path().join("ev")),
        quantize: Some(true),
        proto_bits: Some(8),
        lut_bits: Some(8),
        ..base
    }))
    .unwrap();
    assert!(ev.layers[0].report.mse_out < 1e-20);
    assert!(ev.network.max_abs_err < 1e-9);
    let q = ev.layers[0].quant.unwrap();
    assert_eq!(q.saturations, 0);
    assert!(q.max_diff <= q.bound * (1.0 + 1e-9), "{} > {}", q.max_diff, q.bound);
}

#[test]
fn quantize_writes_codes_and_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "tiny.toml", TINY);
    let art = tmp.path().join("art");
    let base = RunConfig {
        model: Some(model.to_string_lossy().into()),
        num_samples: Some(2),
        ..Default::default()
    };
    commands::fit::run(&settings(RunConfig { out: Some(art.clone()), ..base.clone() })).unwrap();
    let q = tmp.path().join("q");
    let r = commands::quantize::run(&settings(RunConfig {
        artifacts: Some(art),
        out: Some(q.clone()),
        proto_bits: Some(8),
        lut_bits: Some(12),
        ..base
    }))
    .unwrap();
    assert_eq!(r.layers.len(), 1);
    for f in ["mix.proto_codes.pqt", "mix.lut_codes.pqt", "quant_params.csv", "quant_layers.csv"] {
        assert!(q.join(f).exists(), "{f}");
    }
}

#[test]
fn unbounded_bandwidth_leaves_only_compute() {
    let m = ModelSpec::load("resnet20").unwrap();
    let hw = HwConfig::default().with_memory(MemoryKind::Custom(1e30));
    let r = network_report(&m.specs(), &m.pq_configs(), &hw).unwrap();
    assert_eq!(r.total_cycles, r.compute_only_cycles());

    let tmp = tempfile::tempdir().unwrap();
    let s = settings(RunConfig {
        model: Some("resnet20".into()),
        out: Some(tmp.path().into()),
        memory: Some("custom:1e30".into()),
        ..Default::default()
    });
    let sim = commands::simulate::run(&s).unwrap();
    assert_eq!(sim.report.total_cycles, r.compute_only_cycles());
    assert!(tmp.path().join("simulate.csv").exists());
    assert!(tmp.path().join("simulate_summary.csv").exists());
}

#[test]
fn simulate_reports_micronet_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let s = settings(RunConfig {
        model: Some("micronet".into()),
        out: Some(tmp.path().into()),
        l_s: Some(4),
        n_p: Some(16),
        baseline_cycles: Some(100_000),
        ..Default::default()
    });
    let sim = commands::simulate::run(&s).unwrap();
    assert!((sim.params_lut_plus_dense as f64 - 212e3).abs() / 212e3 < 0.01);
    assert!(sim.params_lut_plus_protos_plus_dense > sim.params_lut_plus_dense);
    let speedup = sim.speedup.unwrap();
    assert!((speedup - 100_000.0 / sim.report.total_cycles as f64).abs() < 1e-12);
}

#[test]
fn single_cell_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(
        tmp.path(),
        "grid.toml",
        "input_sizes = [8]\nchannels = [16]\nn_p = [16]\nl_s = [8]\nmemories = [\"hbm\"]\n",
    );
    let base = write(tmp.path(), "base.csv", "input_size,channels,cycles\n8,16,5000\n");
    let s = settings(RunConfig {
        out: Some(tmp.path().join("sw")),
        grid: Some(grid),
        baseline_table: Some(base),
        ..Default::default()
    });
    let r = commands::sweep::run(&s).unwrap();
    assert_eq!(r.records.len(), 1);
    let rec = &r.records[0];
    assert_eq!(rec.baseline_cycles, Some(5000));
    assert!((rec.speedup.unwrap() - 5000.0 / rec.cycles.total_cycles as f64).abs() < 1e-12);
    let text = std::fs::read_to_string(&r.csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("memory,n_p,l_s,input_size,channels,kernel,"));
}

#[test]
fn model_without_pq_layers_fits_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "dense.toml", DENSE_ONLY);
    let out = tmp.path().join("art");
    let r = commands::fit::run(&settings(RunConfig {
        model: Some(model.to_string_lossy().into()),
        out: Some(out.clone()),
        ..Default::default()
    }))
    .unwrap();
    assert!(r.rows.is_empty() && r.files.is_empty());
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", "model = \"micronet\"\nmemory = \"hbm\"\nl_s = 8\nn_p = 8\n");
    let out = tmp.path().join("sim");
    let code = run_cli(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--memory",
        "ddr4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = std::fs::read_to_string(out.join("simulate_summary.csv")).unwrap();
    assert!(summary.contains("memory,ddr4"), "{summary}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run_cli(&["zoo", "list"]), 0);
    assert_eq!(run_cli(&["frobnicate"]), 1);
    assert_eq!(run_cli(&["simulate", "--out", out]), 1);
    assert_eq!(run_cli(&["simulate", "--model", "micronet", "--memory", "sram", "--out", out]), 1);
    assert_eq!(run_cli(&["simulate", "--model", "/no/such/model.toml", "--out", out]), 2);
    assert_eq!(run_cli(&["eval", "--model", "micronet", "--artifacts", "/no/such/dir", "--out", out]), 2);

    // a PQ layer without any PQ settings
    let bad = write(
        tmp.path(),
        "bad.toml",
        "name = \"bad\"\n[[layer]]\nname = \"fc\"\nkind = \"linear\"\nc_in = 4\nc_out = 2\npq_enabled = true\n",
    );
    assert_eq!(run_cli(&["simulate", "--model", bad.to_str().unwrap(), "--out", out]), 1);

    // chained layers whose shapes disagree
    let mismatch = write(
        tmp.path(),
        "mismatch.toml",
        "name = \"m\"\n[[layer]]\nname = \"a\"\nkind = \"linear\"\nc_in = 4\nc_out = 3\n\
         [[layer]]\nname = \"b\"\nkind = \"linear\"\nc_in = 5\nc_out = 2\npq_enabled = true\nl_s = 1\nn_p = 2\n",
    );
    assert_eq!(run_cli(&["fit", "--model", mismatch.to_str().unwrap(), "--out", out]), 2);
}
