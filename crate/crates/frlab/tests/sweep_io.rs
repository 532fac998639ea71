//! End-to-end sweep determinism and artifact IO.

use std::process::Command;

use frlab::experiments::config::{
    BetaKind, Design, EstimatorSpec, EvalMode, FactorCovKind, GridPoint, GridSpec, LoadingKind,
    NoiseCovKind,
};
use frlab::experiments::output::{parse_sweep_csv, render_bounds_csv, render_sweep_csv};
use frlab::experiments::{run_sweep, ExperimentConfig};
use frlab::sampling::NoiseLaw;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        design: Design::Custom,
        grid: GridSpec::Points(vec![
            GridPoint { k: 2, n: 10, p: 30 },
            GridPoint { k: 3, n: 12, p: 24 },
        ]),
        loading_kind: LoadingKind::ScaledOrthogonal,
        noise_law: NoiseLaw::Gaussian,
        sigma_z_kind: FactorCovKind::Identity,
        sigma_e_kind: NoiseCovKind::Isotropic { variance: 1.0 },
        beta_kind: BetaKind::AllOnes,
        sigma_eps: 1.0,
        estimators: vec![
            EstimatorSpec::MinNorm,
            EstimatorSpec::Ridge { lambda: 0.5 },
            EstimatorSpec::Lasso { lambda: 0.05 },
            EstimatorSpec::Null,
        ],
        replicates: 4,
        redraw_loading_per_replicate: true,
        master_seed: 77,
        eval_mode: EvalMode::ExactPopulationRisk,
        output_dir: "out/test".into(),
    }
}

#[test]
fn csv_is_byte_identical_across_thread_counts() {
    let config = small_config();
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let result = pool.install(|| run_sweep(&config)).unwrap();
        (render_sweep_csv(&result), render_bounds_csv(&result.bounds))
    };
    let (sweep1, bounds1) = render(1);
    let (sweep3, bounds3) = render(3);
    assert_eq!(sweep1, sweep3);
    assert_eq!(bounds1, bounds3);
}

#[test]
fn csv_round_trips_bit_exactly() {
    let config = small_config();
    let result = run_sweep(&config).unwrap();
    let text = render_sweep_csv(&result);
    let parsed = parse_sweep_csv(&text).unwrap();
    assert_eq!(parsed.len(), result.rows.len());
    for (a, b) in parsed.iter().zip(&result.rows) {
        assert_eq!(a.risk.to_bits(), b.risk.to_bits());
        assert_eq!(a.gamma.to_bits(), b.gamma.to_bits());
        assert_eq!(a.interp_residual.to_bits(), b.interp_residual.to_bits());
        assert_eq!(a.estimator, b.estimator);
    }
}

#[test]
fn seed_changes_rows_but_structure_is_stable() {
    let mut config = small_config();
    let a = run_sweep(&config).unwrap();
    config.master_seed = 78;
    let b = run_sweep(&config).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    assert_ne!(
        render_sweep_csv(&a),
        render_sweep_csv(&b),
        "different seeds must produce different draws"
    );
}

/// The CLI surface end to end: preset run with artifacts, config rejection
/// diagnostics, and exit codes.
#[test]
fn cli_preset_and_bad_config() {
    let bin = env!("CARGO_BIN_EXE_frlab");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // A tiny custom sweep through the sweep subcommand.
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, small_config().to_json()).unwrap();
    let status = Command::new(bin)
        .args([
            "sweep",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            "2",
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{status:?}");
    for artifact in ["sweep.csv", "bounds.csv", "sweep.svg", "config.json"] {
        assert!(out.join(artifact).exists(), "{artifact} missing");
    }
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(parse_sweep_csv(&text).unwrap().len(), 2 * 4 * 4);

    // Reruns are byte-identical.
    let out2 = dir.path().join("rerun");
    let status = Command::new(bin)
        .args([
            "sweep",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert!(status.status.success());
    let text2 = std::fs::read_to_string(out2.join("sweep.csv")).unwrap();
    assert_eq!(text, text2);

    // Malformed config: exit 2 and a diagnostic naming the offending field.
    let bad_path = dir.path().join("bad.json");
    let bad = small_config().to_json().replacen(
        "\"replicates\"",
        "\"replicate_count\"",
        1,
    );
    std::fs::write(&bad_path, bad).unwrap();
    let output = Command::new(bin)
        .args([
            "sweep",
            "--config",
            bad_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("replicate_count"), "{stderr}");

    // Unknown subcommand: usage and exit 2.
    let output = Command::new(bin).args(["frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn cli_nullrisk_preset_scaled_down() {
    let bin = env!("CARGO_BIN_EXE_frlab");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nullrisk");
    let output = Command::new(bin)
        .args([
            "preset",
            "nullrisk",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "3",
            "--threads",
            "2",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows = parse_sweep_csv(&text).unwrap();
    // 3 grid points x 20 replicates x 2 estimators.
    assert_eq!(rows.len(), 120);
    // The ratio to the null risk approaches 1 as p grows.
    let mean_dev = |p: usize| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.estimator == "min_norm" && r.p == p)
            .map(|r| (r.risk / r.null_risk - 1.0).abs())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_dev(5000) < mean_dev(500));
}
