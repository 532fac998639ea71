//! The canonical-basis loading makes alpha* exactly K-sparse, which is the
//! lasso's home turf; the min-norm fit stays competitive anyway.
//!
//! Run with: cargo run --release --example sparse_recovery

use frlab::experiments::config::{
    CvConfig, Design, EstimatorSpec, ExperimentConfig, GridPoint, GridSpec,
};
use frlab::experiments::run_sweep;
use frlab::experiments::sweep::build_model;

fn main() -> frlab::Result<()> {
    let mut config = ExperimentConfig::preset(Design::Figure4)?;
    let point = GridPoint { k: 8, n: 64, p: 640 };
    config.grid = GridSpec::Points(vec![point]);
    config.replicates = 8;
    config.estimators = vec![
        EstimatorSpec::MinNorm,
        EstimatorSpec::PcrStylized { k: None },
        EstimatorSpec::LassoCv {
            cv: CvConfig {
                grid_points: 15,
                ..CvConfig::default()
            },
        },
        EstimatorSpec::Null,
    ];

    // alpha* itself: sqrt(p)/(p + 1) on the first K coordinates, zero after.
    let model = build_model(&config, &point, 0, 0)?;
    let summary = model.population_summary()?;
    println!(
        "alpha*[0..10] = {:?}",
        &summary.alpha_star[..10]
            .iter()
            .map(|v| (v * 1e4).round() / 1e4)
            .collect::<Vec<_>>()
    );
    println!(
        "expected head value sqrt(p)/(p+1) = {:.4}\n",
        (point.p as f64).sqrt() / (point.p as f64 + 1.0)
    );

    let result = run_sweep(&config)?;
    println!("mean excess risk at gamma = 10:");
    for tag in ["lasso", "pcr_stylized", "min_norm", "null"] {
        let vals: Vec<f64> = result
            .rows
            .iter()
            .filter(|r| r.estimator == tag)
            .map(|r| r.excess_vs_oracle)
            .collect();
        println!(
            "  {:<14}{:.3}",
            tag,
            vals.iter().sum::<f64>() / vals.len() as f64
        );
    }
    Ok(())
}
