//! When the covariance has no low-dimensional signal (Sigma_X = I_p) and
//! its effective rank dwarfs n, the min-norm risk collapses onto the null
//! risk at the sqrt(n / r_e) rate.
//!
//! Run with: cargo run --release --example null_risk_collapse

use frlab::bounds::null_ratio_bound;
use frlab::experiments::config::Design;
use frlab::experiments::sweep::build_model;
use frlab::experiments::{run_sweep, ExperimentConfig, GridPoint};

fn main() -> frlab::Result<()> {
    let config = ExperimentConfig::preset(Design::NullRisk)?;
    let result = run_sweep(&config)?;

    println!("p      mean |R(a)/R(0) - 1|    sqrt(n / r_e(Sigma_X))");
    for p in [500usize, 2500, 5000] {
        let devs: Vec<f64> = result
            .rows
            .iter()
            .filter(|r| r.estimator == "min_norm" && r.p == p)
            .map(|r| (r.risk / r.null_risk - 1.0).abs())
            .collect();
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let model = build_model(&config, &GridPoint { k: 1, n: 50, p }, 0, 0)?;
        let rate = null_ratio_bound(50, &model.population_summary()?);
        println!("{p:<6} {mean:^22.4} {:^24.4}", rate.value);
    }
    println!();
    println!("Interpolating pure noise is no better than predicting zero; the");
    println!("deviation from the null risk shrinks like the rate above.");
    Ok(())
}
