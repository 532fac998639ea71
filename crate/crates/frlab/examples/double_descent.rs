//! A desk-scale double-descent curve: the excess risk of the min-norm
//! interpolator peaks at gamma = p/n = 1 and descends again beyond it.
//!
//! Run with: cargo run --release --example double_descent
//! (writes out/example_double_descent/ with CSV and SVG artifacts)

use frlab::experiments::config::{Design, ExperimentConfig, GridRule, GridSpec};
use frlab::experiments::{emit_csv, emit_svg_plot, run_sweep, PlotOptions};

fn main() -> frlab::Result<()> {
    // A lighter version of the scaled-orthogonal design: smaller K range and
    // fewer replicates than the full preset, same shape of curve.
    let mut config = ExperimentConfig::preset(Design::Figure1)?;
    config.grid = GridSpec::Rule(GridRule {
        k_min: 8,
        k_max: 24,
        gamma_min: 0.4,
        gamma_max: 6.0,
        points: 16,
    });
    config.replicates = 10;

    let result = run_sweep(&config)?;

    println!("gamma     mean excess risk of the min-norm fit");
    let mut by_gamma: Vec<(f64, Vec<f64>)> = Vec::new();
    for row in result.rows.iter().filter(|r| r.estimator == "min_norm") {
        match by_gamma.iter_mut().find(|(g, _)| *g == row.gamma) {
            Some((_, v)) => v.push(row.excess_vs_oracle),
            None => by_gamma.push((row.gamma, vec![row.excess_vs_oracle])),
        }
    }
    for (gamma, vals) in &by_gamma {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let bar = "#".repeat(((mean.log10() + 2.0).max(0.0) * 12.0) as usize);
        println!("{gamma:6.2}    {mean:9.3}  {bar}");
    }

    let out = std::path::Path::new("out/example_double_descent");
    emit_csv(&result, &out.join("sweep.csv"))?;
    emit_svg_plot(&result, &out.join("sweep.svg"), &PlotOptions::default())?;
    println!("\nartifacts in {}", out.display());
    Ok(())
}
