//! The finite-sample bound calculators: the main excess-risk bound, its
//! pure-variance specialization, the PCR bounds, and the tail-rank
//! quantities (r_k, R_k, K*) used for cross-method comparison.
//!
//! Run with: cargo run --release --example risk_bounds

use frlab::bounds::{
    comparison_bias_variance, tail_rank_kstar, kstar_sandwich_check, main_excess_bound, pcr_bound,
    purevar_bound, SpectrumSummary,
};
use frlab::linalg::DenseMatrix;
use frlab::model::{FactorModel, NoiseCov};
use frlab::sampling::loading_canonical_sparse;

fn main() -> frlab::Result<()> {
    let (p, k, n) = (2000usize, 10usize, 100usize);
    let model = FactorModel::new(
        loading_canonical_sparse(p, k)?,
        DenseMatrix::identity(k),
        NoiseCov::Isotropic(1.0),
        vec![1.0; k],
        1.0,
    )?;

    let main = main_excess_bound(&model, n);
    println!("main excess bound at (n, p, K) = ({n}, {p}, {k}):");
    println!(
        "  value {:.4} = bias {:.4} + variance {:.4}; conditions {}",
        main.value,
        main.inputs["bias_term"],
        main.inputs["variance_term"],
        main.conditions_json()
    );

    let pv = purevar_bound(&model, n);
    println!(
        "pure-variance form: {:.4} (balanced clusters would give {:.4})",
        pv.value, pv.inputs["balanced_form"]
    );

    for report in pcr_bound(&model, n)? {
        println!("{}: {:.4}", report.name, report.value);
    }

    // Spectrum-side quantities: K* recovers the latent dimension when the
    // noise tail is heavy relative to n.
    let spectrum = SpectrumSummary::of_model(&model)?;
    let kstar = tail_rank_kstar(&spectrum, n, 2.0)?;
    let sandwich = kstar_sandwich_check(&model, n)?;
    println!(
        "K* = {:?} (latent K = {k}); tail-rank sandwich upper {} / lower {}",
        kstar, sandwich.upper_ok, sandwich.lower_ok
    );

    let cmp = comparison_bias_variance(&model, n, 2.0)?;
    println!(
        "comparison bias {:.4} / variance {:.4} (bias lower bound {:.4})",
        cmp.bias.value,
        cmp.variance.value,
        cmp.bias_lower_bound.map(|b| b.value).unwrap_or(f64::NAN)
    );
    Ok(())
}
