//! Exact population quantities of a factor-regression model: the best
//! linear predictor alpha*, the signal-to-noise ratio, the benchmark risks,
//! and the spectrum diagnostics.
//!
//! Run with: cargo run --release --example population_quantities

use frlab::linalg::DenseMatrix;
use frlab::model::{FactorModel, NoiseCov};
use frlab::sampling::{loading_scaled_orthogonal, SeedSpec, StreamRole};

fn main() -> frlab::Result<()> {
    // The worked two-feature instance: A = (1, 1)', Sigma_Z = 1,
    // Sigma_E = I_2, beta = 1, sigma_eps = 1. Everything has a closed form
    // here (alpha* = (1/3, 1/3), xi = 2, R(alpha*) = 4/3), which makes it a
    // good smoke test for the machinery.
    let toy = FactorModel::new(
        DenseMatrix::from_rows(&[vec![1.0], vec![1.0]])?,
        DenseMatrix::identity(1),
        NoiseCov::Isotropic(1.0),
        vec![1.0],
        1.0,
    )?;
    report("worked 2x1 instance", &toy)?;

    // A desk-scale model with an orthogonal loading: A'A = p I_K.
    let (p, k) = (400, 8);
    let mut rng = SeedSpec::new(7).stream(0, 0, StreamRole::Loading);
    let model = FactorModel::new(
        loading_scaled_orthogonal(p, k, &mut rng)?,
        DenseMatrix::identity(k),
        NoiseCov::Isotropic(1.0),
        vec![1.0; k],
        1.0,
    )?;
    report(&format!("orthogonal loading, p = {p}, K = {k}"), &model)?;

    // The latent regression residual y - X'alpha* is uncorrelated with X;
    // empirically the largest |corr(X_j, eta)| sits at the CLT scale.
    let check = model.gaussian_residual_check(50_000, 11)?;
    println!(
        "residual check: max |corr(X_j, eta)| = {:.4} over 50k Gaussian draws (CLT scale {:.4});",
        check.max_abs_correlation,
        (50_000f64).sqrt().recip()
    );
    println!(
        "                Sigma_X alpha* = Sigma_Xy holds to {:.2e}",
        check.identity_gap
    );
    Ok(())
}

fn report(title: &str, model: &FactorModel) -> frlab::Result<()> {
    let s = model.population_summary()?;
    println!("== {title}");
    println!(
        "  xi = {:.4}   ||Sigma_X|| = {:.4}   r_e(Sigma_X) = {:.2}   r_e(Sigma_E) = {:.2}",
        s.xi, s.sigma_x_opnorm, s.re_sigma_x, s.re_sigma_e
    );
    println!(
        "  oracle risk {:.4} <= R(alpha*) {:.4} <= null risk {:.4}",
        s.oracle_risk, s.risk_star, s.null_risk
    );
    println!(
        "  ||alpha*||^2 = {:.6}   ||alpha*||^2_Sigma_X = {:.4}   gap in [{:.4}, {:.4}]",
        s.alpha_star_norm_sq,
        s.alpha_star_sx_norm_sq,
        s.gap_lower,
        s.gap_upper
    );
    let d = model.spectrum_diagnostics()?;
    println!(
        "  spectrum checks: floor {} / K-growth {} / bounded tail {}   (top eigenvalues {:.2}, {:.2}, ...)",
        d.lambda_floor_ok,
        d.lambda_k_growth,
        d.tail_bounded,
        d.eigenvalues[0],
        d.eigenvalues.get(1).copied().unwrap_or(f64::NAN)
    );
    println!();
    Ok(())
}
