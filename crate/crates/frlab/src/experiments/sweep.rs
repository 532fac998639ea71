//! Config-driven Monte Carlo sweep runner.
//!
//! Grid points x replicates form an embarrassingly parallel task set; every
//! task derives its own random streams from the seed spec, so the output is
//! byte-identical regardless of thread count. Rows are sorted before
//! emission.

use rayon::prelude::*;

use crate::bounds;
use crate::error::{Error, Result};
use crate::estimators::{
    self, cross_validate, CvPlan, FittedPredictor, Method, PenalizedFit,
};
use crate::linalg::{self, DenseMatrix};
use crate::model::{FactorModel, NoiseCov, PopulationSummary};
use crate::sampling::{
    self, sample_dataset, Dataset, NoiseLaw, SeedSpec, StreamRole,
};

use super::config::{
    BetaKind, EstimatorSpec, EvalMode, ExperimentConfig, FactorCovKind, GridPoint, LoadingKind,
    NoiseCovKind,
};

/// One (grid point, replicate, estimator) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub design: String,
    pub gamma: f64,
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub replicate: usize,
    pub estimator: String,
    pub risk: f64,
    pub excess_vs_oracle: f64,
    pub excess_vs_star: f64,
    pub null_risk: f64,
    pub interp_residual: f64,
    pub coef_norm_sq: f64,
    pub converged: bool,
}

/// One bound evaluation at a grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub gamma: f64,
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub bound_name: String,
    pub value: f64,
    pub conditions_json: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub bounds: Vec<BoundRow>,
}

/// Builds the population model for one grid point and replicate.
pub fn build_model(
    config: &ExperimentConfig,
    gp: &GridPoint,
    grid_index: u64,
    replicate: u64,
) -> Result<FactorModel> {
    let seed = SeedSpec::new(config.master_seed);
    let loading_rep = if config.redraw_loading_per_replicate {
        replicate
    } else {
        0
    };
    let mut rng = seed.stream(grid_index, loading_rep, StreamRole::Loading);
    let loading = match &config.loading_kind {
        LoadingKind::ScaledOrthogonal => {
            sampling::loading_scaled_orthogonal(gp.p, gp.k, &mut rng)?
        }
        LoadingKind::Gaussian { scale } => {
            sampling::loading_gaussian(gp.p, gp.k, *scale, &mut rng)?
        }
        LoadingKind::CanonicalSparse => sampling::loading_canonical_sparse(gp.p, gp.k)?,
        LoadingKind::ClusterAssignment { sizes } => {
            sampling::loading_cluster_assignment(gp.p, gp.k, sizes)?
        }
        LoadingKind::Zero => DenseMatrix::zeros(gp.p, gp.k),
    };
    let factor_cov = match &config.sigma_z_kind {
        FactorCovKind::Identity => DenseMatrix::identity(gp.k),
        FactorCovKind::ScaledIdentity { variance } => DenseMatrix::identity(gp.k).scale(*variance),
        FactorCovKind::Diagonal { variances } => {
            if variances.len() != gp.k {
                return Err(Error::Config(format!(
                    "sigma_z_kind diagonal has {} entries but K = {}",
                    variances.len(),
                    gp.k
                )));
            }
            DenseMatrix::from_diagonal(variances)
        }
    };
    let noise_cov = match &config.sigma_e_kind {
        NoiseCovKind::Zero => NoiseCov::Zero,
        NoiseCovKind::Isotropic { variance } => NoiseCov::Isotropic(*variance),
        NoiseCovKind::Diagonal { variances } => {
            if variances.len() != gp.p {
                return Err(Error::Config(format!(
                    "sigma_e_kind diagonal has {} entries but p = {}",
                    variances.len(),
                    gp.p
                )));
            }
            NoiseCov::Diagonal(variances.clone())
        }
    };
    let beta = match &config.beta_kind {
        BetaKind::AllOnes => vec![1.0; gp.k],
        BetaKind::Zeros => vec![0.0; gp.k],
        BetaKind::Custom { values } => {
            if values.len() != gp.k {
                return Err(Error::Config(format!(
                    "beta has {} entries but K = {}",
                    values.len(),
                    gp.k
                )));
            }
            values.clone()
        }
    };
    match config.loading_kind {
        LoadingKind::Zero => FactorModel::new_allowing_degenerate(
            loading,
            factor_cov,
            noise_cov,
            beta,
            config.sigma_eps,
        ),
        _ => FactorModel::new(loading, factor_cov, noise_cov, beta, config.sigma_eps),
    }
}

/// What one fitted estimator contributed to a row.
struct FitOutcome {
    risk: f64,
    interp_residual: f64,
    coef_norm_sq: f64,
    converged: bool,
}

fn fit_and_evaluate(
    spec: &EstimatorSpec,
    model: &FactorModel,
    summary: &PopulationSummary,
    data: &Dataset,
    config: &ExperimentConfig,
    seed: &SeedSpec,
    grid_index: u64,
    replicate: u64,
) -> Result<FitOutcome> {
    let x = &data.x;
    let y = &data.y;
    let evaluate = |coefficients: &[f64]| -> Result<f64> {
        evaluate_risk(
            model,
            Method::MinNorm,
            coefficients,
            config.eval_mode,
            seed,
            grid_index,
            replicate,
        )
    };

    let from_predictor = |fit: &FittedPredictor| -> Result<FitOutcome> {
        Ok(FitOutcome {
            risk: evaluate_risk(
                model,
                fit.method,
                &fit.coefficients,
                config.eval_mode,
                seed,
                grid_index,
                replicate,
            )?,
            interp_residual: fit.training_residual(),
            coef_norm_sq: fit.metadata["coef_norm_sq"],
            converged: fit.metadata.get("converged").copied().unwrap_or(1.0) == 1.0,
        })
    };

    match spec {
        EstimatorSpec::MinNorm => from_predictor(&estimators::fit_min_norm(x, y)?),
        EstimatorSpec::Null => {
            let zero = vec![0.0; model.p()];
            Ok(FitOutcome {
                risk: evaluate(&zero)?,
                interp_residual: linalg::norm(y),
                coef_norm_sq: 0.0,
                converged: true,
            })
        }
        EstimatorSpec::OracleZ => {
            let fit = estimators::fit_oracle_z(&data.z, y)?;
            Ok(FitOutcome {
                risk: evaluate_risk(
                    model,
                    Method::OracleZ,
                    &fit.beta_hat,
                    config.eval_mode,
                    seed,
                    grid_index,
                    replicate,
                )?,
                interp_residual: fit.training_residual,
                coef_norm_sq: linalg::norm_sq(&fit.beta_hat),
                converged: true,
            })
        }
        EstimatorSpec::PcrEmpirical { k } => {
            let k = k.unwrap_or(model.k());
            from_predictor(&estimators::fit_pcr_empirical(x, y, k)?)
        }
        EstimatorSpec::PcrStylized { k } => {
            let k = k.unwrap_or(model.k());
            from_predictor(&estimators::fit_pcr_stylized(model, x, y, k)?)
        }
        EstimatorSpec::Ridge { lambda } => from_predictor(&estimators::fit_ridge(x, y, *lambda)?),
        EstimatorSpec::RidgeCv { cv } => {
            let plan = CvPlan::log_grid_for(
                x,
                y,
                cv.folds,
                cv.grid_points,
                cv.min_factor,
                cv.max_factor,
                fold_seed(seed, grid_index, replicate),
            )?;
            let outcome = cross_validate(PenalizedFit::Ridge, x, y, &plan)?;
            from_predictor(&estimators::fit_ridge(x, y, outcome.best_lambda)?)
        }
        EstimatorSpec::Lasso { lambda } => from_predictor(&estimators::fit_lasso(x, y, *lambda)?),
        EstimatorSpec::LassoCv { cv } => {
            let plan = CvPlan::log_grid_for(
                x,
                y,
                cv.folds,
                cv.grid_points,
                cv.min_factor,
                cv.max_factor,
                fold_seed(seed, grid_index, replicate),
            )?;
            let outcome = cross_validate(PenalizedFit::Lasso, x, y, &plan)?;
            from_predictor(&estimators::fit_lasso(x, y, outcome.best_lambda)?)
        }
    }
    .map(|mut out| {
        // Null rows carry the exact null risk under exact evaluation.
        if matches!(spec, EstimatorSpec::Null)
            && matches!(config.eval_mode, EvalMode::ExactPopulationRisk)
        {
            out.risk = summary.null_risk;
        }
        out
    })
}

fn fold_seed(seed: &SeedSpec, grid_index: u64, replicate: u64) -> u64 {
    use rand::RngCore;
    seed.stream(grid_index, replicate, StreamRole::Folds).next_u64()
}

/// Risk of a fitted coefficient vector under the configured evaluation mode.
pub fn evaluate_risk(
    model: &FactorModel,
    method: Method,
    coefficients: &[f64],
    eval_mode: EvalMode,
    seed: &SeedSpec,
    grid_index: u64,
    replicate: u64,
) -> Result<f64> {
    match eval_mode {
        EvalMode::ExactPopulationRisk => match method {
            Method::OracleZ => model.latent_risk(coefficients),
            _ => model.risk_exact(coefficients),
        },
        EvalMode::HoldoutMonteCarlo { m } => {
            let mut rng = seed.stream(grid_index, replicate, StreamRole::Holdout);
            let law = NoiseLaw::Gaussian;
            let mut sum = 0.0;
            let k = model.k();
            let p = model.p();
            let mut zt = vec![0.0; k];
            let mut et = vec![0.0; p];
            for _ in 0..m {
                for v in zt.iter_mut() {
                    *v = law.sample(&mut rng);
                }
                let z = model.factor_sqrt().matvec(&zt)?;
                let eps = model.sigma_eps() * law.sample(&mut rng);
                let y = linalg::dot(&z, model.beta()) + eps;
                let prediction = match method {
                    Method::OracleZ => linalg::dot(&z, coefficients),
                    _ => {
                        for v in et.iter_mut() {
                            *v = law.sample(&mut rng);
                        }
                        let e = model.noise_sqrt_apply(&et);
                        let mut x = model.loading().matvec(&z)?;
                        for (xi, ei) in x.iter_mut().zip(&e) {
                            *xi += ei;
                        }
                        linalg::dot(&x, coefficients)
                    }
                };
                let d = prediction - y;
                sum += d * d;
            }
            Ok(sum / m as f64)
        }
    }
}

/// Runs the full sweep described by the config.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid.resolve()?;
    let seed = SeedSpec::new(config.master_seed);

    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|gi| (0..config.replicates).map(move |rep| (gi, rep)))
        .collect();

    let row_groups: Vec<Result<Vec<SweepRow>>> = tasks
        .par_iter()
        .map(|&(gi, rep)| replicate_rows(config, &grid, gi, rep, &seed))
        .collect();

    let mut rows = Vec::with_capacity(tasks.len() * config.estimators.len());
    for group in row_groups {
        rows.extend(group?);
    }
    sort_rows(&mut rows);

    let mut bound_rows = Vec::new();
    for (gi, gp) in grid.iter().enumerate() {
        bound_rows.extend(bound_rows_for_point(config, gp, gi as u64)?);
    }

    Ok(SweepResult {
        rows,
        bounds: bound_rows,
    })
}

fn replicate_rows(
    config: &ExperimentConfig,
    grid: &[GridPoint],
    gi: usize,
    rep: usize,
    seed: &SeedSpec,
) -> Result<Vec<SweepRow>> {
    let gp = &grid[gi];
    let gamma = gp.p as f64 / gp.n as f64;
    let mut rows = Vec::with_capacity(config.estimators.len());

    let prepared = build_model(config, gp, gi as u64, rep as u64).and_then(|model| {
        let summary = model.population_summary()?;
        let data = sample_dataset(
            &model,
            gp.n,
            config.noise_law,
            seed,
            gi as u64,
            rep as u64,
        )?;
        Ok((model, summary, data))
    });

    match prepared {
        Ok((model, summary, data)) => {
            for spec in &config.estimators {
                let outcome = fit_and_evaluate(
                    spec, &model, &summary, &data, config, seed, gi as u64, rep as u64,
                );
                let row = match outcome {
                    Ok(out) => SweepRow {
                        design: config.design.tag().into(),
                        gamma,
                        k: gp.k,
                        n: gp.n,
                        p: gp.p,
                        replicate: rep,
                        estimator: spec.tag().into(),
                        risk: out.risk,
                        excess_vs_oracle: out.risk - summary.oracle_risk,
                        excess_vs_star: out.risk - summary.risk_star,
                        null_risk: summary.null_risk,
                        interp_residual: out.interp_residual,
                        coef_norm_sq: out.coef_norm_sq,
                        converged: out.converged,
                    },
                    Err(_) => failure_row(config, gp, gamma, rep, spec.tag()),
                };
                rows.push(row);
            }
        }
        Err(_) => {
            for spec in &config.estimators {
                rows.push(failure_row(config, gp, gamma, rep, spec.tag()));
            }
        }
    }
    Ok(rows)
}

fn failure_row(
    config: &ExperimentConfig,
    gp: &GridPoint,
    gamma: f64,
    rep: usize,
    estimator: &str,
) -> SweepRow {
    SweepRow {
        design: config.design.tag().into(),
        gamma,
        k: gp.k,
        n: gp.n,
        p: gp.p,
        replicate: rep,
        estimator: estimator.into(),
        risk: f64::NAN,
        excess_vs_oracle: f64::NAN,
        excess_vs_star: f64::NAN,
        null_risk: f64::NAN,
        interp_residual: f64::NAN,
        coef_norm_sq: f64::NAN,
        converged: false,
    }
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.gamma
            .total_cmp(&b.gamma)
            .then_with(|| a.estimator.cmp(&b.estimator))
            .then_with(|| a.replicate.cmp(&b.replicate))
            .then_with(|| (a.k, a.n, a.p).cmp(&(b.k, b.n, b.p)))
    });
}

/// Every bound calculator evaluated at one grid point (replicate-0 loading).
pub fn bound_rows_for_point(
    config: &ExperimentConfig,
    gp: &GridPoint,
    grid_index: u64,
) -> Result<Vec<BoundRow>> {
    let gamma = gp.p as f64 / gp.n as f64;
    let model = build_model(config, gp, grid_index, 0)?;
    let summary = model.population_summary()?;
    let mut reports = vec![
        bounds::null_ratio_bound(gp.n, &summary),
        bounds::effective_rank_condition(&model, gp.n),
        bounds::main_excess_bound(&model, gp.n),
        bounds::purevar_bound(&model, gp.n),
        bounds::lowdim_bound(&model, gp.n),
    ];
    reports.extend(bounds::pcr_bound(&model, gp.n)?);
    if let Ok(cmp) = bounds::comparison_bias_variance(&model, gp.n, 2.0) {
        reports.push(cmp.bias);
        reports.push(cmp.variance);
        if let Some(lower) = cmp.bias_lower_bound {
            reports.push(lower);
        }
    }
    Ok(reports
        .into_iter()
        .map(|r| BoundRow {
            gamma,
            k: gp.k,
            n: gp.n,
            p: gp.p,
            bound_name: r.name.clone(),
            value: r.value,
            conditions_json: r.conditions_json(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{Design, GridSpec};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            design: Design::Custom,
            grid: GridSpec::Points(vec![GridPoint { k: 2, n: 8, p: 24 }]),
            loading_kind: LoadingKind::ScaledOrthogonal,
            noise_law: NoiseLaw::Gaussian,
            sigma_z_kind: FactorCovKind::Identity,
            sigma_e_kind: NoiseCovKind::Isotropic { variance: 1.0 },
            beta_kind: BetaKind::AllOnes,
            sigma_eps: 1.0,
            estimators: vec![
                EstimatorSpec::MinNorm,
                EstimatorSpec::Null,
                EstimatorSpec::OracleZ,
            ],
            replicates: 3,
            redraw_loading_per_replicate: true,
            master_seed: 9,
            eval_mode: EvalMode::ExactPopulationRisk,
            output_dir: "out/test".into(),
        }
    }

    #[test]
    fn zero_replicates_give_empty_rows() {
        let mut config = tiny_config();
        config.replicates = 0;
        let result = run_sweep(&config).unwrap();
        assert!(result.rows.is_empty());
        assert!(!result.bounds.is_empty());
    }

    #[test]
    fn null_rows_carry_exact_null_risk() {
        let config = tiny_config();
        let result = run_sweep(&config).unwrap();
        let model = build_model(&config, &GridPoint { k: 2, n: 8, p: 24 }, 0, 0).unwrap();
        let summary = model.population_summary().unwrap();
        for row in result.rows.iter().filter(|r| r.estimator == "null") {
            assert_eq!(row.risk, summary.null_risk);
            assert_eq!(row.coef_norm_sq, 0.0);
        }
    }

    #[test]
    fn row_identities_hold() {
        let config = tiny_config();
        let result = run_sweep(&config).unwrap();
        assert_eq!(result.rows.len(), 9);
        for row in &result.rows {
            assert!((row.excess_vs_oracle - (row.risk - 1.0)).abs() <= 1e-9);
            // Feature-space predictors cannot beat R(alpha*); the latent
            // oracle can.
            if row.estimator != "oracle_z" {
                assert!(row.excess_vs_star >= -1e-9);
            } else {
                assert!(row.risk >= 1.0 - 1e-9);
            }
        }
        // Sorted by (gamma, estimator, replicate).
        for w in result.rows.windows(2) {
            let a = (&w[0].estimator, w[0].replicate);
            let b = (&w[1].estimator, w[1].replicate);
            assert!(a <= b);
        }
    }

    #[test]
    fn min_norm_excess_equals_oracle_under_zero_noise() {
        let mut config = tiny_config();
        config.sigma_e_kind = NoiseCovKind::Zero;
        config.estimators = vec![EstimatorSpec::MinNorm, EstimatorSpec::OracleZ];
        config.replicates = 4;
        let result = run_sweep(&config).unwrap();
        for rep in 0..4 {
            let mn = result
                .rows
                .iter()
                .find(|r| r.estimator == "min_norm" && r.replicate == rep)
                .unwrap();
            let oz = result
                .rows
                .iter()
                .find(|r| r.estimator == "oracle_z" && r.replicate == rep)
                .unwrap();
            assert!(
                (mn.excess_vs_oracle - oz.excess_vs_oracle).abs()
                    <= 1e-8 * mn.excess_vs_oracle.abs().max(1e-12),
                "min-norm {} vs oracle {}",
                mn.excess_vs_oracle,
                oz.excess_vs_oracle
            );
        }
    }

    #[test]
    fn holdout_mode_agrees_with_exact_within_noise() {
        let mut config = tiny_config();
        config.estimators = vec![EstimatorSpec::MinNorm];
        config.replicates = 1;
        let exact = run_sweep(&config).unwrap().rows[0].risk;
        config.eval_mode = EvalMode::HoldoutMonteCarlo { m: 200_000 };
        let mc = run_sweep(&config).unwrap().rows[0].risk;
        // Squared-error draws have heavy but finite variance; 3 SE with a
        // generous moment bound.
        let se = exact * 3.0 / (200_000f64).sqrt();
        assert!((mc - exact).abs() <= 5.0 * se, "mc {mc} vs exact {exact}");
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let config = tiny_config();
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let a = pool1.install(|| run_sweep(&config)).unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let b = pool4.install(|| run_sweep(&config)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.bounds, b.bounds);
    }

    #[test]
    fn failure_rows_keep_sweep_alive() {
        let mut config = tiny_config();
        // k exceeding min(n, p) makes the PCR fit fail per replicate.
        config.estimators = vec![
            EstimatorSpec::PcrEmpirical { k: Some(30) },
            EstimatorSpec::MinNorm,
        ];
        let result = run_sweep(&config).unwrap();
        let failed: Vec<_> = result
            .rows
            .iter()
            .filter(|r| r.estimator == "pcr_empirical")
            .collect();
        assert_eq!(failed.len(), 3);
        assert!(failed.iter().all(|r| !r.converged && r.risk.is_nan()));
        assert!(result
            .rows
            .iter()
            .filter(|r| r.estimator == "min_norm")
            .all(|r| r.converged));
    }
}
