//! The predictors compared throughout: minimum-norm least squares, principal
//! component regression (empirical and population-eigenvector form), ridge,
//! lasso, the null predictor, and the latent-space oracle.
//!
//! Every fitter returns a [`FittedPredictor`] carrying the coefficient
//! vector and a metadata map with at least the training residual
//! `||X a - y||` and the squared coefficient norm.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen, DenseMatrix, GramPinv};
use crate::model::{solve_spd, FactorModel};

/// Which estimator produced a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    MinNorm,
    PcrEmpirical,
    PcrStylized,
    Ridge,
    Lasso,
    Null,
    OracleZ,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::MinNorm => "min_norm",
            Method::PcrEmpirical => "pcr_empirical",
            Method::PcrStylized => "pcr_stylized",
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
            Method::Null => "null",
            Method::OracleZ => "oracle_z",
        }
    }
}

/// A fitted coefficient vector in feature space plus fit metadata.
#[derive(Debug, Clone)]
pub struct FittedPredictor {
    pub method: Method,
    pub coefficients: Vec<f64>,
    pub metadata: BTreeMap<String, f64>,
}

impl FittedPredictor {
    fn assemble(
        method: Method,
        coefficients: Vec<f64>,
        x: &DenseMatrix,
        y: &[f64],
        extra: &[(&str, f64)],
    ) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NumericFailure {
                what: "fitted coefficients",
                rows: x.rows(),
                cols: x.cols(),
            });
        }
        let fitted = x.matvec(&coefficients)?;
        let residual: f64 = fitted
            .iter()
            .zip(y)
            .map(|(f, yi)| (f - yi) * (f - yi))
            .sum::<f64>()
            .sqrt();
        let mut metadata = BTreeMap::new();
        metadata.insert("training_residual".into(), residual);
        metadata.insert("coef_norm_sq".into(), linalg::norm_sq(&coefficients));
        for (k, v) in extra {
            metadata.insert((*k).into(), *v);
        }
        Ok(Self {
            method,
            coefficients,
            metadata,
        })
    }

    pub fn training_residual(&self) -> f64 {
        self.metadata["training_residual"]
    }
}

fn check_xy(x: &DenseMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "fit",
            expected: format!("{} responses", x.rows()),
            got: format!("{}", y.len()),
        });
    }
    Ok(())
}

/// Minimum-norm least squares a^ = X^+ y.
pub fn fit_min_norm(x: &DenseMatrix, y: &[f64]) -> Result<FittedPredictor> {
    check_xy(x, y)?;
    let solver = GramPinv::new(x)?;
    let coefficients = solver.pinv_apply(y)?;
    FittedPredictor::assemble(
        Method::MinNorm,
        coefficients,
        x,
        y,
        &[("effective_rank", solver.rank() as f64)],
    )
}

/// PCR on the top-k eigenvectors of the sample covariance X'X/n.
///
/// For p > n the eigenvectors come from the n x n Gram matrix X X'/n,
/// which has the same nonzero spectrum.
pub fn fit_pcr_empirical(x: &DenseMatrix, y: &[f64], k: usize) -> Result<FittedPredictor> {
    check_xy(x, y)?;
    let (n, p) = (x.rows(), x.cols());
    if k == 0 || k > n.min(p) {
        return Err(Error::ContractViolation(format!(
            "PCR component count k = {k} outside 1..=min(n, p) = {}",
            n.min(p)
        )));
    }
    let u_k = if p <= n {
        let s = x.gram_right().scale(1.0 / n as f64);
        let eig = symmetric_eigen(&s)?;
        DenseMatrix::from_fn(p, k, |i, j| eig.eigenvectors.get(i, j))
    } else {
        let g = x.gram_left().scale(1.0 / n as f64);
        let eig = symmetric_eigen(&g)?;
        let cutoff = f64::EPSILON * n.max(p) as f64 * eig.eigenvalues[0].max(0.0);
        let mut u = DenseMatrix::zeros(p, k);
        for j in 0..k {
            let lambda = eig.eigenvalues[j];
            if lambda <= cutoff {
                return Err(Error::ContractViolation(format!(
                    "sample covariance has numerical rank < k = {k}; eigenvector {j} undefined"
                )));
            }
            let v = eig.eigenvectors.col(j);
            let col = x.tr_matvec(&v)?;
            let scale = (n as f64 * lambda).sqrt();
            for i in 0..p {
                u.set(i, j, col[i] / scale);
            }
        }
        u
    };
    let coefficients = project_and_solve(&u_k, x, y)?;
    FittedPredictor::assemble(
        Method::PcrEmpirical,
        coefficients,
        x,
        y,
        &[("effective_rank", k as f64)],
    )
}

/// PCR on the top-k eigenvectors of the population covariance Sigma_X.
pub fn fit_pcr_stylized(
    model: &FactorModel,
    x: &DenseMatrix,
    y: &[f64],
    k: usize,
) -> Result<FittedPredictor> {
    check_xy(x, y)?;
    let u_k = model.sigma_x_top_eigenvectors(k)?;
    let coefficients = project_and_solve(&u_k, x, y)?;
    FittedPredictor::assemble(
        Method::PcrStylized,
        coefficients,
        x,
        y,
        &[("effective_rank", k as f64)],
    )
}

/// U (X U)^+ y, shared by both PCR variants.
fn project_and_solve(u: &DenseMatrix, x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let b = x.matmul(u)?;
    let solver = GramPinv::new(&b)?;
    let w = solver.pinv_apply(y)?;
    u.matvec(&w)
}

/// Ridge with the unscaled objective ||y - X a||^2 + lambda ||a||^2.
pub fn fit_ridge(x: &DenseMatrix, y: &[f64], lambda: f64) -> Result<FittedPredictor> {
    check_xy(x, y)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::ContractViolation(
            "ridge penalty must be a positive real".into(),
        ));
    }
    let coefficients = ridge_path(x, y, lambda)?;
    FittedPredictor::assemble(Method::Ridge, coefficients, x, y, &[("lambda", lambda)])
}

fn ridge_path(x: &DenseMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (n, p) = (x.rows(), x.cols());
    if p > n {
        // Dual form X'(X X' + lambda I)^{-1} y.
        let mut g = x.gram_left();
        for i in 0..n {
            g.set(i, i, g.get(i, i) + lambda);
        }
        let w = solve_spd(&g, y)?;
        x.tr_matvec(&w)
    } else {
        let mut h = x.gram_right();
        for i in 0..p {
            h.set(i, i, h.get(i, i) + lambda);
        }
        let rhs = x.tr_matvec(y)?;
        solve_spd(&h, &rhs)
    }
}

const LASSO_MAX_UPDATES: usize = 100_000;
const LASSO_GAP_TOL: f64 = 1e-7;

/// Lasso with the objective (1/2n) ||y - X a||^2 + lambda ||a||_1, solved by
/// cyclic coordinate descent to duality-gap tolerance 1e-7 (relative to the
/// null primal value), with a budget of 1e5 coordinate updates.
pub fn fit_lasso(x: &DenseMatrix, y: &[f64], lambda: f64) -> Result<FittedPredictor> {
    fit_lasso_with_cap(x, y, lambda, LASSO_MAX_UPDATES)
}

pub(crate) fn fit_lasso_with_cap(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    max_updates: usize,
) -> Result<FittedPredictor> {
    check_xy(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::ContractViolation(
            "lasso penalty must be a nonnegative real".into(),
        ));
    }
    let workspace = LassoWorkspace::new(x);
    let mut alpha = vec![0.0; x.cols()];
    let state = workspace.descend(y, lambda, &mut alpha, max_updates);
    FittedPredictor::assemble(
        Method::Lasso,
        alpha,
        x,
        y,
        &[
            ("lambda", lambda),
            ("iterations", state.updates as f64),
            ("converged", if state.converged { 1.0 } else { 0.0 }),
            ("duality_gap", state.gap),
        ],
    )
}

struct LassoState {
    updates: usize,
    converged: bool,
    gap: f64,
}

/// Column-major copy of the design plus column norms, reused across a
/// warm-started penalty path.
struct LassoWorkspace {
    n: usize,
    cols: Vec<Vec<f64>>,
    col_sq: Vec<f64>,
}

impl LassoWorkspace {
    fn new(x: &DenseMatrix) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.col(j)).collect();
        let col_sq = cols.iter().map(|c| linalg::norm_sq(c)).collect();
        Self {
            n: x.rows(),
            cols,
            col_sq,
        }
    }

    /// One pass of coordinate updates over `coords`; returns the largest
    /// coefficient change.
    fn sweep_over(
        &self,
        coords: &[usize],
        residual: &mut [f64],
        alpha: &mut [f64],
        lambda: f64,
    ) -> f64 {
        let n = self.n as f64;
        let mut max_delta = 0.0f64;
        for &j in coords {
            let cj = self.col_sq[j] / n;
            if cj == 0.0 {
                continue;
            }
            let rho = linalg::dot(&self.cols[j], residual) / n + cj * alpha[j];
            let new = soft_threshold(rho, lambda) / cj;
            let delta = alpha[j] - new;
            if delta != 0.0 {
                for (r, c) in residual.iter_mut().zip(&self.cols[j]) {
                    *r += c * delta;
                }
                alpha[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    /// Runs coordinate descent from the warm start in `alpha`: full cyclic
    /// passes certified by the duality gap, with cheap refinement sweeps
    /// restricted to the active set in between.
    fn descend(&self, y: &[f64], lambda: f64, alpha: &mut [f64], max_updates: usize) -> LassoState {
        let n = self.n as f64;
        let p = alpha.len();
        let mut residual: Vec<f64> = y.to_vec();
        for j in 0..p {
            if alpha[j] != 0.0 {
                for (r, c) in residual.iter_mut().zip(&self.cols[j]) {
                    *r -= c * alpha[j];
                }
            }
        }
        let null_primal = linalg::norm_sq(y) / (2.0 * n);
        let scale = if lambda == 0.0 {
            // Pure least squares: converge on the relative gradient norm.
            let grad0 = self
                .cols
                .iter()
                .fold(0.0f64, |m, c| m.max(linalg::dot(c, y).abs()))
                / n;
            1e-2 * grad0.max(f64::MIN_POSITIVE)
        } else {
            null_primal.max(f64::MIN_POSITIVE)
        };
        let all: Vec<usize> = (0..p).collect();
        let mut updates = 0usize;
        let mut converged = false;
        let mut gap = f64::INFINITY;
        while updates < max_updates {
            let full_delta = self.sweep_over(&all, &mut residual, alpha, lambda);
            updates += p;
            gap = self.duality_gap(y, &residual, alpha, lambda);
            if gap <= LASSO_GAP_TOL * scale {
                converged = true;
                break;
            }
            if full_delta == 0.0 {
                // A stationary full pass cannot improve further.
                break;
            }
            // Refine on the active set until it stops moving.
            let active: Vec<usize> = (0..p).filter(|&j| alpha[j] != 0.0).collect();
            if active.is_empty() || active.len() == p {
                continue;
            }
            let alpha_scale = alpha.iter().fold(1e-12f64, |m, a| m.max(a.abs()));
            while updates < max_updates {
                let delta = self.sweep_over(&active, &mut residual, alpha, lambda);
                updates += active.len();
                if delta <= 1e-12 * alpha_scale {
                    break;
                }
            }
        }
        LassoState {
            updates,
            converged,
            gap,
        }
    }

    /// Primal minus dual at the residual-scaled dual point.
    fn duality_gap(&self, y: &[f64], residual: &[f64], alpha: &[f64], lambda: f64) -> f64 {
        let n = self.n as f64;
        let primal = linalg::norm_sq(residual) / (2.0 * n)
            + lambda * alpha.iter().map(|a| a.abs()).sum::<f64>();
        if lambda == 0.0 {
            // Pure least squares: the gradient norm is the natural residual
            // certificate.
            return self
                .cols
                .iter()
                .fold(0.0f64, |m, c| m.max(linalg::dot(c, residual).abs()))
                / n;
        }
        let xtr_inf = self
            .cols
            .iter()
            .fold(0.0f64, |m, c| m.max(linalg::dot(c, residual).abs()));
        let s = if xtr_inf > n * lambda {
            n * lambda / xtr_inf
        } else {
            1.0
        };
        let mut dist_sq = 0.0;
        for (r, yi) in residual.iter().zip(y) {
            let theta = s * r / n;
            let d = theta - yi / n;
            dist_sq += d * d;
        }
        let dual = linalg::norm_sq(y) / (2.0 * n) - n / 2.0 * dist_sq;
        primal - dual
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest KKT violation of the lasso optimality conditions at `alpha`.
pub fn lasso_kkt_violation(x: &DenseMatrix, y: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let fitted = x.matvec(alpha).expect("dimensions checked by caller");
    let residual: Vec<f64> = y.iter().zip(&fitted).map(|(yi, f)| yi - f).collect();
    let grad = x.tr_matvec(&residual).expect("dimensions checked by caller");
    let mut worst = 0.0f64;
    for (g, a) in grad.iter().zip(alpha) {
        let corr = g / n;
        let v = if *a == 0.0 {
            (corr.abs() - lambda).max(0.0)
        } else {
            (corr - lambda * a.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Least-squares fit in the latent space: beta^ = Z^+ y.
#[derive(Debug, Clone)]
pub struct OracleFit {
    pub beta_hat: Vec<f64>,
    pub training_residual: f64,
}

pub fn fit_oracle_z(z: &DenseMatrix, y: &[f64]) -> Result<OracleFit> {
    check_xy(z, y)?;
    let solver = GramPinv::new(z)?;
    let beta_hat = solver.pinv_apply(y)?;
    let fitted = z.matvec(&beta_hat)?;
    let training_residual = fitted
        .iter()
        .zip(y)
        .map(|(f, yi)| (f - yi) * (f - yi))
        .sum::<f64>()
        .sqrt();
    Ok(OracleFit {
        beta_hat,
        training_residual,
    })
}

/// Cross-validation plan: fold count, penalty grid (ascending), and the
/// seed for the fold shuffle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub penalty_grid: Vec<f64>,
    pub fold_seed: u64,
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::ContractViolation("need at least 2 folds".into()));
        }
        if self.penalty_grid.is_empty() {
            return Err(Error::ContractViolation("empty penalty grid".into()));
        }
        if !self
            .penalty_grid
            .iter()
            .all(|l| *l > 0.0 && l.is_finite())
        {
            return Err(Error::ContractViolation(
                "penalty grid must be positive reals".into(),
            ));
        }
        if self.penalty_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ContractViolation(
                "penalty grid must be sorted ascending".into(),
            ));
        }
        Ok(())
    }

    /// Log-spaced grid of `points` values spanning
    /// `[min_factor, max_factor] * ||X'y||_inf / n`.
    pub fn log_grid_for(
        x: &DenseMatrix,
        y: &[f64],
        folds: usize,
        points: usize,
        min_factor: f64,
        max_factor: f64,
        fold_seed: u64,
    ) -> Result<Self> {
        let n = x.rows() as f64;
        let scale = x
            .tr_matvec(y)?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            / n;
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let lo = (min_factor * scale).ln();
        let hi = (max_factor * scale).ln();
        let penalty_grid = (0..points)
            .map(|i| {
                let t = if points == 1 {
                    0.0
                } else {
                    i as f64 / (points - 1) as f64
                };
                (lo + t * (hi - lo)).exp()
            })
            .collect();
        let plan = Self {
            folds,
            penalty_grid,
            fold_seed,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Which penalized fitter a cross-validation run tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenalizedFit {
    Ridge,
    Lasso,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best_lambda: f64,
    /// (lambda, pooled validation MSE) per grid point, ascending in lambda.
    pub cv_curve: Vec<(f64, f64)>,
}

/// K-fold cross-validation of a penalized fitter over the plan's grid.
/// Ties break toward the larger penalty.
pub fn cross_validate(
    kind: PenalizedFit,
    x: &DenseMatrix,
    y: &[f64],
    plan: &CvPlan,
) -> Result<CvOutcome> {
    plan.validate()?;
    check_xy(x, y)?;
    let n = x.rows();
    if n < plan.folds {
        return Err(Error::ContractViolation(format!(
            "{} rows cannot fill {} folds",
            n, plan.folds
        )));
    }

    // Deterministic shuffled fold assignment.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(plan.fold_seed);
    shuffle(&mut order, &mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &idx) in order.iter().enumerate() {
            f[idx] = pos % plan.folds;
        }
        f
    };

    let grid = &plan.penalty_grid;
    let mut sse = vec![0.0f64; grid.len()];
    for fold in 0..plan.folds {
        let train_rows: Vec<usize> = (0..n).filter(|i| fold_of[*i] != fold).collect();
        let val_rows: Vec<usize> = (0..n).filter(|i| fold_of[*i] == fold).collect();
        let x_train = gather_rows(x, &train_rows);
        let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
        let x_val = gather_rows(x, &val_rows);
        let y_val: Vec<f64> = val_rows.iter().map(|&i| y[i]).collect();

        match kind {
            PenalizedFit::Ridge => {
                let prepared = RidgePrepared::new(&x_train, &y_train)?;
                for (gi, &lambda) in grid.iter().enumerate() {
                    let alpha = prepared.solve(lambda)?;
                    sse[gi] += validation_sse(&x_val, &y_val, &alpha)?;
                }
            }
            PenalizedFit::Lasso => {
                // Warm-started path from the largest penalty down.
                let workspace = LassoWorkspace::new(&x_train);
                let mut alpha = vec![0.0; x.cols()];
                for (gi, &lambda) in grid.iter().enumerate().rev() {
                    workspace.descend(&y_train, lambda, &mut alpha, LASSO_MAX_UPDATES);
                    sse[gi] += validation_sse(&x_val, &y_val, &alpha)?;
                }
            }
        }
    }

    let mut cv_curve = Vec::with_capacity(grid.len());
    for (gi, &lambda) in grid.iter().enumerate() {
        cv_curve.push((lambda, sse[gi] / n as f64));
    }
    let mut best = 0usize;
    for gi in 1..cv_curve.len() {
        if cv_curve[gi].1 <= cv_curve[best].1 {
            best = gi;
        }
    }
    Ok(CvOutcome {
        best_lambda: cv_curve[best].0,
        cv_curve,
    })
}

/// Eigendecomposition of the smaller-side Gram matrix, reused across the
/// ridge penalty grid.
struct RidgePrepared {
    x: DenseMatrix,
    dual: bool,
    eig: crate::linalg::SymmetricEigen,
    projected_rhs: Vec<f64>,
}

impl RidgePrepared {
    fn new(x: &DenseMatrix, y: &[f64]) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        let dual = p > n;
        let gram = if dual { x.gram_left() } else { x.gram_right() };
        let eig = symmetric_eigen(&gram)?;
        let rhs = if dual {
            y.to_vec()
        } else {
            x.tr_matvec(y)?
        };
        let projected_rhs = eig.eigenvectors.tr_matvec(&rhs)?;
        Ok(Self {
            x: x.clone(),
            dual,
            eig,
            projected_rhs,
        })
    }

    fn solve(&self, lambda: f64) -> Result<Vec<f64>> {
        let scaled: Vec<f64> = self
            .projected_rhs
            .iter()
            .zip(&self.eig.eigenvalues)
            .map(|(r, l)| r / (l.max(0.0) + lambda))
            .collect();
        let w = self.eig.eigenvectors.matvec(&scaled)?;
        if self.dual {
            self.x.tr_matvec(&w)
        } else {
            Ok(w)
        }
    }
}

fn validation_sse(x: &DenseMatrix, y: &[f64], alpha: &[f64]) -> Result<f64> {
    let fitted = x.matvec(alpha)?;
    Ok(fitted
        .iter()
        .zip(y)
        .map(|(f, yi)| (f - yi) * (f - yi))
        .sum())
}

fn gather_rows(x: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), x.cols(), |i, j| x.get(rows[i], j))
}

/// Fisher-Yates with the rng's uniform index draws.
fn shuffle(v: &mut [usize], rng: &mut ChaCha12Rng) {
    use rand::Rng;
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseCov;
    use crate::sampling::{sample_dataset, NoiseLaw, SeedSpec, StreamRole};
    use rand_distr::Distribution;

    fn rng(seed: u64) -> ChaCha12Rng {
        SeedSpec::new(seed).stream(0, 0, StreamRole::Probe)
    }

    fn random_matrix(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        let mut r = rng(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| {
            rand_distr::StandardNormal.sample(&mut r)
        })
    }

    fn random_vec(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng(seed);
        (0..n)
            .map(|_| rand_distr::StandardNormal.sample(&mut r))
            .collect()
    }

    #[test]
    fn min_norm_single_row() {
        let x = DenseMatrix::from_rows(&[vec![2.0, 0.0]]).unwrap();
        let fit = fit_min_norm(&x, &[4.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn min_norm_square_invertible() {
        let x = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let y = vec![1.0, 2.0];
        let fit = fit_min_norm(&x, &y).unwrap();
        // X^{-1} y computed by hand: det = 5, inv = [[3,-1],[-1,2]]/5.
        assert!((fit.coefficients[0] - 0.2).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.6).abs() < 1e-12);
        assert!(fit.training_residual() < 1e-12);
    }

    #[test]
    fn min_norm_interpolates_wide_designs() {
        let n = 12;
        let x = random_matrix(1, n, 3 * n);
        let y = random_vec(2, n);
        let fit = fit_min_norm(&x, &y).unwrap();
        assert!(fit.training_residual() <= 1e-8 * linalg::norm(&y));
        // Normal equations.
        let fitted = x.matvec(&fit.coefficients).unwrap();
        let r: Vec<f64> = fitted.iter().zip(&y).map(|(f, yi)| f - yi).collect();
        let grad = x.tr_matvec(&r).unwrap();
        let xty = x.tr_matvec(&y).unwrap();
        assert!(linalg::norm(&grad) <= 1e-8 * linalg::norm(&xty).max(1.0));
    }

    #[test]
    fn min_norm_is_shortest_interpolant() {
        let n = 6;
        let p = 20;
        let x = random_matrix(3, n, p);
        let y = random_vec(4, n);
        let fit = fit_min_norm(&x, &y).unwrap();
        let solver = GramPinv::new(&x).unwrap();
        for s in 0..20u64 {
            let w = random_vec(100 + s, p);
            // v = a + (I - X^+ X) w also satisfies X v = y.
            let xw = x.matvec(&w).unwrap();
            let proj = solver.pinv_apply(&xw).unwrap();
            let v: Vec<f64> = fit
                .coefficients
                .iter()
                .zip(w.iter().zip(&proj))
                .map(|(a, (wi, pi))| a + wi - pi)
                .collect();
            let xv = x.matvec(&v).unwrap();
            let feas: f64 = xv
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(feas <= 1e-8 * linalg::norm(&y));
            assert!(linalg::norm(&fit.coefficients) <= linalg::norm(&v) + 1e-9);
        }
    }

    #[test]
    fn pcr_equals_min_norm_on_noiseless_rank_k() {
        let model = FactorModel::new(
            random_matrix(7, 15, 3),
            DenseMatrix::identity(3),
            NoiseCov::Zero,
            vec![1.0, -1.0, 0.5],
            1.0,
        )
        .unwrap();
        let d = sample_dataset(&model, 10, NoiseLaw::Gaussian, &SeedSpec::new(5), 0, 0).unwrap();
        let mn = fit_min_norm(&d.x, &d.y).unwrap();
        let pcr = fit_pcr_empirical(&d.x, &d.y, 3).unwrap();
        let scale = linalg::norm(&mn.coefficients).max(1.0);
        for (a, b) in mn.coefficients.iter().zip(&pcr.coefficients) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn pcr_full_component_count_interpolates_tall() {
        let x = random_matrix(11, 8, 4);
        let y = random_vec(12, 8);
        let fit = fit_pcr_empirical(&x, &y, 4).unwrap();
        // k = min(n, p) = p on a full-rank tall design: ordinary least squares.
        let ols = fit_min_norm(&x, &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&ols.coefficients) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(fit_pcr_empirical(&x, &y, 0).is_err());
        assert!(fit_pcr_empirical(&x, &y, 5).is_err());
    }

    #[test]
    fn pcr_one_component_hand_case() {
        // Orthogonal-design 3x2 instance: columns (2,0,0) and (0,1,0).
        let x = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]])
            .unwrap();
        let y = vec![3.0, 5.0, 7.0];
        let fit = fit_pcr_empirical(&x, &y, 1).unwrap();
        // Top principal direction is e1; a^ = e1 (X e1)^+ y = (y1/2, 0).
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn stylized_pcr_matches_dense_route_and_oracle() {
        let model = FactorModel::new(
            random_matrix(21, 12, 2),
            DenseMatrix::identity(2),
            NoiseCov::Isotropic(0.7),
            vec![1.0, 2.0],
            1.0,
        )
        .unwrap();
        let d = sample_dataset(&model, 9, NoiseLaw::Gaussian, &SeedSpec::new(8), 0, 0).unwrap();
        let fit = fit_pcr_stylized(&model, &d.x, &d.y, 2).unwrap();

        // Dense-eigendecomposition route for the same eigenvectors.
        let eig = symmetric_eigen(&model.materialize_sigma_x().unwrap()).unwrap();
        let u = DenseMatrix::from_fn(12, 2, |i, j| eig.eigenvectors.get(i, j));
        let b = d.x.matmul(&u).unwrap();
        let w = GramPinv::new(&b).unwrap().pinv_apply(&d.y).unwrap();
        let dense_coef = u.matvec(&w).unwrap();
        let scale = linalg::norm(&dense_coef).max(1.0);
        for (a, bb) in fit.coefficients.iter().zip(&dense_coef) {
            assert!((a - bb).abs() <= 1e-8 * scale, "{a} vs {bb}");
        }
    }

    #[test]
    fn stylized_pcr_noiseless_matches_oracle_predictions() {
        let model = FactorModel::new(
            random_matrix(31, 10, 2),
            DenseMatrix::identity(2),
            NoiseCov::Zero,
            vec![0.5, -1.5],
            1.0,
        )
        .unwrap();
        let d = sample_dataset(&model, 8, NoiseLaw::Gaussian, &SeedSpec::new(9), 0, 0).unwrap();
        let fit = fit_pcr_stylized(&model, &d.x, &d.y, 2).unwrap();
        let oracle = fit_oracle_z(&d.z, &d.y).unwrap();
        // A' alpha = beta^ makes the two predictions equal on any X = A z.
        let a_t_alpha = model.loading().tr_matvec(&fit.coefficients).unwrap();
        let scale = linalg::norm(&oracle.beta_hat).max(1.0);
        for (a, b) in a_t_alpha.iter().zip(&oracle.beta_hat) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn stylized_pcr_full_dimension_equals_ols() {
        let model = FactorModel::new(
            random_matrix(41, 5, 2),
            DenseMatrix::identity(2),
            NoiseCov::Isotropic(1.0),
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        let d = sample_dataset(&model, 12, NoiseLaw::Gaussian, &SeedSpec::new(10), 0, 0).unwrap();
        let fit = fit_pcr_stylized(&model, &d.x, &d.y, 5).unwrap();
        let ols = fit_min_norm(&d.x, &d.y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&ols.coefficients) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn ridge_heavy_shrinkage_and_hand_case() {
        let x = random_matrix(13, 6, 4);
        let y = random_vec(14, 6);
        let fit = fit_ridge(&x, &y, 1e12).unwrap();
        assert!(linalg::norm(&fit.coefficients) <= 1e-6);

        // 2x3 instance solved symbolically.
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let y = vec![1.0, 2.0];
        let fit = fit_ridge(&x, &y, 1.0).unwrap();
        let expected = [0.125, 0.625, 0.75];
        for (a, e) in fit.coefficients.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-10);
        }
        // Primal and dual forms agree where both are feasible.
        let mut h = x.gram_right();
        for i in 0..3 {
            h.set(i, i, h.get(i, i) + 1.0);
        }
        let primal = solve_spd(&h, &x.tr_matvec(&y).unwrap()).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&primal) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn ridge_tiny_penalty_approaches_min_norm() {
        let x = random_matrix(15, 8, 32);
        let y = random_vec(16, 8);
        let ridge = fit_ridge(&x, &y, 1e-10).unwrap();
        let mn = fit_min_norm(&x, &y).unwrap();
        let scale = linalg::norm(&mn.coefficients);
        let mut dist = 0.0f64;
        for (a, b) in ridge.coefficients.iter().zip(&mn.coefficients) {
            dist += (a - b) * (a - b);
        }
        assert!(dist.sqrt() <= 1e-4 * scale);
    }

    #[test]
    fn ridge_limit_excess_risk_matches_min_norm() {
        // The interpolating limit: tiny-penalty ridge has the same excess
        // risk as the min-norm fit on wide designs, within 1%.
        let model = FactorModel::new(
            random_matrix(35, 90, 3).scale(3.0),
            DenseMatrix::identity(3),
            NoiseCov::Isotropic(1.0),
            vec![1.0, 1.0, 1.0],
            1.0,
        )
        .unwrap();
        let d = sample_dataset(&model, 12, NoiseLaw::Gaussian, &SeedSpec::new(13), 0, 0).unwrap();
        let mn = fit_min_norm(&d.x, &d.y).unwrap();
        let ridge = fit_ridge(&d.x, &d.y, 1e-8).unwrap();
        let oracle = model.sigma_eps() * model.sigma_eps();
        let excess_mn = model.risk_exact(&mn.coefficients).unwrap() - oracle;
        let excess_ridge = model.risk_exact(&ridge.coefficients).unwrap() - oracle;
        assert!(
            (excess_ridge - excess_mn).abs() <= 0.01 * excess_mn,
            "ridge {excess_ridge} vs min-norm {excess_mn}"
        );
    }

    #[test]
    fn lasso_zero_above_threshold() {
        let x = random_matrix(17, 10, 6);
        let y = random_vec(18, 10);
        let thresh = x
            .tr_matvec(&y)
            .unwrap()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            / 10.0;
        let fit = fit_lasso(&x, &y, thresh * 1.0001).unwrap();
        assert!(fit.coefficients.iter().all(|c| *c == 0.0));
        assert_eq!(fit.metadata["converged"], 1.0);
    }

    #[test]
    fn lasso_soft_thresholds_orthonormal_design() {
        // Columns scaled so X'X = n I (the 1/n-normalized orthonormal design).
        let n = 4;
        let root_n = 2.0;
        let x = DenseMatrix::from_fn(n, 3, |i, j| if i == j { root_n } else { 0.0 });
        let y = vec![2.0, -1.0, 0.3, 0.0];
        let lambda = 0.4;
        let fit = fit_lasso(&x, &y, lambda).unwrap();
        let xty = x.tr_matvec(&y).unwrap();
        for j in 0..3 {
            let expect = soft_threshold(xty[j] / n as f64, lambda);
            assert!((fit.coefficients[j] - expect).abs() < 1e-10);
        }
        assert!(lasso_kkt_violation(&x, &y, &fit.coefficients, lambda) <= 1e-6);
    }

    #[test]
    fn lasso_zero_penalty_is_ols() {
        let x = random_matrix(19, 12, 4);
        let y = random_vec(20, 12);
        let fit = fit_lasso(&x, &y, 0.0).unwrap();
        let ols = fit_min_norm(&x, &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&ols.coefficients) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn lasso_iteration_cap_reports_unconverged() {
        let x = random_matrix(21, 8, 16);
        let y = random_vec(22, 8);
        let fit = fit_lasso_with_cap(&x, &y, 1e-4, 1).unwrap();
        assert_eq!(fit.metadata["converged"], 0.0);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn lasso_kkt_at_convergence() {
        let x = random_matrix(23, 20, 12);
        let y = random_vec(24, 20);
        for lambda in [0.01, 0.1, 0.5] {
            let fit = fit_lasso(&x, &y, lambda).unwrap();
            assert_eq!(fit.metadata["converged"], 1.0);
            assert!(lasso_kkt_violation(&x, &y, &fit.coefficients, lambda) <= 1e-6);
        }
    }

    #[test]
    fn oracle_z_examples() {
        let z = DenseMatrix::identity(3);
        let y = vec![1.0, -2.0, 0.5];
        let fit = fit_oracle_z(&z, &y).unwrap();
        assert_eq!(fit.beta_hat, y);

        let z = random_matrix(25, 10, 3);
        let beta = vec![1.0, 0.5, -0.25];
        let y = z.matvec(&beta).unwrap();
        let fit = fit_oracle_z(&z, &y).unwrap();
        for (a, b) in fit.beta_hat.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_min_norm_prediction_equals_oracle() {
        let model = FactorModel::new(
            random_matrix(27, 14, 3),
            DenseMatrix::identity(3),
            NoiseCov::Zero,
            vec![1.0, 1.0, 1.0],
            1.0,
        )
        .unwrap();
        let d = sample_dataset(&model, 9, NoiseLaw::Gaussian, &SeedSpec::new(11), 0, 0).unwrap();
        let mn = fit_min_norm(&d.x, &d.y).unwrap();
        let oracle = fit_oracle_z(&d.z, &d.y).unwrap();
        let a_t_alpha = model.loading().tr_matvec(&mn.coefficients).unwrap();
        let scale = linalg::norm(&oracle.beta_hat).max(1.0);
        for (a, b) in a_t_alpha.iter().zip(&oracle.beta_hat) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn cv_single_and_duplicate_grids() {
        let x = random_matrix(29, 12, 5);
        let y = random_vec(30, 12);
        let plan = CvPlan {
            folds: 3,
            penalty_grid: vec![0.7],
            fold_seed: 1,
        };
        let out = cross_validate(PenalizedFit::Ridge, &x, &y, &plan).unwrap();
        assert_eq!(out.best_lambda, 0.7);

        let plan = CvPlan {
            folds: 3,
            penalty_grid: vec![0.7, 0.7, 0.7],
            fold_seed: 1,
        };
        let out = cross_validate(PenalizedFit::Lasso, &x, &y, &plan).unwrap();
        assert_eq!(out.best_lambda, 0.7);
    }

    #[test]
    fn cv_rejects_bad_plans() {
        let x = random_matrix(31, 4, 3);
        let y = random_vec(32, 4);
        let plan = CvPlan {
            folds: 5,
            penalty_grid: vec![0.1],
            fold_seed: 0,
        };
        assert!(cross_validate(PenalizedFit::Ridge, &x, &y, &plan).is_err());
        let plan = CvPlan {
            folds: 1,
            penalty_grid: vec![0.1],
            fold_seed: 0,
        };
        assert!(plan.validate().is_err());
    }

    #[test]
    fn cv_prefers_interior_penalty_on_noisy_overparameterized_data() {
        // Small-lambda ridge overfits when p is comparable to n and the
        // response is mostly noise; CV should not pick the smallest lambda.
        let mut interior = 0;
        let trials = 20;
        for s in 0..trials {
            let n = 24;
            let p = 20;
            let x = random_matrix(500 + s, n, p);
            let beta = vec![0.2; p];
            let noise = random_vec(700 + s, n);
            let y: Vec<f64> = x
                .matvec(&beta)
                .unwrap()
                .iter()
                .zip(&noise)
                .map(|(m, e)| m + 2.0 * e)
                .collect();
            let plan = CvPlan::log_grid_for(&x, &y, 5, 10, 1e-4, 1e2, s).unwrap();
            let out = cross_validate(PenalizedFit::Ridge, &x, &y, &plan).unwrap();
            if out.best_lambda > plan.penalty_grid[0] {
                interior += 1;
            }
        }
        assert!(interior >= 17, "interior optimum in only {interior}/{trials} runs");
    }

    #[test]
    fn cv_deterministic_given_seed() {
        let x = random_matrix(33, 15, 8);
        let y = random_vec(34, 15);
        let plan = CvPlan::log_grid_for(&x, &y, 5, 8, 1e-3, 1e1, 42).unwrap();
        let a = cross_validate(PenalizedFit::Lasso, &x, &y, &plan).unwrap();
        let b = cross_validate(PenalizedFit::Lasso, &x, &y, &plan).unwrap();
        assert_eq!(a.best_lambda, b.best_lambda);
        assert_eq!(a.cv_curve, b.cv_curve);
    }
}
