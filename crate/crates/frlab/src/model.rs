//! Factor-regression model specification and exact population-level
//! quantities.
//!
//! The data-generating law is `X = A Z + E`, `y = Z' beta + eps` with latent
//! `Z` of dimension `K`, loading `A` (p x K), factor covariance `Sigma_Z`,
//! feature-noise covariance `Sigma_E`, and response-noise level `sigma_eps`.
//! Everything here is population-exact: the feature covariance functionals
//! route through the low-rank-plus-noise structure, so no p x p matrix is
//! formed unless the noise covariance is itself dense (gated by
//! [`DENSE_CAP`]).

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    self, psd_sqrt, symmetric_eigen, DenseMatrix, GramPinv, RankPolicy, SymmetricEigen,
};

/// Largest p for which a dense p x p object may be materialized.
pub const DENSE_CAP: usize = 4096;

/// Covariance of the feature noise E.
#[derive(Debug, Clone)]
pub enum NoiseCov {
    Zero,
    Isotropic(f64),
    Diagonal(Vec<f64>),
    Dense(DenseMatrix),
}

impl NoiseCov {
    fn validate(&self, p: usize) -> Result<()> {
        match self {
            NoiseCov::Zero => Ok(()),
            NoiseCov::Isotropic(v) => {
                if *v > 0.0 && v.is_finite() {
                    Ok(())
                } else {
                    Err(Error::ContractViolation(
                        "isotropic noise variance must be positive".into(),
                    ))
                }
            }
            NoiseCov::Diagonal(d) => {
                if d.len() != p {
                    return Err(Error::DimensionMismatch {
                        context: "NoiseCov::Diagonal",
                        expected: format!("{p}"),
                        got: format!("{}", d.len()),
                    });
                }
                if d.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::ContractViolation(
                        "diagonal noise variances must be positive".into(),
                    ))
                }
            }
            NoiseCov::Dense(m) => {
                if m.rows() != p || m.cols() != p {
                    return Err(Error::DimensionMismatch {
                        context: "NoiseCov::Dense",
                        expected: format!("{p}x{p}"),
                        got: format!("{}x{}", m.rows(), m.cols()),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NoiseCov::Zero)
    }
}

/// Population specification of the factor regression law.
#[derive(Debug, Clone)]
pub struct FactorModel {
    p: usize,
    k: usize,
    loading: DenseMatrix,
    factor_cov: DenseMatrix,
    noise_cov: NoiseCov,
    beta: Vec<f64>,
    sigma_eps: f64,
    assert_full_rank: bool,

    // Derived quantities fixed at construction.
    factor_sqrt: DenseMatrix,
    bar_a: DenseMatrix,
    /// Eigen-pairs of bar_a' bar_a (descending): the nonzero spectrum of
    /// A Sigma_Z A'.
    signal_eigs: Vec<f64>,
    signal_vecs: DenseMatrix,
    /// Eigenvalues of A'A, descending.
    loading_gram_eigs: Vec<f64>,
    factor_eigs: Vec<f64>,
    noise_eigen: Option<SymmetricEigen>,
    noise_sqrt: Option<DenseMatrix>,
    loading_full_rank: bool,
    factor_full_rank: bool,
}

impl FactorModel {
    /// Builds a model and requires `A` and `Sigma_Z` to have full rank `K`.
    pub fn new(
        loading: DenseMatrix,
        factor_cov: DenseMatrix,
        noise_cov: NoiseCov,
        beta: Vec<f64>,
        sigma_eps: f64,
    ) -> Result<Self> {
        let m = Self::build(loading, factor_cov, noise_cov, beta, sigma_eps, true)?;
        m.require_full_rank()?;
        Ok(m)
    }

    /// Builds a model that admits rank-deficient `A` (e.g. `A = 0` for the
    /// pure-noise null-risk regime).
    pub fn new_allowing_degenerate(
        loading: DenseMatrix,
        factor_cov: DenseMatrix,
        noise_cov: NoiseCov,
        beta: Vec<f64>,
        sigma_eps: f64,
    ) -> Result<Self> {
        Self::build(loading, factor_cov, noise_cov, beta, sigma_eps, false)
    }

    fn build(
        loading: DenseMatrix,
        factor_cov: DenseMatrix,
        noise_cov: NoiseCov,
        beta: Vec<f64>,
        sigma_eps: f64,
        assert_full_rank: bool,
    ) -> Result<Self> {
        let p = loading.rows();
        let k = loading.cols();
        if k > p {
            return Err(Error::ContractViolation(format!(
                "factor count K = {k} exceeds feature count p = {p}"
            )));
        }
        if factor_cov.rows() != k || factor_cov.cols() != k {
            return Err(Error::DimensionMismatch {
                context: "FactorModel factor_cov",
                expected: format!("{k}x{k}"),
                got: format!("{}x{}", factor_cov.rows(), factor_cov.cols()),
            });
        }
        if beta.len() != k {
            return Err(Error::DimensionMismatch {
                context: "FactorModel beta",
                expected: format!("{k}"),
                got: format!("{}", beta.len()),
            });
        }
        if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
            return Err(Error::ContractViolation(
                "sigma_eps must be a finite nonnegative real".into(),
            ));
        }
        noise_cov.validate(p)?;

        let factor_sqrt = psd_sqrt(&factor_cov)?;
        let bar_a = loading.matmul(&factor_sqrt)?;
        let bar_gram = bar_a.gram_right();
        let bar_eig = symmetric_eigen(&bar_gram)?;
        let signal_eigs: Vec<f64> = bar_eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let loading_gram_eigs: Vec<f64> = symmetric_eigen(&loading.gram_right())?
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0))
            .collect();
        let factor_eigs: Vec<f64> = symmetric_eigen(&factor_cov)?
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0))
            .collect();

        let (noise_eigen, noise_sqrt) = match &noise_cov {
            NoiseCov::Dense(m) => {
                let eig = symmetric_eigen(m)?;
                let scale = eig.eigenvalues[0].abs();
                if eig.eigenvalues.iter().any(|l| *l < -1e-10 * scale) {
                    return Err(Error::NotPsd {
                        lambda_min: *eig.eigenvalues.last().unwrap(),
                    });
                }
                let sqrt = psd_sqrt(m)?;
                (Some(eig), Some(sqrt))
            }
            _ => (None, None),
        };

        let loading_full_rank =
            loading_gram_eigs[k - 1] > (f64::EPSILON * p as f64).powi(2) * loading_gram_eigs[0]
                && loading_gram_eigs[k - 1] > 0.0;
        let factor_full_rank = factor_eigs[k - 1] > f64::EPSILON * k as f64 * factor_eigs[0]
            && factor_eigs[k - 1] > 0.0;

        Ok(Self {
            p,
            k,
            loading,
            factor_cov,
            noise_cov,
            beta,
            sigma_eps,
            assert_full_rank,
            factor_sqrt,
            bar_a,
            signal_eigs,
            signal_vecs: bar_eig.eigenvectors,
            loading_gram_eigs,
            factor_eigs,
            noise_eigen,
            noise_sqrt,
            loading_full_rank,
            factor_full_rank,
        })
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if !self.loading_full_rank {
            return Err(Error::ModelDegenerate(
                "loading matrix A is rank-deficient (rank(A) = K assumed)".into(),
            ));
        }
        if !self.factor_full_rank {
            return Err(Error::ModelDegenerate(
                "factor covariance Sigma_Z is rank-deficient (rank(Sigma_Z) = K assumed)".into(),
            ));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn loading(&self) -> &DenseMatrix {
        &self.loading
    }

    pub fn factor_cov(&self) -> &DenseMatrix {
        &self.factor_cov
    }

    pub fn factor_sqrt(&self) -> &DenseMatrix {
        &self.factor_sqrt
    }

    pub fn noise_cov(&self) -> &NoiseCov {
        &self.noise_cov
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn is_full_rank(&self) -> bool {
        self.loading_full_rank && self.factor_full_rank
    }

    /// lambda_K(A Sigma_Z A').
    pub fn lambda_k_signal(&self) -> f64 {
        self.signal_eigs[self.k - 1]
    }

    /// lambda_K(A'A).
    pub fn lambda_k_loading_gram(&self) -> f64 {
        self.loading_gram_eigs[self.k - 1]
    }

    /// Signal-to-noise ratio xi = lambda_K(A Sigma_Z A') / ||Sigma_E||,
    /// infinite when Sigma_E = 0.
    pub fn xi(&self) -> f64 {
        let noise = self.noise_opnorm();
        if noise == 0.0 {
            f64::INFINITY
        } else {
            self.lambda_k_signal() / noise
        }
    }

    pub fn noise_opnorm(&self) -> f64 {
        match &self.noise_cov {
            NoiseCov::Zero => 0.0,
            NoiseCov::Isotropic(v) => *v,
            NoiseCov::Diagonal(d) => d.iter().fold(0.0f64, |m, v| m.max(*v)),
            NoiseCov::Dense(_) => self.noise_eigen.as_ref().unwrap().eigenvalues[0].max(0.0),
        }
    }

    pub fn noise_lambda_min(&self) -> f64 {
        match &self.noise_cov {
            NoiseCov::Zero => 0.0,
            NoiseCov::Isotropic(v) => *v,
            NoiseCov::Diagonal(d) => d.iter().fold(f64::INFINITY, |m, v| m.min(*v)),
            NoiseCov::Dense(_) => self
                .noise_eigen
                .as_ref()
                .unwrap()
                .eigenvalues
                .last()
                .copied()
                .unwrap()
                .max(0.0),
        }
    }

    pub fn noise_trace(&self) -> f64 {
        match &self.noise_cov {
            NoiseCov::Zero => 0.0,
            NoiseCov::Isotropic(v) => *v * self.p as f64,
            NoiseCov::Diagonal(d) => d.iter().sum(),
            NoiseCov::Dense(m) => (0..self.p).map(|i| m.get(i, i)).sum(),
        }
    }

    /// Effective rank of Sigma_E with the `r_e(0) = 1` convention.
    /// Returns `(value, degenerate)`.
    pub fn noise_effective_rank(&self) -> (f64, bool) {
        if self.noise_cov.is_zero() {
            (1.0, true)
        } else {
            (self.noise_trace() / self.noise_opnorm(), false)
        }
    }

    /// Condition number of Sigma_E, when invertible.
    pub fn noise_condition_number(&self) -> Result<f64> {
        let lo = self.noise_lambda_min();
        let hi = self.noise_opnorm();
        if lo <= f64::EPSILON * self.p as f64 * hi || hi == 0.0 {
            return Err(Error::Singular {
                context: "noise condition number",
            });
        }
        Ok(hi / lo)
    }

    fn noise_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.noise_cov {
            NoiseCov::Zero => vec![0.0; v.len()],
            NoiseCov::Isotropic(s) => v.iter().map(|x| s * x).collect(),
            NoiseCov::Diagonal(d) => v.iter().zip(d).map(|(x, di)| x * di).collect(),
            NoiseCov::Dense(m) => m.matvec(v).expect("dimension validated"),
        }
    }

    fn noise_quadform(&self, v: &[f64]) -> f64 {
        match &self.noise_cov {
            NoiseCov::Zero => 0.0,
            NoiseCov::Isotropic(s) => s * linalg::norm_sq(v),
            NoiseCov::Diagonal(d) => v.iter().zip(d).map(|(x, di)| x * x * di).sum(),
            NoiseCov::Dense(m) => linalg::dot(v, &m.matvec(v).expect("dimension validated")),
        }
    }

    /// Sigma_E^{1/2} v.
    pub fn noise_sqrt_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.noise_cov {
            NoiseCov::Zero => vec![0.0; v.len()],
            NoiseCov::Isotropic(s) => {
                let r = s.sqrt();
                v.iter().map(|x| r * x).collect()
            }
            NoiseCov::Diagonal(d) => v.iter().zip(d).map(|(x, di)| x * di.sqrt()).collect(),
            NoiseCov::Dense(_) => self
                .noise_sqrt
                .as_ref()
                .unwrap()
                .matvec(v)
                .expect("dimension validated"),
        }
    }

    /// Sigma_E^{-1} v for invertible noise.
    fn noise_inv_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &self.noise_cov {
            NoiseCov::Zero => Err(Error::Singular {
                context: "noise inverse",
            }),
            NoiseCov::Isotropic(s) => Ok(v.iter().map(|x| x / s).collect()),
            NoiseCov::Diagonal(d) => Ok(v.iter().zip(d).map(|(x, di)| x / di).collect()),
            NoiseCov::Dense(_) => {
                let eig = self.noise_eigen.as_ref().unwrap();
                let lo = *eig.eigenvalues.last().unwrap();
                if lo <= f64::EPSILON * self.p as f64 * eig.eigenvalues[0] {
                    return Err(Error::Singular {
                        context: "noise inverse",
                    });
                }
                let t = eig.eigenvectors.tr_matvec(v)?;
                let t: Vec<f64> = t
                    .iter()
                    .zip(&eig.eigenvalues)
                    .map(|(x, l)| x / l)
                    .collect();
                eig.eigenvectors.matvec(&t)
            }
        }
    }

    fn noise_is_invertible(&self) -> bool {
        match &self.noise_cov {
            NoiseCov::Zero => false,
            NoiseCov::Isotropic(_) | NoiseCov::Diagonal(_) => true,
            NoiseCov::Dense(_) => {
                let eig = self.noise_eigen.as_ref().unwrap();
                *eig.eigenvalues.last().unwrap() > f64::EPSILON * self.p as f64 * eig.eigenvalues[0]
            }
        }
    }

    /// Sigma_X v through the low-rank-plus-noise structure.
    pub fn sigma_x_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.p {
            return Err(Error::DimensionMismatch {
                context: "sigma_x_apply",
                expected: format!("{}", self.p),
                got: format!("{}", v.len()),
            });
        }
        let t = self.loading.tr_matvec(v)?;
        let t = self.factor_cov.matvec(&t)?;
        let mut out = self.loading.matvec(&t)?;
        let noise = self.noise_apply(v);
        for (o, n) in out.iter_mut().zip(noise) {
            *o += n;
        }
        Ok(out)
    }

    /// v' Sigma_X v = ||Sigma_Z^{1/2} A' v||^2 + v' Sigma_E v.
    pub fn sigma_x_quadform(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.p {
            return Err(Error::DimensionMismatch {
                context: "sigma_x_quadform",
                expected: format!("{}", self.p),
                got: format!("{}", v.len()),
            });
        }
        let t = self.bar_a.tr_matvec(v)?;
        Ok(linalg::norm_sq(&t) + self.noise_quadform(v))
    }

    /// Sigma_{Xy} = A Sigma_Z beta.
    pub fn sigma_xy(&self) -> Vec<f64> {
        let t = self.factor_cov.matvec(&self.beta).expect("K matches");
        self.loading.matvec(&t).expect("K matches")
    }

    /// tr(Sigma_X) = tr(A Sigma_Z A') + tr(Sigma_E).
    pub fn sigma_x_trace(&self) -> f64 {
        self.signal_eigs.iter().sum::<f64>() + self.noise_trace()
    }

    /// ||Sigma_X||. Analytic for zero/isotropic noise; dense or power
    /// iteration otherwise.
    pub fn sigma_x_opnorm(&self) -> Result<f64> {
        match &self.noise_cov {
            NoiseCov::Zero => Ok(self.signal_eigs[0]),
            NoiseCov::Isotropic(s) => Ok(self.signal_eigs[0] + s),
            _ if self.p <= DENSE_CAP => {
                let eig = symmetric_eigen(&self.materialize_sigma_x()?)?;
                Ok(eig.eigenvalues[0])
            }
            _ => self.opnorm_power_iteration(),
        }
    }

    fn opnorm_power_iteration(&self) -> Result<f64> {
        let p = self.p as f64;
        let mut v = vec![1.0 / p.sqrt(); self.p];
        let mut lambda = 0.0f64;
        for _ in 0..20_000 {
            let w = self.sigma_x_apply(&v)?;
            let norm = linalg::norm(&w);
            if norm == 0.0 {
                return Ok(0.0);
            }
            let next = linalg::dot(&v, &w);
            let done = (next - lambda).abs() <= 1e-14 * next.abs().max(1.0);
            lambda = next;
            v = w.iter().map(|x| x / norm).collect();
            if done {
                break;
            }
        }
        Ok(lambda)
    }

    /// Effective rank of Sigma_X.
    pub fn sigma_x_effective_rank(&self) -> Result<f64> {
        let opnorm = self.sigma_x_opnorm()?;
        if opnorm == 0.0 {
            return Ok(1.0);
        }
        Ok(self.sigma_x_trace() / opnorm)
    }

    /// Dense Sigma_X = A Sigma_Z A' + Sigma_E, gated by [`DENSE_CAP`].
    pub fn materialize_sigma_x(&self) -> Result<DenseMatrix> {
        if self.p > DENSE_CAP {
            return Err(Error::UnsupportedSize {
                p: self.p,
                cap: DENSE_CAP,
            });
        }
        let mut m = self.bar_a.gram_left();
        match &self.noise_cov {
            NoiseCov::Zero => {}
            NoiseCov::Isotropic(s) => {
                for i in 0..self.p {
                    m.set(i, i, m.get(i, i) + s);
                }
            }
            NoiseCov::Diagonal(d) => {
                for i in 0..self.p {
                    m.set(i, i, m.get(i, i) + d[i]);
                }
            }
            NoiseCov::Dense(e) => {
                m = m.add(e)?;
            }
        }
        m.symmetrize();
        Ok(m)
    }

    /// Full spectrum of Sigma_X, descending, together with its provenance.
    pub fn sigma_x_eigenvalues(&self) -> Result<(Vec<f64>, SpectrumProvenance)> {
        match &self.noise_cov {
            NoiseCov::Zero => {
                let mut eigs = self.signal_eigs.clone();
                eigs.resize(self.p, 0.0);
                Ok((eigs, SpectrumProvenance::IsotropicShift))
            }
            NoiseCov::Isotropic(s) => {
                let mut eigs: Vec<f64> = self.signal_eigs.iter().map(|l| l + s).collect();
                eigs.resize(self.p, *s);
                Ok((eigs, SpectrumProvenance::IsotropicShift))
            }
            _ => {
                let eig = symmetric_eigen(&self.materialize_sigma_x()?)?;
                Ok((eig.eigenvalues, SpectrumProvenance::Dense))
            }
        }
    }

    /// Top-k eigenvectors of Sigma_X when they are computable: via the
    /// K-dimensional core for zero/isotropic noise with k <= K, densely
    /// below [`DENSE_CAP`] otherwise.
    pub fn sigma_x_top_eigenvectors(&self, k: usize) -> Result<DenseMatrix> {
        if k == 0 || k > self.p {
            return Err(Error::ContractViolation(format!(
                "requested {k} eigenvectors of a {p}x{p} covariance",
                p = self.p
            )));
        }
        let shortcut = matches!(
            self.noise_cov,
            NoiseCov::Zero | NoiseCov::Isotropic(_)
        ) && k <= self.k;
        if shortcut {
            // Columns Ā v_i / sqrt(d_i) span the top of Ā Ā'; adding an
            // isotropic term shifts eigenvalues without moving eigenvectors.
            let mut cols = Vec::with_capacity(k);
            for j in 0..k {
                let d = self.signal_eigs[j];
                if d <= f64::EPSILON * self.signal_eigs[0].max(1.0) * self.p as f64 {
                    return Err(Error::ModelDegenerate(format!(
                        "signal eigenvalue {j} vanishes; population eigenvector undefined"
                    )));
                }
                let v = self.signal_vecs.col(j);
                let u = self.bar_a.matvec(&v)?;
                cols.push(u.iter().map(|x| x / d.sqrt()).collect::<Vec<f64>>());
            }
            let mut m = DenseMatrix::zeros(self.p, k);
            for (j, c) in cols.iter().enumerate() {
                for i in 0..self.p {
                    m.set(i, j, c[i]);
                }
            }
            // Same sign convention as the dense route.
            let mut m = m;
            linalg::canonicalize_column_signs(&mut m);
            Ok(m)
        } else {
            let eig = symmetric_eigen(&self.materialize_sigma_x()?)?;
            Ok(DenseMatrix::from_fn(self.p, k, |i, j| {
                eig.eigenvectors.get(i, j)
            }))
        }
    }

    /// Best linear predictor alpha* = Sigma_X^+ Sigma_{Xy}.
    pub fn best_linear_predictor(&self) -> Result<Vec<f64>> {
        if self.beta.iter().all(|b| *b == 0.0) {
            return Ok(vec![0.0; self.p]);
        }
        if self.noise_is_invertible() {
            return self.alpha_star_woodbury();
        }
        if self.noise_cov.is_zero() && self.loading_full_rank && self.factor_full_rank {
            // alpha* = A^{+T} beta = A (A'A)^{-1} beta.
            let gram = self.loading.gram_right();
            let w = solve_spd(&gram, &self.beta)?;
            return self.loading.matvec(&w);
        }
        self.best_linear_predictor_dense()
    }

    /// Woodbury route: alpha* = Sigma_E^{-1} Abar Gbar^{-1} betabar with
    /// Gbar = I_K + Abar' Sigma_E^{-1} Abar.
    fn alpha_star_woodbury(&self) -> Result<Vec<f64>> {
        let beta_bar = self.factor_sqrt.matvec(&self.beta)?;
        let w = self.gbar_solve(&beta_bar)?;
        let t = self.bar_a.matvec(&w)?;
        self.noise_inv_apply(&t)
    }

    /// Solves Gbar x = rhs where Gbar = I_K + Abar' Sigma_E^{-1} Abar.
    fn gbar_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut m = DenseMatrix::zeros(self.k, self.k);
        // Abar' Sigma_E^{-1} Abar, column by column.
        for j in 0..self.k {
            let col = self.bar_a.col(j);
            let inv_col = self.noise_inv_apply(&col)?;
            let t = self.bar_a.tr_matvec(&inv_col)?;
            for i in 0..self.k {
                m.set(i, j, t[i]);
            }
        }
        m.symmetrize();
        for i in 0..self.k {
            m.set(i, i, m.get(i, i) + 1.0);
        }
        solve_spd(&m, rhs)
    }

    /// Dense fallback alpha* = Sigma_X^+ Sigma_{Xy}, gated by [`DENSE_CAP`].
    pub fn best_linear_predictor_dense(&self) -> Result<Vec<f64>> {
        let sx = self.materialize_sigma_x()?;
        let pinv = linalg::pseudoinverse(&sx, &RankPolicy::for_shape(self.p, self.p))?;
        pinv.matvec(&self.sigma_xy())
    }

    /// R(alpha) = alpha' Sigma_X alpha - 2 alpha' Sigma_{Xy} + sigma_y^2,
    /// grouped as sigma_eps^2 + ||Sigma_Z^{1/2}(A'alpha - beta)||^2
    /// + alpha' Sigma_E alpha.
    pub fn risk_exact(&self, alpha: &[f64]) -> Result<f64> {
        if alpha.len() != self.p {
            return Err(Error::DimensionMismatch {
                context: "risk_exact",
                expected: format!("{}", self.p),
                got: format!("{}", alpha.len()),
            });
        }
        let mut d = self.loading.tr_matvec(alpha)?;
        for (di, bi) in d.iter_mut().zip(&self.beta) {
            *di -= bi;
        }
        let s = self.factor_sqrt.matvec(&d)?;
        Ok(self.sigma_eps * self.sigma_eps + linalg::norm_sq(&s) + self.noise_quadform(alpha))
    }

    /// Latent-oracle risk of predicting with Z' b: sigma_eps^2 + ||b - beta||^2_{Sigma_Z}.
    pub fn latent_risk(&self, b: &[f64]) -> Result<f64> {
        if b.len() != self.k {
            return Err(Error::DimensionMismatch {
                context: "latent_risk",
                expected: format!("{}", self.k),
                got: format!("{}", b.len()),
            });
        }
        let d: Vec<f64> = b.iter().zip(&self.beta).map(|(x, y)| x - y).collect();
        let s = self.factor_sqrt.matvec(&d)?;
        Ok(self.sigma_eps * self.sigma_eps + linalg::norm_sq(&s))
    }

    /// sigma_y^2 = beta' Sigma_Z beta + sigma_eps^2: the null risk R(0).
    pub fn null_risk(&self) -> f64 {
        let s = self.factor_sqrt.matvec(&self.beta).expect("K matches");
        linalg::norm_sq(&s) + self.sigma_eps * self.sigma_eps
    }

    /// Exact population quantities for this model.
    pub fn population_summary(&self) -> Result<PopulationSummary> {
        if self.assert_full_rank {
            self.require_full_rank()?;
        }
        let beta_bar = self.factor_sqrt.matvec(&self.beta)?;
        let beta_sz_norm_sq = linalg::norm_sq(&beta_bar);
        let oracle_risk = self.sigma_eps * self.sigma_eps;
        let null_risk = beta_sz_norm_sq + oracle_risk;
        let xi = self.xi();

        let alpha_star = self.best_linear_predictor()?;
        let alpha_star_norm_sq = linalg::norm_sq(&alpha_star);
        let alpha_star_sx_norm_sq = self.sigma_x_quadform(&alpha_star)?;

        // Exact benchmark gap R(alpha*) - sigma_eps^2.
        let gap = if self.noise_is_invertible() {
            let w = self.gbar_solve(&beta_bar)?;
            linalg::dot(&beta_bar, &w)
        } else if self.noise_cov.is_zero() && self.is_full_rank() {
            0.0
        } else {
            self.risk_exact(&alpha_star)? - oracle_risk
        };
        let risk_star = oracle_risk + gap;

        // Benchmark-gap bracket, available when A, Sigma_Z,
        // Sigma_E are all full rank; otherwise the exact gap stands in.
        let (gap_lower, gap_upper) = if self.noise_cov.is_zero() && self.is_full_rank() {
            (0.0, 0.0)
        } else if self.noise_is_invertible() && self.is_full_rank() {
            let q = self.beta_noise_gram_quadform()?;
            let lower = if xi.is_infinite() {
                q
            } else {
                xi / (1.0 + xi) * q
            };
            (lower, q)
        } else {
            (gap, gap)
        };

        let (re_sigma_e, re_sigma_e_degenerate) = self.noise_effective_rank();

        Ok(PopulationSummary {
            sigma_x_opnorm: self.sigma_x_opnorm()?,
            lambda_k_signal: self.lambda_k_signal(),
            xi,
            re_sigma_x: self.sigma_x_effective_rank()?,
            re_sigma_e,
            re_sigma_e_degenerate,
            alpha_star,
            alpha_star_norm_sq,
            alpha_star_sx_norm_sq,
            risk_star,
            oracle_risk,
            null_risk,
            beta_sz_norm_sq,
            gap_lower,
            gap_upper,
        })
    }

    /// beta' (A' Sigma_E^{-1} A)^{-1} beta, the gap-bracket pivot.
    fn beta_noise_gram_quadform(&self) -> Result<f64> {
        let mut m = DenseMatrix::zeros(self.k, self.k);
        for j in 0..self.k {
            let col = self.loading.col(j);
            let inv_col = self.noise_inv_apply(&col)?;
            let t = self.loading.tr_matvec(&inv_col)?;
            for i in 0..self.k {
                m.set(i, j, t[i]);
            }
        }
        m.symmetrize();
        let w = solve_spd(&m, &self.beta)?;
        Ok(linalg::dot(&self.beta, &w))
    }

    /// Per-replicate bias/variance pieces of the excess-risk decomposition.
    pub fn excess_decomposition(
        &self,
        x: &DenseMatrix,
        z: &DenseMatrix,
        eps: &[f64],
    ) -> Result<ExcessDecomposition> {
        let n = x.rows();
        if x.cols() != self.p || z.rows() != n || z.cols() != self.k || eps.len() != n {
            return Err(Error::DimensionMismatch {
                context: "excess_decomposition",
                expected: format!("X {n}x{}, Z {n}x{}, eps {n}", self.p, self.k),
                got: format!(
                    "X {}x{}, Z {}x{}, eps {}",
                    x.rows(),
                    x.cols(),
                    z.rows(),
                    z.cols(),
                    eps.len()
                ),
            });
        }
        let solver = GramPinv::new(x)?;

        // X^+ Z beta and X^+ eps.
        let zb = z.matvec(&self.beta)?;
        let xpz_beta = solver.pinv_apply(&zb)?;
        let xp_eps = solver.pinv_apply(eps)?;

        let b1 = linalg::norm_sq(&self.noise_sqrt_apply(&xpz_beta));
        let v1 = linalg::norm_sq(&self.noise_sqrt_apply(&xp_eps));

        // Sigma_Z^{1/2}(A' X^+ Z - I_K) beta = Sigma_Z^{1/2}(A' X^+ Z beta - beta).
        let mut d = self.loading.tr_matvec(&xpz_beta)?;
        for (di, bi) in d.iter_mut().zip(&self.beta) {
            *di -= bi;
        }
        let b2 = linalg::norm_sq(&self.factor_sqrt.matvec(&d)?);

        let t = self.loading.tr_matvec(&xp_eps)?;
        let v2 = linalg::norm_sq(&self.factor_sqrt.matvec(&t)?);

        // Exact excess of the min-norm fit a^ = X^+ y.
        let y: Vec<f64> = zb.iter().zip(eps).map(|(a, b)| a + b).collect();
        let a_hat = solver.pinv_apply(&y)?;
        let exact_excess = self.risk_exact(&a_hat)? - self.sigma_eps * self.sigma_eps;

        Ok(ExcessDecomposition {
            b1,
            b2,
            v1,
            v2,
            exact_excess,
        })
    }

    /// Checks the three spectrum statements for Sigma_X under the factor
    /// structure and returns the measured eigenvalues.
    pub fn spectrum_diagnostics(&self) -> Result<SpectrumDiagnostics> {
        let (eigs, _) = self.sigma_x_eigenvalues()?;
        let slack = 1e-9 * eigs[0].max(1.0);
        let noise_floor = self.noise_lambda_min();
        let lambda_floor_ok = eigs.iter().all(|l| *l >= noise_floor - slack);
        let lambda_k_growth = eigs[self.k - 1]
            >= self.factor_eigs[self.k - 1] * self.loading_gram_eigs[self.k - 1] - slack;
        let noise_top = self.noise_opnorm();
        let tail_bounded = eigs.iter().skip(self.k).all(|l| *l <= noise_top + slack);
        Ok(SpectrumDiagnostics {
            lambda_floor_ok,
            lambda_k_growth,
            tail_bounded,
            eigenvalues: eigs,
        })
    }

    /// Cluster signal-to-noise lower bound min_a |I_a| lambda_K(Sigma_Z) / ||Sigma_E||
    /// for 0/±1 assignment loadings.
    pub fn cluster_snr_lower_bound(&self) -> Result<f64> {
        let mut sizes = vec![0usize; self.k];
        for i in 0..self.p {
            let mut nonzero: Option<usize> = None;
            for j in 0..self.k {
                let v = self.loading.get(i, j);
                if v != 0.0 {
                    if v.abs() != 1.0 || nonzero.is_some() {
                        return Err(Error::ContractViolation(
                            "loading is not a 0/±1 assignment matrix".into(),
                        ));
                    }
                    nonzero = Some(j);
                }
            }
            if let Some(j) = nonzero {
                sizes[j] += 1;
            }
        }
        let min_size = *sizes.iter().min().unwrap() as f64;
        let noise = self.noise_opnorm();
        if noise == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(min_size * self.factor_eigs[self.k - 1] / noise)
    }

    /// Draws Gaussian samples, regresses out alpha*, and reports the largest
    /// empirical |corr(X_j, eta)| together with the analytic residual of
    /// Sigma_X alpha* = Sigma_{Xy}.
    pub fn gaussian_residual_check(
        &self,
        sample_count: usize,
        seed: u64,
    ) -> Result<GaussianResidualCheck> {
        let alpha_star = self.best_linear_predictor()?;

        // Analytic part.
        let lhs = self.sigma_x_apply(&alpha_star)?;
        let rhs = self.sigma_xy();
        let scale = rhs
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(lhs.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .max(1.0);
        let identity_gap = lhs
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;

        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let mut sxe = vec![0.0; self.p];
        let mut sxx = vec![0.0; self.p];
        let mut see = 0.0;
        for _ in 0..sample_count {
            let zt: Vec<f64> = (0..self.k).map(|_| normal.sample(&mut rng)).collect();
            let z = self.factor_sqrt.matvec(&zt)?;
            let et: Vec<f64> = (0..self.p).map(|_| normal.sample(&mut rng)).collect();
            let e = self.noise_sqrt_apply(&et);
            let eps: f64 = {
                let g: f64 = normal.sample(&mut rng);
                self.sigma_eps * g
            };
            let mut x = self.loading.matvec(&z)?;
            for (xi, ei) in x.iter_mut().zip(&e) {
                *xi += ei;
            }
            let y = linalg::dot(&z, &self.beta) + eps;
            let eta = y - linalg::dot(&x, &alpha_star);
            for j in 0..self.p {
                sxe[j] += x[j] * eta;
                sxx[j] += x[j] * x[j];
            }
            see += eta * eta;
        }
        let mut max_abs_correlation = 0.0f64;
        for j in 0..self.p {
            let denom = (sxx[j] * see).sqrt();
            if denom > 0.0 {
                max_abs_correlation = max_abs_correlation.max((sxe[j] / denom).abs());
            }
        }
        Ok(GaussianResidualCheck {
            max_abs_correlation,
            identity_gap,
        })
    }
}

/// How a full Sigma_X spectrum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumProvenance {
    /// Exact shift of the K signal eigenvalues (zero or isotropic noise).
    IsotropicShift,
    /// Dense eigendecomposition below the size cap.
    Dense,
}

/// Derived exact population quantities.
#[derive(Debug, Clone)]
pub struct PopulationSummary {
    pub sigma_x_opnorm: f64,
    pub lambda_k_signal: f64,
    pub xi: f64,
    pub re_sigma_x: f64,
    pub re_sigma_e: f64,
    pub re_sigma_e_degenerate: bool,
    pub alpha_star: Vec<f64>,
    pub alpha_star_norm_sq: f64,
    pub alpha_star_sx_norm_sq: f64,
    pub risk_star: f64,
    pub oracle_risk: f64,
    pub null_risk: f64,
    pub beta_sz_norm_sq: f64,
    pub gap_lower: f64,
    pub gap_upper: f64,
}

impl PopulationSummary {
    /// Named-real view used by the bound calculators' input maps.
    pub fn as_inputs(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("xi".into(), self.xi);
        m.insert("re_sigma_x".into(), self.re_sigma_x);
        m.insert("re_sigma_e".into(), self.re_sigma_e);
        m.insert("beta_sz_norm_sq".into(), self.beta_sz_norm_sq);
        m.insert("alpha_star_norm_sq".into(), self.alpha_star_norm_sq);
        m.insert("sigma_x_opnorm".into(), self.sigma_x_opnorm);
        m.insert("risk_star".into(), self.risk_star);
        m.insert("null_risk".into(), self.null_risk);
        m
    }
}

/// Pieces of the bias/variance split of one replicate's excess risk.
#[derive(Debug, Clone, Copy)]
pub struct ExcessDecomposition {
    pub b1: f64,
    pub b2: f64,
    pub v1: f64,
    pub v2: f64,
    pub exact_excess: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumDiagnostics {
    pub lambda_floor_ok: bool,
    pub lambda_k_growth: bool,
    pub tail_bounded: bool,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianResidualCheck {
    pub max_abs_correlation: f64,
    pub identity_gap: f64,
}

/// Solves a symmetric positive-definite system by Cholesky, falling back to
/// the eigendecomposition pseudo-solve when the factorization fails.
pub(crate) fn solve_spd(m: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    debug_assert!(m.is_square());
    let n = m.rows();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_spd",
            expected: format!("{n}"),
            got: format!("{}", rhs.len()),
        });
    }
    let na_m = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
    if let Some(chol) = nalgebra::linalg::Cholesky::new(na_m) {
        let b = nalgebra::DVector::from_column_slice(rhs);
        let x = chol.solve(&b);
        return Ok(x.iter().copied().collect());
    }
    let eig = symmetric_eigen(m)?;
    let cutoff = f64::EPSILON * n as f64 * eig.eigenvalues[0].abs();
    let t = eig.eigenvectors.tr_matvec(rhs)?;
    let t: Vec<f64> = t
        .iter()
        .zip(&eig.eigenvalues)
        .map(|(x, l)| if *l > cutoff { x / l } else { 0.0 })
        .collect();
    eig.eigenvectors.matvec(&t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    /// The worked p = 2, K = 1 instance: A = (1,1)', Sigma_Z = 1,
    /// Sigma_E = I_2, beta = 1, so a^2 = 2 and xi = 2.
    fn worked_instance(sigma_eps: f64) -> FactorModel {
        FactorModel::new(
            DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
            DenseMatrix::identity(1),
            NoiseCov::Isotropic(1.0),
            vec![1.0],
            sigma_eps,
        )
        .unwrap()
    }

    fn random_model(rng: &mut SmallRng, p: usize, k: usize) -> FactorModel {
        let loading = DenseMatrix::from_fn(p, k, |_, _| rng.random_range(-1.0..1.0));
        let g = DenseMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let mut factor_cov = g.gram_right();
        for i in 0..k {
            factor_cov.set(i, i, factor_cov.get(i, i) + 0.5);
        }
        let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        FactorModel::new(
            loading,
            factor_cov,
            NoiseCov::Isotropic(rng.random_range(0.2..1.5)),
            beta,
            rng.random_range(0.0..1.0),
        )
        .unwrap()
    }

    #[test]
    fn sigma_x_apply_identity_noise_zero_loading() {
        let m = FactorModel::new_allowing_degenerate(
            DenseMatrix::zeros(3, 1),
            DenseMatrix::identity(1),
            NoiseCov::Isotropic(1.0),
            vec![0.0],
            1.0,
        )
        .unwrap();
        let v = vec![0.3, -1.0, 2.0];
        assert_eq!(m.sigma_x_apply(&v).unwrap(), v);
    }

    #[test]
    fn sigma_x_apply_worked_instance() {
        let m = worked_instance(1.0);
        let out = m.sigma_x_apply(&[1.0, 0.0]).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-14);
        assert!((out[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_x_matches_dense_assembly() {
        let mut rng = SmallRng::seed_from_u64(21);
        for _ in 0..5 {
            let m = random_model(&mut rng, 7, 3);
            let dense = m.materialize_sigma_x().unwrap();
            let v: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = m.sigma_x_apply(&v).unwrap();
            let b = dense.matvec(&v).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
            let q = m.sigma_x_quadform(&v).unwrap();
            assert!((q - linalg::dot(&v, &b)).abs() < 1e-10 * q.abs().max(1.0));
        }
    }

    #[test]
    fn alpha_star_noiseless_hand_case() {
        let m = FactorModel::new(
            DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
            DenseMatrix::identity(1),
            NoiseCov::Zero,
            vec![1.0],
            0.5,
        )
        .unwrap();
        let a = m.best_linear_predictor().unwrap();
        assert!((a[0] - 0.5).abs() < 1e-12);
        assert!((a[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_star_worked_instance() {
        let m = worked_instance(1.0);
        let a = m.best_linear_predictor().unwrap();
        assert!((a[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((a[1] - 1.0 / 3.0).abs() < 1e-12);
        let dense = m.best_linear_predictor_dense().unwrap();
        for (x, y) in a.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_star_zero_beta() {
        let mut rng = SmallRng::seed_from_u64(3);
        let loading = DenseMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let m = FactorModel::new(
            loading,
            DenseMatrix::identity(2),
            NoiseCov::Isotropic(1.0),
            vec![0.0, 0.0],
            1.0,
        )
        .unwrap();
        assert_eq!(m.best_linear_predictor().unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn summary_noiseless_hits_oracle() {
        let m = FactorModel::new(
            DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap(),
            DenseMatrix::identity(2),
            NoiseCov::Zero,
            vec![1.0, -0.5],
            0.7,
        )
        .unwrap();
        let s = m.population_summary().unwrap();
        assert_eq!(s.risk_star, s.oracle_risk);
        assert!(s.xi.is_infinite());
        assert_eq!(s.gap_lower, 0.0);
        assert_eq!(s.gap_upper, 0.0);
    }

    #[test]
    fn summary_worked_instance() {
        let m = worked_instance(1.0);
        let s = m.population_summary().unwrap();
        assert!((s.xi - 2.0).abs() < 1e-12);
        assert!((s.alpha_star_sx_norm_sq - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.risk_star - s.oracle_risk - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.null_risk - 2.0).abs() < 1e-12);
        // Identity R(0) - R(alpha*) = ||alpha*||^2_{Sigma_X}.
        let lhs = s.null_risk - s.risk_star;
        assert!((lhs - s.alpha_star_sx_norm_sq).abs() <= 1e-8 * lhs.abs().max(1.0));
        // Bracket.
        assert!(s.gap_lower <= s.risk_star - s.oracle_risk + 1e-8);
        assert!(s.risk_star - s.oracle_risk <= s.gap_upper + 1e-8);
    }

    #[test]
    fn summary_spiked_axis_loading() {
        let m = FactorModel::new(
            DenseMatrix::from_rows(&[vec![2.0], vec![0.0], vec![0.0], vec![0.0]]).unwrap(),
            DenseMatrix::identity(1),
            NoiseCov::Isotropic(1.0),
            vec![1.0],
            1.0,
        )
        .unwrap();
        let s = m.population_summary().unwrap();
        assert!((s.lambda_k_signal - 4.0).abs() < 1e-12);
        assert!((s.xi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn risk_exact_examples() {
        let m = worked_instance(1.0);
        assert!((m.risk_exact(&[0.0, 0.0]).unwrap() - m.null_risk()).abs() < 1e-14);
        let a = m.best_linear_predictor().unwrap();
        assert!((m.risk_exact(&a).unwrap() - 4.0 / 3.0).abs() < 1e-12);

        // Agreement with the raw quadratic form on random models.
        let mut rng = SmallRng::seed_from_u64(77);
        for _ in 0..5 {
            let m = random_model(&mut rng, 6, 2);
            let alpha: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let direct = m.sigma_x_quadform(&alpha).unwrap()
                - 2.0 * linalg::dot(&alpha, &m.sigma_xy())
                + m.null_risk();
            let grouped = m.risk_exact(&alpha).unwrap();
            assert!((direct - grouped).abs() < 1e-10 * direct.abs().max(1.0));
            assert!(grouped >= m.sigma_eps() * m.sigma_eps() - 1e-9);
        }
    }

    #[test]
    fn minimizer_property() {
        let mut rng = SmallRng::seed_from_u64(5);
        let m = random_model(&mut rng, 8, 3);
        let a = m.best_linear_predictor().unwrap();
        let base = m.risk_exact(&a).unwrap();
        for _ in 0..100 {
            let delta: Vec<f64> = (0..8).map(|_| rng.random_range(-0.3..0.3)).collect();
            let perturbed: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + d).collect();
            assert!(m.risk_exact(&perturbed).unwrap() >= base - 1e-9);
        }
    }

    #[test]
    fn noiseless_norm_formulas() {
        let mut rng = SmallRng::seed_from_u64(15);
        let loading = DenseMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = DenseMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let mut factor_cov = g.gram_right();
        for i in 0..3 {
            factor_cov.set(i, i, factor_cov.get(i, i) + 0.4);
        }
        let beta = vec![1.0, -2.0, 0.5];
        let m = FactorModel::new(loading.clone(), factor_cov, NoiseCov::Zero, beta.clone(), 0.3)
            .unwrap();
        let s = m.population_summary().unwrap();
        assert!(
            (s.alpha_star_sx_norm_sq - s.beta_sz_norm_sq).abs()
                <= 1e-8 * s.beta_sz_norm_sq.max(1.0)
        );
        let w = solve_spd(&loading.gram_right(), &beta).unwrap();
        let expected_norm_sq = linalg::dot(&beta, &w);
        assert!((s.alpha_star_norm_sq - expected_norm_sq).abs() <= 1e-8 * expected_norm_sq);
    }

    #[test]
    fn alpha_star_norm_ratio_brackets() {
        // For xi > 2 and kappa(Sigma_E) <= 4 the squared norms of alpha*
        // sit inside explicit brackets around the beta norms.
        let mut rng = SmallRng::seed_from_u64(61);
        for trial in 0..10 {
            let p = 30;
            let k = 3;
            let loading =
                DenseMatrix::from_fn(p, k, |_, _| rng.random_range(-1.0..1.0)).scale(3.0);
            let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
            let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let model = FactorModel::new(
                loading.clone(),
                DenseMatrix::identity(k),
                NoiseCov::Diagonal(d),
                beta.clone(),
                1.0,
            )
            .unwrap();
            let xi = model.xi();
            let kappa = model.noise_condition_number().unwrap();
            assert!(xi > 2.0 && kappa <= 4.0, "trial {trial} out of regime");
            let s = model.population_summary().unwrap();

            let ratio_sx = s.alpha_star_sx_norm_sq / s.beta_sz_norm_sq;
            assert!(ratio_sx >= 1.0 - 1.0 / xi - 1e-9, "{ratio_sx} vs xi {xi}");
            assert!(ratio_sx <= 1.0 + 1e-9);

            let w = solve_spd(&loading.gram_right(), &beta).unwrap();
            let gram_quad = linalg::dot(&beta, &w);
            let ratio = s.alpha_star_norm_sq / gram_quad;
            assert!(ratio >= (xi - 1.0) / (xi + 1.0) / kappa - 1e-9);
            assert!(ratio <= kappa + 1e-9);
        }
    }

    #[test]
    fn effective_rank_chain() {
        let mut rng = SmallRng::seed_from_u64(10);
        for _ in 0..10 {
            let m = random_model(&mut rng, 12, 3);
            let s = m.population_summary().unwrap();
            assert!(s.re_sigma_x <= m.k() as f64 + s.re_sigma_e / s.xi + 1e-9);
        }
    }

    #[test]
    fn woodbury_matches_dense_diagonal_noise() {
        let mut rng = SmallRng::seed_from_u64(31);
        let loading = DenseMatrix::from_fn(10, 2, |_, _| rng.random_range(-1.0..1.0));
        let d: Vec<f64> = (0..10).map(|_| rng.random_range(0.3..2.0)).collect();
        let m = FactorModel::new(
            loading,
            DenseMatrix::identity(2),
            NoiseCov::Diagonal(d),
            vec![0.7, -1.2],
            1.0,
        )
        .unwrap();
        let a = m.best_linear_predictor().unwrap();
        let b = m.best_linear_predictor_dense().unwrap();
        let scale = a.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn spectrum_diagnostics_cases() {
        // Isotropic shift is exact.
        let m = worked_instance(1.0);
        let d = m.spectrum_diagnostics().unwrap();
        assert!(d.lambda_floor_ok && d.lambda_k_growth && d.tail_bounded);
        assert!((d.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((d.eigenvalues[1] - 1.0).abs() < 1e-12);

        // A = 0: spectrum equals the noise spectrum.
        let m = FactorModel::new_allowing_degenerate(
            DenseMatrix::zeros(3, 1),
            DenseMatrix::identity(1),
            NoiseCov::Diagonal(vec![2.0, 1.0, 0.5]),
            vec![0.0],
            1.0,
        )
        .unwrap();
        let d = m.spectrum_diagnostics().unwrap();
        assert!((d.eigenvalues[0] - 2.0).abs() < 1e-10);
        assert!((d.eigenvalues[2] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn cluster_snr_examples() {
        // Two clusters of sizes 3 and 5.
        let mut loading = DenseMatrix::zeros(8, 2);
        for i in 0..3 {
            loading.set(i, 0, 1.0);
        }
        for i in 3..8 {
            loading.set(i, 1, 1.0);
        }
        let m = FactorModel::new(
            loading,
            DenseMatrix::identity(2),
            NoiseCov::Isotropic(1.0),
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        let bound = m.cluster_snr_lower_bound().unwrap();
        assert!((bound - 3.0).abs() < 1e-12);
        assert!(bound <= m.xi() + 1e-9);

        // One cluster covering all p rows.
        let loading = DenseMatrix::from_fn(6, 1, |_, _| 1.0);
        let m = FactorModel::new(
            loading,
            DenseMatrix::identity(1),
            NoiseCov::Isotropic(1.0),
            vec![1.0],
            1.0,
        )
        .unwrap();
        assert!((m.cluster_snr_lower_bound().unwrap() - 6.0).abs() < 1e-12);

        // Non-assignment loading is rejected.
        let m = worked_instance(1.0);
        let bad = FactorModel::new(
            DenseMatrix::from_rows(&[vec![0.5], vec![1.0]]).unwrap(),
            DenseMatrix::identity(1),
            NoiseCov::Isotropic(1.0),
            vec![1.0],
            1.0,
        )
        .unwrap();
        assert!(bad.cluster_snr_lower_bound().is_err());
        assert!(m.cluster_snr_lower_bound().is_ok());
    }

    #[test]
    fn gaussian_residual_identity_part() {
        let mut rng = SmallRng::seed_from_u64(41);
        for _ in 0..5 {
            let m = random_model(&mut rng, 6, 2);
            let r = m.gaussian_residual_check(64, 9).unwrap();
            assert!(r.identity_gap <= 1e-8);
        }
    }

    #[test]
    fn gaussian_residual_worked_instance_clt_scale() {
        let m = worked_instance(1.0);
        let r = m.gaussian_residual_check(100_000, 7).unwrap();
        assert!(r.max_abs_correlation <= 4.0 / (100_000f64).sqrt());
        assert!(r.identity_gap <= 1e-8);
    }

    #[test]
    fn gaussian_residual_zero_beta() {
        let mut rng = SmallRng::seed_from_u64(43);
        let loading = DenseMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let m = FactorModel::new(
            loading,
            DenseMatrix::identity(2),
            NoiseCov::Isotropic(1.0),
            vec![0.0, 0.0],
            1.0,
        )
        .unwrap();
        let r = m.gaussian_residual_check(20_000, 11).unwrap();
        assert!(r.max_abs_correlation <= 5.0 / (20_000f64).sqrt());
    }

    #[test]
    fn excess_decomposition_zero_inputs() {
        let mut rng = SmallRng::seed_from_u64(51);
        let m = FactorModel::new(
            DenseMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0)),
            DenseMatrix::identity(2),
            NoiseCov::Isotropic(1.0),
            vec![0.0, 0.0],
            1.0,
        )
        .unwrap();
        let z = DenseMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let e = DenseMatrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
        let x = z.matmul_nt(m.loading()).unwrap().add(&e).unwrap();
        let d = m.excess_decomposition(&x, &z, &[0.0; 4]).unwrap();
        assert_eq!(d.b1, 0.0);
        assert_eq!(d.b2, 0.0);
        assert_eq!(d.v1, 0.0);
        assert_eq!(d.v2, 0.0);
        assert!(d.exact_excess.abs() < 1e-12);
    }

    #[test]
    fn excess_decomposition_matches_risk_exact() {
        let mut rng = SmallRng::seed_from_u64(53);
        let m = random_model(&mut rng, 9, 2);
        let n = 5;
        let z = DenseMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let e = DenseMatrix::from_fn(n, 9, |_, _| rng.random_range(-0.5..0.5));
        let x = z.matmul_nt(m.loading()).unwrap().add(&e).unwrap();
        let eps: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let d = m.excess_decomposition(&x, &z, &eps).unwrap();
        assert!(d.exact_excess <= 2.0 * (d.b1 + d.b2) + 2.0 * (d.v1 + d.v2) + 1e-9);

        let solver = GramPinv::new(&x).unwrap();
        let zb = z.matvec(&[m.beta()[0], m.beta()[1]]).unwrap();
        let y: Vec<f64> = zb.iter().zip(&eps).map(|(a, b)| a + b).collect();
        let a_hat = solver.pinv_apply(&y).unwrap();
        let expected = m.risk_exact(&a_hat).unwrap() - m.sigma_eps() * m.sigma_eps();
        assert!((d.exact_excess - expected).abs() <= 1e-8 * expected.abs().max(1.0));
    }
}
