//! Calculators for the finite-sample risk bounds and regime conditions.
//!
//! Every calculator returns a [`BoundReport`]: the bound's right-hand side
//! with all absolute constants set to 1 and natural logarithms, the named
//! inputs that entered the formula, and boolean flags for whether the
//! bound's hypotheses hold at these inputs. Values are compared against
//! measured risks only up to fitted constants; a report never claims raw
//! dominance.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{FactorModel, PopulationSummary, SpectrumProvenance};

/// One evaluated bound: value, inputs, and hypothesis flags.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    pub conditions: BTreeMap<String, bool>,
    pub notes: String,
}

impl BoundReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            value: 0.0,
            inputs: BTreeMap::new(),
            conditions: BTreeMap::new(),
            notes: String::new(),
        }
    }

    pub fn conditions_hold(&self) -> bool {
        self.conditions.values().all(|v| *v)
    }

    /// Deterministic JSON rendering of the condition flags.
    pub fn conditions_json(&self) -> String {
        let mut s = String::from("{");
        for (i, (k, v)) in self.conditions.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!("\"{k}\":{v}"));
        }
        s.push('}');
        s
    }
}

/// Full spectrum of Sigma_X, descending, with provenance.
#[derive(Debug, Clone)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub provenance: SpectrumProvenance,
}

impl SpectrumSummary {
    pub fn of_model(model: &FactorModel) -> Result<Self> {
        let (eigenvalues, provenance) = model.sigma_x_eigenvalues()?;
        Ok(Self {
            eigenvalues,
            provenance,
        })
    }

    pub fn from_eigenvalues(eigenvalues: Vec<f64>, provenance: SpectrumProvenance) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::ContractViolation("empty spectrum".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) || eigenvalues.iter().any(|l| *l < 0.0) {
            return Err(Error::ContractViolation(
                "spectrum must be nonincreasing and nonnegative".into(),
            ));
        }
        Ok(Self {
            eigenvalues,
            provenance,
        })
    }
}

/// sqrt(n / r_e(Sigma_X)): the rate at which R(a^)/R(0) approaches 1 in the
/// overwhelming-rank regime.
pub fn null_ratio_bound(n: usize, summary: &PopulationSummary) -> BoundReport {
    let mut r = BoundReport::new("null_ratio");
    let re = summary.re_sigma_x;
    r.value = (n as f64 / re).sqrt();
    r.inputs.insert("n".into(), n as f64);
    r.inputs.insert("re_sigma_x".into(), re);
    r.conditions
        .insert("re_sigma_x_gt_n".into(), re > n as f64);
    r
}

/// K/n + r_e(Sigma_E)/(n xi): the chain bounding r_e(Sigma_X)/n.
pub fn effective_rank_condition(model: &FactorModel, n: usize) -> BoundReport {
    let (re_e, degenerate) = model.noise_effective_rank();
    let xi = model.xi();
    let mut r = effective_rank_condition_from(model.k(), n, xi, re_e);
    if degenerate {
        r.notes = "r_e(Sigma_E) uses the zero-noise convention r_e(0) = 1".into();
    }
    r
}

pub fn effective_rank_condition_from(k: usize, n: usize, xi: f64, re_e: f64) -> BoundReport {
    let mut r = BoundReport::new("effective_rank_condition");
    let nf = n as f64;
    let inv_xi = if xi.is_infinite() { 0.0 } else { 1.0 / xi };
    r.value = k as f64 / nf + inv_xi * re_e / nf;
    r.inputs.insert("k".into(), k as f64);
    r.inputs.insert("n".into(), nf);
    r.inputs.insert("xi".into(), xi);
    r.inputs.insert("re_sigma_e".into(), re_e);
    r.conditions.insert("k_le_n".into(), k as f64 <= nf);
    r.conditions.insert("xi_ge_re_e_over_n".into(), xi >= re_e / nf);
    r
}

/// The main high-dimensional excess-risk bound:
/// `||beta||^2_{Sigma_Z}/xi * re(Sigma_E)/n + sigma_eps^2 n ln n / re(Sigma_E)
///  + sigma_eps^2 K ln n / n`.
pub fn main_excess_bound(model: &FactorModel, n: usize) -> BoundReport {
    let (re_e, degenerate) = model.noise_effective_rank();
    let beta_sz = beta_sz_norm_sq(model);
    let mut r = main_excess_bound_from(n, model.k(), model.xi(), re_e, beta_sz, model.sigma_eps());
    if degenerate {
        r.notes = "r_e(Sigma_E) uses the zero-noise convention r_e(0) = 1".into();
        if model.sigma_eps() == 0.0 {
            r.notes.push_str("; variance terms vanish with sigma_eps = 0");
        }
    }
    r
}

pub fn main_excess_bound_from(
    n: usize,
    k: usize,
    xi: f64,
    re_e: f64,
    beta_sz_norm_sq: f64,
    sigma_eps: f64,
) -> BoundReport {
    let mut r = BoundReport::new("main_excess");
    let nf = n as f64;
    let log_n = nf.ln();
    let s2 = sigma_eps * sigma_eps;
    let inv_xi = if xi.is_infinite() { 0.0 } else { 1.0 / xi };
    let bias = beta_sz_norm_sq * inv_xi * re_e / nf;
    let var_feature = s2 * nf * log_n / re_e;
    let var_oracle = s2 * k as f64 * log_n / nf;
    r.value = bias + var_feature + var_oracle;
    r.inputs.insert("n".into(), nf);
    r.inputs.insert("k".into(), k as f64);
    r.inputs.insert("xi".into(), xi);
    r.inputs.insert("re_sigma_e".into(), re_e);
    r.inputs.insert("beta_sz_norm_sq".into(), beta_sz_norm_sq);
    r.inputs.insert("sigma_eps_sq".into(), s2);
    r.inputs.insert("bias_term".into(), bias);
    r.inputs.insert("variance_term".into(), var_feature + var_oracle);
    r.conditions.insert("n_gt_k".into(), nf > k as f64);
    r.conditions.insert("re_sigma_e_gt_n".into(), re_e > nf);
    r
}

/// Specialization under constant factor/noise spectra and r_e(Sigma_E) ~ p:
/// `K/lambda_K(A'A) * p/n + sigma_eps^2 (n/p + K/n) ln n`, plus the balanced
/// form `K^2/n + sigma_eps^2 (n/p + K/n) ln n` when lambda_K(A'A) >= p/K.
pub fn purevar_bound(model: &FactorModel, n: usize) -> BoundReport {
    let mut r = BoundReport::new("purevar");
    let nf = n as f64;
    let p = model.p() as f64;
    let k = model.k() as f64;
    let log_n = nf.ln();
    let s2 = model.sigma_eps() * model.sigma_eps();
    let lambda_k_gram = model.lambda_k_loading_gram();
    let variance = s2 * (nf / p + k / nf) * log_n;
    let bias = if lambda_k_gram > 0.0 {
        k / lambda_k_gram * p / nf
    } else {
        f64::INFINITY
    };
    r.value = bias + variance;
    let (re_e, _) = model.noise_effective_rank();
    r.inputs.insert("n".into(), nf);
    r.inputs.insert("p".into(), p);
    r.inputs.insert("k".into(), k);
    r.inputs.insert("lambda_k_loading_gram".into(), lambda_k_gram);
    r.inputs.insert("sigma_eps_sq".into(), s2);
    r.inputs.insert("re_sigma_e".into(), re_e);
    r.inputs
        .insert("balanced_form".into(), k * k / nf + variance);
    r.conditions
        .insert("lambda_k_ge_p_over_k".into(), lambda_k_gram >= p / k);
    r.conditions
        .insert("re_sigma_e_comparable_p".into(), re_e >= 0.5 * p);
    r.conditions
        .insert("noise_opnorm_finite".into(), model.noise_opnorm().is_finite());
    r
}

/// Low-dimensional regime p << n:
/// `kappa(Sigma_E) ||beta||^2_{Sigma_Z}/xi + (p/n) sigma_eps^2 ln n`.
pub fn lowdim_bound(model: &FactorModel, n: usize) -> BoundReport {
    let mut r = BoundReport::new("lowdim");
    let nf = n as f64;
    let p = model.p() as f64;
    let s2 = model.sigma_eps() * model.sigma_eps();
    let beta_sz = beta_sz_norm_sq(model);
    let xi = model.xi();
    let inv_xi = if xi.is_infinite() { 0.0 } else { 1.0 / xi };
    let variance = p / nf * s2 * nf.ln();
    let (bias, kappa_ok, kappa) = match model.noise_condition_number() {
        Ok(kappa) => (kappa * beta_sz * inv_xi, true, kappa),
        Err(_) => (beta_sz * inv_xi, false, f64::NAN),
    };
    r.value = bias + variance;
    r.inputs.insert("n".into(), nf);
    r.inputs.insert("p".into(), p);
    r.inputs.insert("beta_sz_norm_sq".into(), beta_sz);
    r.inputs.insert("xi".into(), xi);
    r.inputs.insert("sigma_eps_sq".into(), s2);
    if kappa_ok {
        r.inputs.insert("kappa_sigma_e".into(), kappa);
    } else {
        r.notes = "Sigma_E is singular; its condition number is undefined".into();
    }
    r.conditions.insert("n_gt_p".into(), nf > p);
    r.conditions.insert("sigma_e_invertible".into(), kappa_ok);
    r
}

/// The three population-eigenvector PCR bounds: the general form, the
/// noiseless specialization (only when Sigma_E = 0), and the
/// well-conditioned specialization (only when Sigma_E is invertible).
pub fn pcr_bound(model: &FactorModel, n: usize) -> Result<Vec<BoundReport>> {
    let summary = model.population_summary()?;
    let nf = n as f64;
    let log_n = nf.ln();
    let p = model.p() as f64;
    let k = model.k() as f64;
    let s2 = model.sigma_eps() * model.sigma_eps();
    let mut out = Vec::new();

    let mut general = BoundReport::new("pcr_general");
    general.value = model.noise_opnorm() * summary.alpha_star_norm_sq * p / nf
        + summary.risk_star * k * log_n / nf;
    general.inputs.insert("n".into(), nf);
    general.inputs.insert("p".into(), p);
    general.inputs.insert("k".into(), k);
    general
        .inputs
        .insert("noise_opnorm".into(), model.noise_opnorm());
    general
        .inputs
        .insert("alpha_star_norm_sq".into(), summary.alpha_star_norm_sq);
    general.inputs.insert("risk_star".into(), summary.risk_star);
    general.conditions.insert("n_gt_k_log_n".into(), nf > k * log_n);
    out.push(general);

    if model.noise_cov().is_zero() {
        let mut noiseless = BoundReport::new("pcr_noiseless");
        noiseless.value = s2 * k * log_n / nf;
        noiseless.inputs.insert("n".into(), nf);
        noiseless.inputs.insert("k".into(), k);
        noiseless.inputs.insert("sigma_eps_sq".into(), s2);
        noiseless.conditions.insert("n_gt_k_log_n".into(), nf > k * log_n);
        out.push(noiseless);
    }

    if let Ok(kappa) = model.noise_condition_number() {
        let mut conditioned = BoundReport::new("pcr_conditioned");
        let xi = model.xi();
        let inv_xi = if xi.is_infinite() { 0.0 } else { 1.0 / xi };
        let beta_sz = beta_sz_norm_sq(model);
        conditioned.value = kappa * beta_sz * inv_xi * p / nf + s2 * k * log_n / nf;
        conditioned.inputs.insert("n".into(), nf);
        conditioned.inputs.insert("p".into(), p);
        conditioned.inputs.insert("k".into(), k);
        conditioned.inputs.insert("kappa_sigma_e".into(), kappa);
        conditioned.inputs.insert("beta_sz_norm_sq".into(), beta_sz);
        conditioned.inputs.insert("xi".into(), xi);
        conditioned.inputs.insert("sigma_eps_sq".into(), s2);
        conditioned
            .conditions
            .insert("n_gt_k_log_n".into(), nf > k * log_n);
        out.push(conditioned);
    }

    Ok(out)
}

/// Tail effective ranks r_k and R_k of a spectrum.
#[derive(Debug, Clone, Copy)]
pub struct TailEffectiveRanks {
    pub r_k: f64,
    pub big_r_k: f64,
    /// Set when lambda_{k+1} = 0 and the ratios are 0/0.
    pub degenerate: bool,
}

pub fn tail_effective_ranks(
    spectrum: &SpectrumSummary,
    k: usize,
) -> Result<TailEffectiveRanks> {
    let eigs = &spectrum.eigenvalues;
    if k >= eigs.len() {
        return Err(Error::ContractViolation(format!(
            "tail index k = {k} >= spectrum length {}",
            eigs.len()
        )));
    }
    let tail = &eigs[k..];
    let head = tail[0];
    let sum: f64 = tail.iter().sum();
    let sum_sq: f64 = tail.iter().map(|l| l * l).sum();
    if head == 0.0 {
        return Ok(TailEffectiveRanks {
            r_k: 0.0,
            big_r_k: 0.0,
            degenerate: true,
        });
    }
    Ok(TailEffectiveRanks {
        r_k: sum / head,
        big_r_k: if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 },
        degenerate: false,
    })
}

/// K* = min{k >= 0: r_k(Sigma_X)/n >= b}, or None when no index qualifies.
pub fn tail_rank_kstar(spectrum: &SpectrumSummary, n: usize, b: f64) -> Result<Option<usize>> {
    if !(b > 1.0) {
        return Err(Error::ContractViolation(
            "K* threshold b must exceed 1".into(),
        ));
    }
    for k in 0..spectrum.eigenvalues.len() {
        let t = tail_effective_ranks(spectrum, k)?;
        if !t.degenerate && t.r_k / n as f64 >= b {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// The comparison bias/variance bounds driven by the spectrum of Sigma_X,
/// plus the factor-model lower bound on the bias.
#[derive(Debug, Clone)]
pub struct ComparisonBiasVariance {
    pub bias: BoundReport,
    pub variance: BoundReport,
    pub bias_lower_bound: Option<BoundReport>,
    pub kstar: Option<usize>,
}

pub fn comparison_bias_variance(
    model: &FactorModel,
    n: usize,
    b: f64,
) -> Result<ComparisonBiasVariance> {
    let spectrum = SpectrumSummary::of_model(model)?;
    let summary = model.population_summary()?;
    let nf = n as f64;
    let r0 = tail_effective_ranks(&spectrum, 0)?.r_k;
    let growth = (r0 / nf).sqrt().max(r0 / nf).max(1.0);

    let mut bias = BoundReport::new("comparison_bias");
    bias.value = summary.alpha_star_norm_sq * summary.sigma_x_opnorm * growth;
    bias.inputs.insert("n".into(), nf);
    bias.inputs
        .insert("alpha_star_norm_sq".into(), summary.alpha_star_norm_sq);
    bias.inputs
        .insert("sigma_x_opnorm".into(), summary.sigma_x_opnorm);
    bias.inputs.insert("r0".into(), r0);
    bias.conditions
        .insert("rank_ge_n".into(), spectrum.eigenvalues.len() >= n);

    let kstar = tail_rank_kstar(&spectrum, n, b)?;
    let mut variance = BoundReport::new("comparison_variance");
    let s2 = model.sigma_eps() * model.sigma_eps();
    match kstar {
        Some(ks) => {
            let tails = tail_effective_ranks(&spectrum, ks)?;
            variance.value = s2 * nf.ln() * (nf / tails.big_r_k + ks as f64 / nf);
            variance.inputs.insert("n".into(), nf);
            variance.inputs.insert("kstar".into(), ks as f64);
            variance.inputs.insert("big_r_kstar".into(), tails.big_r_k);
            variance.inputs.insert("sigma_eps_sq".into(), s2);
            variance.inputs.insert("b".into(), b);
            variance.conditions.insert("kstar_exists".into(), true);
        }
        None => {
            variance.value = 0.0;
            variance.conditions.insert("kstar_exists".into(), false);
            variance.notes = "no tail index reaches r_k/n >= b; the variance bound is vacuous".into();
        }
    }

    let bias_lower_bound = match (model.noise_condition_number(), model.xi()) {
        (Ok(kappa), xi) if xi > 1.0 && xi.is_finite() => {
            let mut lower = BoundReport::new("comparison_bias_lower");
            let growth_two = (r0 / nf).sqrt().max(r0 / nf);
            lower.value =
                (xi - 1.0) / (xi + 1.0) / kappa * summary.beta_sz_norm_sq * growth_two;
            lower.inputs.insert("n".into(), nf);
            lower.inputs.insert("xi".into(), xi);
            lower.inputs.insert("kappa_sigma_e".into(), kappa);
            lower
                .inputs
                .insert("beta_sz_norm_sq".into(), summary.beta_sz_norm_sq);
            lower.inputs.insert("r0".into(), r0);
            lower.conditions.insert("xi_gt_1".into(), true);
            lower.conditions.insert("sigma_e_invertible".into(), true);
            Some(lower)
        }
        _ => None,
    };

    Ok(ComparisonBiasVariance {
        bias,
        variance,
        bias_lower_bound,
        kstar,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct KstarSandwich {
    pub upper_ok: bool,
    pub lower_ok: bool,
    /// Zero noise: the lower statement degenerates to the r_e convention.
    pub degenerate: bool,
}

/// Verifies the tail-rank sandwich behind K* = K:
/// `r_l(Sigma_X)/n <= K/n (1 + 1/xi) + r_e(Sigma_E)/(n xi)` for l < K and
/// `r_K(Sigma_X)/n >= r_e(Sigma_E)/n - K/n`, each with 1e-9 slack.
pub fn kstar_sandwich_check(model: &FactorModel, n: usize) -> Result<KstarSandwich> {
    let spectrum = SpectrumSummary::of_model(model)?;
    let nf = n as f64;
    let k = model.k();
    let xi = model.xi();
    let inv_xi = if xi.is_infinite() { 0.0 } else { 1.0 / xi };
    let (re_e, degenerate) = model.noise_effective_rank();

    let upper_budget = k as f64 / nf * (1.0 + inv_xi) + re_e * inv_xi / nf + 1e-9;
    let mut upper_ok = true;
    for l in 0..k {
        let t = tail_effective_ranks(&spectrum, l)?;
        if t.r_k / nf > upper_budget {
            upper_ok = false;
        }
    }

    let t_k = tail_effective_ranks(&spectrum, k.min(spectrum.eigenvalues.len() - 1))?;
    let lower_ok = t_k.r_k / nf >= re_e / nf - k as f64 / nf - 1e-9;

    Ok(KstarSandwich {
        upper_ok,
        lower_ok,
        degenerate,
    })
}

fn beta_sz_norm_sq(model: &FactorModel) -> f64 {
    let s = model
        .factor_sqrt()
        .matvec(model.beta())
        .expect("dimensions fixed at construction");
    s.iter().map(|v| v * v).sum()
}
