//! Deterministic, seeded generation of factor-regression datasets and of
//! the loading-matrix constructions used in the experiment sweeps.
//!
//! Randomness is organized as counter-based streams: every
//! (grid point, replicate, role) triple hashes to its own ChaCha stream, so
//! replicates are independent of execution order and thread count, and any
//! stream can be regenerated bit-identically in isolation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen, DenseMatrix};
use crate::model::FactorModel;

/// Zero-mean, unit-variance sub-Gaussian sampling laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseLaw {
    Gaussian,
    Rademacher,
    /// Uniform on [-sqrt(3), sqrt(3)].
    UniformScaled,
}

impl NoiseLaw {
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            NoiseLaw::Gaussian => StandardNormal.sample(rng),
            NoiseLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::UniformScaled => {
                let u: f64 = rng.random::<f64>();
                (2.0 * u - 1.0) * 3f64.sqrt()
            }
        }
    }

    fn fill(&self, rng: &mut ChaCha12Rng, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.sample(rng);
        }
    }
}

/// Roles inside one replicate's stream family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Factors,
    FeatureNoise,
    ResponseNoise,
    Loading,
    Holdout,
    Folds,
    Probe,
}

impl StreamRole {
    fn tag(&self) -> u64 {
        match self {
            StreamRole::Factors => 1,
            StreamRole::FeatureNoise => 2,
            StreamRole::ResponseNoise => 3,
            StreamRole::Loading => 4,
            StreamRole::Holdout => 5,
            StreamRole::Folds => 6,
            StreamRole::Probe => 7,
        }
    }
}

/// Master seed plus the stream-derivation rule
/// `stream = hash(master_seed, grid_index, replicate_index, role)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Independent ChaCha stream for a (grid, replicate, role) triple.
    pub fn stream(&self, grid_index: u64, replicate: u64, role: StreamRole) -> ChaCha12Rng {
        let mut state = splitmix64(self.master_seed ^ 0x9e37_79b9_7f4a_7c15);
        state = splitmix64(state ^ grid_index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        state = splitmix64(state ^ replicate.wrapping_mul(0x94d0_49bb_1331_11eb));
        state = splitmix64(state ^ role.tag());
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One replicate's training data.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub z: DenseMatrix,
    pub eps: Vec<f64>,
    pub e_stored: Option<DenseMatrix>,
}

/// Draws `n` i.i.d. rows of the factor-regression law.
///
/// `Z = Ztilde Sigma_Z^{1/2}`, `E = Etilde Sigma_E^{1/2}`,
/// `eps = sigma_eps * epstilde`, then `y = Z beta + eps` and
/// `X = Z A' + E`, assembled in exactly that order.
pub fn sample_dataset(
    model: &FactorModel,
    n: usize,
    law: NoiseLaw,
    seed: &SeedSpec,
    grid_index: u64,
    replicate: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::ContractViolation("sample size must be >= 1".into()));
    }
    let p = model.p();
    let k = model.k();

    let mut rng_z = seed.stream(grid_index, replicate, StreamRole::Factors);
    let mut zt = vec![0.0; n * k];
    law.fill(&mut rng_z, &mut zt);
    let z = DenseMatrix::from_vec_unchecked(n, k, zt).matmul(model.factor_sqrt())?;

    let mut rng_eps = seed.stream(grid_index, replicate, StreamRole::ResponseNoise);
    let mut eps = vec![0.0; n];
    law.fill(&mut rng_eps, &mut eps);
    let sigma_eps = model.sigma_eps();
    for v in eps.iter_mut() {
        *v *= sigma_eps;
    }

    let y: Vec<f64> = {
        let zb = z.matvec(model.beta())?;
        zb.iter().zip(&eps).map(|(a, b)| a + b).collect()
    };

    let mut x = z.matmul_nt(model.loading())?;
    let e_stored = if model.noise_cov().is_zero() {
        None
    } else {
        let mut rng_e = seed.stream(grid_index, replicate, StreamRole::FeatureNoise);
        let mut e = DenseMatrix::zeros(n, p);
        for i in 0..n {
            let mut row = vec![0.0; p];
            law.fill(&mut rng_e, &mut row);
            let transformed = model.noise_sqrt_apply(&row);
            for (j, v) in transformed.iter().enumerate() {
                e.set(i, j, *v);
            }
        }
        x = x.add(&e)?;
        Some(e)
    };

    Ok(Dataset {
        x,
        y,
        z,
        eps,
        e_stored,
    })
}

/// How to read the Gaussian-loading scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GaussianLoadingScale {
    /// Entry variance 1/sqrt(K).
    #[default]
    Variance,
    /// Entry standard deviation 1/sqrt(K) (variance 1/K).
    StdDev,
}

/// `A = sqrt(p) * Q` where `Q` holds the first `K` rows of a Haar-random
/// p x p orthogonal matrix (as p-vectors), so `A'A = p I_K`.
pub fn loading_scaled_orthogonal(p: usize, k: usize, rng: &mut ChaCha12Rng) -> Result<DenseMatrix> {
    check_pk(p, k)?;
    let g = DenseMatrix::from_fn(p, k, |_, _| StandardNormal.sample(rng));
    let q = haar_frame(&g);
    Ok(q.scale((p as f64).sqrt()))
}

/// Thin QR of a Gaussian matrix with the R-diagonal sign fix, i.e. a
/// Haar-distributed orthonormal K-frame in R^p.
pub(crate) fn haar_frame(g: &DenseMatrix) -> DenseMatrix {
    let na_g = nalgebra::DMatrix::from_row_slice(g.rows(), g.cols(), g.as_slice());
    let qr = na_g.qr();
    let q = qr.q();
    let r = qr.r();
    DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| {
        if r[(j, j)] < 0.0 {
            -q[(i, j)]
        } else {
            q[(i, j)]
        }
    })
}

/// Entries i.i.d. N(0, 1/sqrt(K)) under the variance reading (the
/// alternative standard-deviation reading is selectable).
pub fn loading_gaussian(
    p: usize,
    k: usize,
    scale: GaussianLoadingScale,
    rng: &mut ChaCha12Rng,
) -> Result<DenseMatrix> {
    check_pk(p, k)?;
    let sd = match scale {
        GaussianLoadingScale::Variance => (1.0 / (k as f64).sqrt()).sqrt(),
        GaussianLoadingScale::StdDev => 1.0 / (k as f64).sqrt(),
    };
    Ok(DenseMatrix::from_fn(p, k, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        sd * g
    }))
}

/// Column a equals sqrt(p) * e_a, so alpha* is exactly K-sparse.
pub fn loading_canonical_sparse(p: usize, k: usize) -> Result<DenseMatrix> {
    check_pk(p, k)?;
    let root_p = (p as f64).sqrt();
    Ok(DenseMatrix::from_fn(p, k, |i, j| {
        if i == j {
            root_p
        } else {
            0.0
        }
    }))
}

/// 0/1 membership matrix: cluster a claims `sizes[a]` consecutive rows;
/// rows beyond the total stay zero.
pub fn loading_cluster_assignment(p: usize, k: usize, sizes: &[usize]) -> Result<DenseMatrix> {
    check_pk(p, k)?;
    if sizes.len() != k {
        return Err(Error::DimensionMismatch {
            context: "loading_cluster_assignment",
            expected: format!("{k} sizes"),
            got: format!("{}", sizes.len()),
        });
    }
    let total: usize = sizes.iter().sum();
    if total > p {
        return Err(Error::ContractViolation(format!(
            "cluster sizes sum to {total} > p = {p}"
        )));
    }
    let mut m = DenseMatrix::zeros(p, k);
    let mut row = 0usize;
    for (a, &sz) in sizes.iter().enumerate() {
        for _ in 0..sz {
            m.set(row, a, 1.0);
            row += 1;
        }
    }
    Ok(m)
}

fn check_pk(p: usize, k: usize) -> Result<()> {
    if k == 0 || k > p {
        return Err(Error::ContractViolation(format!(
            "need 1 <= K <= p, got K = {k}, p = {p}"
        )));
    }
    Ok(())
}

/// Empirically calibrated absolute constant for the spectral band of
/// W Sigma W'. Calibrated once over the three laws, n in {10, 25, 50},
/// aspect ratios r/n in {1, 2, 4, 6, 10, 25}, and 20 seeds each
/// (Sigma = I_r): the largest deviation observed required c = 5.3, and the
/// aspect ratio r = 4n needs c = 3 already in expectation. Frozen with
/// margin; the probe is a sanity monitor, not a proof.
pub const CONCENTRATION_BAND_CONSTANT: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct ConcentrationProbe {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub trace_sigma: f64,
    pub within_band: bool,
}

/// Samples `W` (n x r, i.i.d. unit-variance entries) and reports the extreme
/// eigenvalues of `W Sigma W'` against the band
/// `[tr(Sigma)/2 - c n ||Sigma||, 3 tr(Sigma)/2 + c n ||Sigma||]`.
pub fn concentration_probe(
    n: usize,
    sigma: &DenseMatrix,
    law: NoiseLaw,
    seed: &SeedSpec,
    probe_index: u64,
) -> Result<ConcentrationProbe> {
    if !sigma.is_square() {
        return Err(Error::ContractViolation(
            "concentration probe needs a square Sigma".into(),
        ));
    }
    let r = sigma.rows();
    if r < n {
        return Err(Error::ContractViolation(format!(
            "probe requires r >= n, got r = {r}, n = {n}"
        )));
    }
    let mut rng = seed.stream(probe_index, 0, StreamRole::Probe);
    let mut w = vec![0.0; n * r];
    law.fill(&mut rng, &mut w);
    let w = DenseMatrix::from_vec_unchecked(n, r, w);
    let ws = w.matmul(sigma)?;
    let mut m = ws.matmul_nt(&w)?;
    m.symmetrize();
    let eig = symmetric_eigen(&m)?;
    let lambda_max = eig.eigenvalues[0];
    let lambda_min = *eig.eigenvalues.last().expect("n >= 1");
    let trace_sigma = linalg::trace(sigma)?;
    let sigma_opnorm = symmetric_opnorm(sigma);
    let c = CONCENTRATION_BAND_CONSTANT;
    let lo = trace_sigma / 2.0 - c * sigma_opnorm * n as f64;
    let hi = 1.5 * trace_sigma + c * sigma_opnorm * n as f64;
    Ok(ConcentrationProbe {
        lambda_min,
        lambda_max,
        trace_sigma,
        within_band: lambda_min >= lo && lambda_max <= hi,
    })
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration with a
/// deterministic start; plenty for the probe's band arithmetic.
fn symmetric_opnorm(s: &DenseMatrix) -> f64 {
    let r = s.rows();
    let mut v: Vec<f64> = (0..r).map(|i| 1.0 + 1e-3 * i as f64).collect();
    let norm = linalg::norm(&v);
    for x in v.iter_mut() {
        *x /= norm;
    }
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let w = s.matvec(&v).expect("square input");
        let norm = linalg::norm(&w);
        if norm == 0.0 {
            return 0.0;
        }
        let next = linalg::dot(&v, &w);
        let done = (next - lambda).abs() <= 1e-12 * next.abs().max(1.0);
        lambda = next;
        v = w.iter().map(|x| x / norm).collect();
        if done {
            break;
        }
    }
    lambda.max(0.0)
}
