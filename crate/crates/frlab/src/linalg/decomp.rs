//! Decompositions and spectral summaries on [`DenseMatrix`].
//!
//! The factorization workhorses are nalgebra's SVD and symmetric
//! eigendecomposition; this module fixes a deterministic sign convention
//! on the factors and applies the numerical-rank policy used everywhere
//! downstream: singular values at or below `relative_cutoff * sigma_1`
//! are treated as exactly zero.

use nalgebra as na;

use super::DenseMatrix;
use crate::error::{Error, Result};

const SOLVER_MAX_ITER: usize = 10_000;

/// Numerical-rank decision for pseudoinversion.
#[derive(Debug, Clone, Copy)]
pub struct RankPolicy {
    pub relative_cutoff: f64,
}

impl RankPolicy {
    pub fn new(relative_cutoff: f64) -> Result<Self> {
        if relative_cutoff > 0.0 && relative_cutoff.is_finite() {
            Ok(Self { relative_cutoff })
        } else {
            Err(Error::ContractViolation(
                "RankPolicy cutoff must be a positive real".into(),
            ))
        }
    }

    /// Default cutoff: machine epsilon times the larger dimension.
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        Self {
            relative_cutoff: f64::EPSILON * rows.max(cols) as f64,
        }
    }
}

/// Thin SVD `m = left * diag(singulars) * right^T` with descending,
/// nonnegative singular values.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singulars: Vec<f64>,
    pub right: DenseMatrix,
}

impl SvdResult {
    /// Numerical rank under the given policy.
    pub fn rank(&self, policy: &RankPolicy) -> usize {
        let cutoff = self.singulars.first().copied().unwrap_or(0.0) * policy.relative_cutoff;
        self.singulars.iter().filter(|s| **s > cutoff).count()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let r = self.singulars.len();
        let scaled = DenseMatrix::from_fn(self.left.rows(), r, |i, j| {
            self.left.get(i, j) * self.singulars[j]
        });
        scaled.matmul_nt(&self.right).expect("conformable factors")
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending,
/// eigenvector columns orthonormal and paired with the eigenvalues.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let scaled = DenseMatrix::from_fn(n, n, |i, j| {
            self.eigenvectors.get(i, j) * self.eigenvalues[j]
        });
        scaled
            .matmul_nt(&self.eigenvectors)
            .expect("conformable factors")
    }
}

fn to_na(m: &DenseMatrix) -> na::DMatrix<f64> {
    na::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Flips columns so the entry of largest magnitude in each is nonnegative
/// (first index wins ties).
pub fn canonicalize_column_signs(m: &mut DenseMatrix) {
    fix_signs(m, None);
}

/// Flips factor columns so the entry of largest magnitude in each left
/// column is nonnegative (first index wins ties).
fn fix_signs(left: &mut DenseMatrix, right: Option<&mut DenseMatrix>) {
    let cols = left.cols();
    let rows = left.rows();
    let mut flip = vec![false; cols];
    for j in 0..cols {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..rows {
            let a = left.get(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        flip[j] = left.get(best, j) < 0.0;
        if flip[j] {
            for i in 0..rows {
                left.set(i, j, -left.get(i, j));
            }
        }
    }
    if let Some(right) = right {
        for j in 0..cols.min(right.cols()) {
            if flip[j] {
                for i in 0..right.rows() {
                    right.set(i, j, -right.get(i, j));
                }
            }
        }
    }
}

/// Thin singular value decomposition with deterministic signs.
///
/// One-sided Jacobi on the tall orientation: plane rotations orthogonalize
/// the columns of the working copy, the right factor accumulates the
/// rotations, and column norms become the singular values. Exact zero
/// columns (rank deficiency) get a deterministic orthonormal completion in
/// the left factor.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    if m.cols() > m.rows() {
        let dec = svd_tall(&m.transpose())?;
        return Ok(SvdResult {
            left: dec.right,
            singulars: dec.singulars,
            right: dec.left,
        });
    }
    svd_tall(m)
}

const JACOBI_MAX_SWEEPS: usize = 60;

fn svd_tall(a: &DenseMatrix) -> Result<SvdResult> {
    let (m, n) = (a.rows(), a.cols());
    debug_assert!(m >= n);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in (i + 1)..n {
                let (aii, ajj, g) = {
                    let ci = &cols[i];
                    let cj = &cols[j];
                    (super::dot(ci, ci), super::dot(cj, cj), super::dot(ci, cj))
                };
                if aii == 0.0 || ajj == 0.0 {
                    continue;
                }
                if g.abs() <= f64::EPSILON * (aii * ajj).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (ajj - aii) / (2.0 * g);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericFailure {
            what: "svd (jacobi sweeps exhausted)",
            rows: m,
            cols: n,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols.iter().map(|c| super::norm(c)).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("finite norms"));

    let singulars: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut left = DenseMatrix::zeros(m, n);
    let mut right = DenseMatrix::zeros(n, n);
    let mut pending_completion = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            for r in 0..m {
                left.set(r, slot, cols[j][r] / norms[j]);
            }
        } else {
            pending_completion.push(slot);
        }
        for r in 0..n {
            right.set(r, slot, v[j][r]);
        }
    }
    complete_orthonormal(&mut left, &pending_completion);
    fix_signs(&mut left, Some(&mut right));
    Ok(SvdResult {
        left,
        singulars,
        right,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(j);
    let ci = &mut head[i];
    let cj = &mut tail[0];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all other
/// columns, derived deterministically from the canonical basis.
fn complete_orthonormal(u: &mut DenseMatrix, slots: &[usize]) {
    let m = u.rows();
    let n = u.cols();
    let mut next_basis = 0usize;
    for &slot in slots {
        let mut placed = false;
        while next_basis < m && !placed {
            let mut cand = vec![0.0; m];
            cand[next_basis] = 1.0;
            next_basis += 1;
            // Project out every populated column (twice, for stability).
            for _ in 0..2 {
                for j in 0..n {
                    if j == slot && !placed {
                        continue;
                    }
                    let col = u.col(j);
                    let proj = super::dot(&cand, &col);
                    for r in 0..m {
                        cand[r] -= proj * col[r];
                    }
                }
            }
            let norm = super::norm(&cand);
            if norm > 1e-3 {
                for r in 0..m {
                    u.set(r, slot, cand[r] / norm);
                }
                placed = true;
            }
        }
        debug_assert!(placed, "orthonormal completion exhausted the basis");
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be symmetric to 1e-12 relative tolerance; it is exactly
/// symmetrized before factorization.
pub fn symmetric_eigen(s: &DenseMatrix) -> Result<SymmetricEigen> {
    if !s.is_square() {
        return Err(Error::ContractViolation(format!(
            "symmetric_eigen requires a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let scale = s.max_abs();
    if s.symmetry_defect() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::ContractViolation(format!(
            "symmetric_eigen input asymmetric: defect {:.3e} vs scale {:.3e}",
            s.symmetry_defect(),
            scale
        )));
    }
    let mut sym = s.clone();
    sym.symmetrize();
    let n = sym.rows();
    let decomp =
        na::linalg::SymmetricEigen::try_new(to_na(&sym), f64::EPSILON, SOLVER_MAX_ITER).ok_or(
            Error::NumericFailure {
                what: "symmetric_eigen",
                rows: n,
                cols: n,
            },
        )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[b]
            .partial_cmp(&decomp.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut eigenvectors = DenseMatrix::from_fn(n, n, |i, j| decomp.eigenvectors[(i, order[j])]);
    fix_signs(&mut eigenvectors, None);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Moore-Penrose pseudoinverse through the SVD, with singular values at or
/// below the policy cutoff zeroed.
pub fn pseudoinverse(m: &DenseMatrix, policy: &RankPolicy) -> Result<DenseMatrix> {
    let dec = svd(m)?;
    let cutoff = dec.singulars.first().copied().unwrap_or(0.0) * policy.relative_cutoff;
    let inv: Vec<f64> = dec
        .singulars
        .iter()
        .map(|&s| if s > cutoff { 1.0 / s } else { 0.0 })
        .collect();
    // V * diag(inv) * U^T
    let scaled = DenseMatrix::from_fn(dec.right.rows(), inv.len(), |i, j| {
        dec.right.get(i, j) * inv[j]
    });
    scaled.matmul_nt(&dec.left)
}

/// Symmetric PSD square root.
pub fn psd_sqrt(s: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = symmetric_eigen(s)?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = -1e-10 * scale;
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &l in &eig.eigenvalues {
        if l < floor {
            return Err(Error::NotPsd { lambda_min: l });
        }
        roots.push(l.max(0.0).sqrt());
    }
    let n = roots.len();
    let scaled = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors.get(i, j) * roots[j]);
    let mut r = scaled.matmul_nt(&eig.eigenvectors)?;
    r.symmetrize();
    Ok(r)
}

/// Effective rank tr(s)/||s|| of a symmetric PSD matrix.
///
/// Returns `(value, degenerate)`; the zero matrix maps to `(1.0, true)`
/// by convention.
pub fn effective_rank(s: &DenseMatrix) -> Result<(f64, bool)> {
    if !s.is_square() {
        return Err(Error::ContractViolation(
            "effective_rank requires a square matrix".into(),
        ));
    }
    if s.max_abs() == 0.0 {
        return Ok((1.0, true));
    }
    let opnorm = operator_norm(s)?;
    Ok((trace(s)? / opnorm, false))
}

/// Largest singular value.
pub fn operator_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(svd(m)?.singulars[0])
}

/// Smallest of the min(rows, cols) singular values.
pub fn min_singular(m: &DenseMatrix) -> Result<f64> {
    let dec = svd(m)?;
    Ok(*dec.singulars.last().expect("at least one singular value"))
}

pub fn trace(s: &DenseMatrix) -> Result<f64> {
    if !s.is_square() {
        return Err(Error::ContractViolation(
            "trace requires a square matrix".into(),
        ));
    }
    Ok((0..s.rows()).map(|i| s.get(i, i)).sum())
}

/// Condition number lambda_1 / lambda_p of a symmetric PSD matrix.
pub fn condition_number(s: &DenseMatrix) -> Result<f64> {
    let eig = symmetric_eigen(s)?;
    let top = eig.eigenvalues[0];
    let bottom = *eig.eigenvalues.last().expect("nonempty spectrum");
    let cutoff = f64::EPSILON * s.rows() as f64 * top.abs();
    if bottom <= cutoff {
        return Err(Error::Singular {
            context: "condition_number",
        });
    }
    Ok(top / bottom)
}
