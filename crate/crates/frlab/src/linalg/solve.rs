//! Pseudoinverse application through the smaller Gram matrix.
//!
//! For an n x p matrix X with p >= n this uses X^+ = X'(XX')^+, so the only
//! factorization is an n x n symmetric eigendecomposition; for p < n it uses
//! X^+ = (X'X)^+ X'. Both identities are exact Moore-Penrose algebra and a
//! lot cheaper than a full SVD of X on wide problems.

use super::decomp::{symmetric_eigen, SymmetricEigen};
use super::DenseMatrix;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GramPinv {
    x: DenseMatrix,
    via_left_gram: bool,
    eig: SymmetricEigen,
    cutoff: f64,
}

impl GramPinv {
    pub fn new(x: &DenseMatrix) -> Result<Self> {
        let via_left_gram = x.cols() >= x.rows();
        let gram = if via_left_gram {
            x.gram_left()
        } else {
            x.gram_right()
        };
        let eig = symmetric_eigen(&gram)?;
        // Rank decision on the Gram scale: eigenvalues are squared singular
        // values, so noise from the eigensolver sits at eps * lambda_1.
        let cutoff =
            f64::EPSILON * x.rows().max(x.cols()) as f64 * eig.eigenvalues[0].max(0.0);
        Ok(Self {
            x: x.clone(),
            via_left_gram,
            eig,
            cutoff,
        })
    }

    /// X^+ v for v of length n; returns a p-vector.
    pub fn pinv_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.via_left_gram {
            let w = self.gram_pinv_apply(v)?;
            self.x.tr_matvec(&w)
        } else {
            let t = self.x.tr_matvec(v)?;
            self.gram_pinv_apply(&t)
        }
    }

    fn gram_pinv_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let t = self.eig.eigenvectors.tr_matvec(v)?;
        let t: Vec<f64> = t
            .iter()
            .zip(&self.eig.eigenvalues)
            .map(|(x, l)| if *l > self.cutoff { x / l } else { 0.0 })
            .collect();
        self.eig.eigenvectors.matvec(&t)
    }

    /// Numerical rank of X.
    pub fn rank(&self) -> usize {
        self.eig
            .eigenvalues
            .iter()
            .filter(|l| **l > self.cutoff)
            .count()
    }

    /// Smallest singular value of X over min(n, p) (zero if rank-deficient).
    pub fn min_singular(&self) -> f64 {
        self.eig
            .eigenvalues
            .last()
            .map(|l| l.max(0.0).sqrt())
            .unwrap_or(0.0)
    }

    /// Eigenvalues of the Gram matrix, descending.
    pub fn gram_eigenvalues(&self) -> &[f64] {
        &self.eig.eigenvalues
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.x
    }
}
