//! Reference detectors for the scaling experiments (d = 4).
//!
//! The binary family has one rotated rank-one element P₁ = U·diag(μ,0,0,0)·U†
//! with complement P₂ = I − P₁; for μ = 1 both elements are rank-deficient
//! and non-adaptive tomography stalls at O(1/√N) infidelity. The perturbed
//! variants lift the zero eigenvalues to 0.001, making every element full
//! rank but badly conditioned. The three-valued family combines two rotated
//! rank-one terms with weights 0.4 and 0.5; the closure P₃ = I − P₁ − P₂ is
//! automatically positive because the weights sum below 1.

use crate::error::{QdtError, Result};
use crate::operators::{haar_random_unitary, CMatrix, HermitianOp, Povm};
use num_complex::Complex64;

/// Basis rotation applied to a detector element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    /// No rotation; eigenvalues sit on the computational diagonal.
    Identity,
    /// Haar-random unitary drawn from (seed, stream 0).
    Haar { seed: u64 },
}

impl Rotation {
    fn matrix(&self, d: usize) -> CMatrix {
        match self {
            Rotation::Identity => CMatrix::identity(d, d),
            Rotation::Haar { seed } => haar_random_unitary(d, *seed, 0),
        }
    }
}

/// Parametric detector families used throughout the experiments.
#[derive(Debug, Clone)]
pub enum DetectorSpec {
    /// P₁ = U diag(μ, 0, 0, 0) U†, P₂ = I − P₁; requires 0 < μ ≤ 1.
    BinaryMu { mu: f64, rotation: Rotation },
    /// Binary with eigenvalues (0.6, 0.001, 0.001, 0.001): full rank but with
    /// three eigenvalues close to zero.
    BinaryPerturbed { rotation: Rotation },
    /// P₁ = U₁ diag(0.4,0,0,0) U₁†, P₂ = U₂ diag(0,0.5,0,0) U₂†, P₃ closes.
    ThreeValued { rotations: (Rotation, Rotation) },
    /// Three-valued with the zero eigenvalues lifted to 0.001.
    ThreePerturbed { rotations: (Rotation, Rotation) },
    /// Explicit elements, validated on build.
    Custom { elements: Vec<HermitianOp> },
}

fn rotated_diag(eigenvalues: &[f64], rotation: &Rotation) -> HermitianOp {
    let d = eigenvalues.len();
    let u = rotation.matrix(d);
    let diag = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex64::new(eigenvalues[r], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let m = &u * diag * u.adjoint();
    HermitianOp::new((&m + m.adjoint()).scale(0.5)).expect("rotated diagonal is Hermitian")
}

/// Build and validate a detector from its specification.
pub fn build_detector(spec: &DetectorSpec) -> Result<Povm> {
    match spec {
        DetectorSpec::BinaryMu { mu, rotation } => {
            if !(*mu > 0.0 && *mu <= 1.0) {
                return Err(QdtError::InvalidArgument(format!(
                    "binary detector needs 0 < mu <= 1, got {mu}"
                )));
            }
            let p1 = rotated_diag(&[*mu, 0.0, 0.0, 0.0], rotation);
            let p2 = HermitianOp::identity(4).sub(&p1);
            Povm::new(vec![p1, p2])
        }
        DetectorSpec::BinaryPerturbed { rotation } => {
            let p1 = rotated_diag(&[0.6, 0.001, 0.001, 0.001], rotation);
            let p2 = HermitianOp::identity(4).sub(&p1);
            Povm::new(vec![p1, p2])
        }
        DetectorSpec::ThreeValued { rotations } => {
            let p1 = rotated_diag(&[0.4, 0.0, 0.0, 0.0], &rotations.0);
            let p2 = rotated_diag(&[0.0, 0.5, 0.0, 0.0], &rotations.1);
            let p3 = HermitianOp::identity(4).sub(&p1).sub(&p2);
            let min = p3.min_eigenvalue();
            if min < -1e-10 {
                return Err(QdtError::NotPsd {
                    min_eigenvalue: min,
                });
            }
            Povm::new(vec![p1, p2, p3])
        }
        DetectorSpec::ThreePerturbed { rotations } => {
            let p1 = rotated_diag(&[0.4, 0.001, 0.001, 0.001], &rotations.0);
            let p2 = rotated_diag(&[0.001, 0.5, 0.001, 0.001], &rotations.1);
            let p3 = HermitianOp::identity(4).sub(&p1).sub(&p2);
            let min = p3.min_eigenvalue();
            if min < -1e-10 {
                return Err(QdtError::NotPsd {
                    min_eigenvalue: min,
                });
            }
            Povm::new(vec![p1, p2, p3])
        }
        DetectorSpec::Custom { elements } => Povm::new(elements.clone()),
    }
}
