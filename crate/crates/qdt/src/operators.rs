//! Hermitian operators, density matrices, POVMs, and the orthonormal operator
//! basis used to turn all of them into real coefficient vectors.
//!
//! Every operator A on a d-dimensional Hilbert space is expanded as
//! A = Σ_a θ_a Ω_a where {Ω_a} is an orthonormal Hermitian basis
//! (Tr(Ω_a Ω_b) = δ_ab) with Ω_1 = I/√d and the rest traceless. The
//! coefficients θ_a = Tr(A Ω_a) are real exactly when A is Hermitian, which is
//! what lets the tomography layers work with real least-squares problems.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QdtError, Result};
use crate::rng::stream_rng;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RVector = DVector<f64>;

/// Absolute tolerance for Hermiticity checks on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above this are considered negative (not merely roundoff) when
/// validating positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance on Tr(rho) = 1 for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Tolerance on Σ_i P_i = I for POVMs.
pub const POVM_SUM_TOL: f64 = 1e-8;

/// Largest modulus of any entry of `m - m^dag`.
fn hermitian_deviation(m: &CMatrix) -> f64 {
    let diff = m - m.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A validated Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOp {
    mat: CMatrix,
}

impl HermitianOp {
    /// Validate and wrap a square complex matrix. The matrix must be Hermitian
    /// to within [`HERMITIAN_TOL`] entrywise; it is then symmetrized exactly so
    /// downstream spectral routines see `m == m^dag` to machine precision.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(QdtError::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        let dev = hermitian_deviation(&mat);
        if dev > HERMITIAN_TOL {
            return Err(QdtError::NotHermitian { deviation: dev });
        }
        let sym = (&mat + mat.adjoint()).scale(0.5);
        Ok(Self { mat: sym })
    }

    /// The identity operator on a d-dimensional space.
    pub fn identity(d: usize) -> Self {
        Self {
            mat: CMatrix::identity(d, d),
        }
    }

    /// The zero operator on a d-dimensional space.
    pub fn zero(d: usize) -> Self {
        Self {
            mat: CMatrix::zeros(d, d),
        }
    }

    /// Rank-one projector |v><v| (v need not be normalized).
    pub fn projector(v: &CVector) -> Self {
        Self {
            mat: v * v.adjoint(),
        }
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Borrow the underlying matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Trace (real for Hermitian operators).
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Frobenius norm ‖A‖ = √Tr(A²).
    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Hilbert–Schmidt inner product Tr(A B), real for Hermitian A, B.
    pub fn inner(&self, other: &Self) -> f64 {
        (&self.mat * &other.mat).trace().re
    }

    /// A + B.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    /// A - B.
    pub fn sub(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat - &other.mat,
        }
    }

    /// c·A for real c.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            mat: self.mat.scale(c),
        }
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> RVector {
        spectral_decomp(self).0
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[ev.len() - 1]
    }

    /// True if all eigenvalues are ≥ -[`PSD_TOL`].
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL
    }

    /// Conjugate by a matrix: W A W^dag. The result is Hermitian for any W.
    pub fn conjugate_by(&self, w: &CMatrix) -> Self {
        let m = w * &self.mat * w.adjoint();
        // Products of floating matrices drift off Hermitian by roundoff.
        Self {
            mat: (&m + m.adjoint()).scale(0.5),
        }
    }
}

/// A validated quantum state: Hermitian, PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOp,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let op = HermitianOp::new(mat)?;
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(QdtError::InvalidTrace {
                expected: 1.0,
                got: tr,
            });
        }
        let min = op.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(QdtError::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self { op })
    }

    /// Pure state |psi><psi| from a ket (normalized internally).
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n < 1e-12 {
            return Err(QdtError::InvalidArgument(
                "cannot normalize a zero ket".into(),
            ));
        }
        let v = psi.unscale(n);
        Ok(Self {
            op: HermitianOp::projector(&v),
        })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &HermitianOp {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    /// Purity Tr(rho²) ∈ (0, 1].
    pub fn purity(&self) -> f64 {
        self.op.inner(&self.op)
    }
}

/// A validated POVM: n ≥ 2 Hermitian PSD elements summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<HermitianOp>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOp>) -> Result<Self> {
        if elements.len() < 2 {
            return Err(QdtError::InvalidArgument(format!(
                "a POVM needs at least 2 elements, got {}",
                elements.len()
            )));
        }
        let d = elements[0].dim();
        let mut sum = CMatrix::zeros(d, d);
        for el in &elements {
            if el.dim() != d {
                return Err(QdtError::DimensionMismatch {
                    expected: d,
                    got: el.dim(),
                });
            }
            let min = el.min_eigenvalue();
            if min < -PSD_TOL {
                return Err(QdtError::NotPsd {
                    min_eigenvalue: min,
                });
            }
            sum += el.matrix();
        }
        let dev = (&sum - CMatrix::identity(d, d)).norm();
        if dev > POVM_SUM_TOL {
            return Err(QdtError::IncompleteSum { deviation: dev });
        }
        Ok(Self { elements })
    }

    pub fn n_outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &HermitianOp {
        &self.elements[i]
    }
}

/// An orthonormal Hermitian operator basis {Ω_a}, a = 1..d², with
/// Ω_1 = I/√d and Tr(Ω_a) = 0 for a ≥ 2.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    d: usize,
    ops: Vec<CMatrix>,
}

impl OrthonormalBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of basis operators, d².
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn op(&self, a: usize) -> &CMatrix {
        &self.ops[a]
    }

    /// Conjugate the whole basis by a unitary: Ω_a → U Ω_a U^dag. This yields
    /// another valid basis (orthonormality and traces are invariant), useful
    /// for checking that basis-independent quantities really are.
    pub fn conjugated_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.d || u.ncols() != self.d {
            return Err(QdtError::DimensionMismatch {
                expected: self.d,
                got: u.nrows(),
            });
        }
        let dev = (u.adjoint() * u - CMatrix::identity(self.d, self.d)).norm();
        if dev > 1e-10 {
            return Err(QdtError::InvalidArgument(format!(
                "conjugating matrix is not unitary (|U^dag U - I| = {dev:.3e})"
            )));
        }
        let ops = self.ops.iter().map(|om| u * om * u.adjoint()).collect();
        Ok(Self { d: self.d, ops })
    }
}

/// The generalized Gell-Mann basis for dimension `d`.
///
/// Order: Ω_1 = I/√d; then the symmetric pairs (|i><j| + |j><i|)/√2 for i < j
/// in lexicographic order; then the antisymmetric pairs
/// (-i|i><j| + i|j><i|)/√2, same order; then the d-1 diagonal traceless
/// operators (Σ_{k<l} |k><k| - l|l><l|)/√(l(l+1)) for l = 1..d-1.
pub fn gell_mann_basis(d: usize) -> OrthonormalBasis {
    assert!(d >= 2, "operator basis needs dimension >= 2");
    let mut ops = Vec::with_capacity(d * d);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    ops.push(CMatrix::identity(d, d).scale(inv_sqrt_d));

    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let mut m = CMatrix::zeros(d, d);
            m[(i, j)] = Complex64::new(s, 0.0);
            m[(j, i)] = Complex64::new(s, 0.0);
            ops.push(m);
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut m = CMatrix::zeros(d, d);
            m[(i, j)] = Complex64::new(0.0, -s);
            m[(j, i)] = Complex64::new(0.0, s);
            ops.push(m);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for k in 0..l {
            m[(k, k)] = Complex64::new(norm, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
        ops.push(m);
    }
    debug_assert_eq!(ops.len(), d * d);
    OrthonormalBasis { d, ops }
}

/// Real coefficient vector of an operator in an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    d: usize,
    coeffs: RVector,
}

impl ParamVector {
    pub fn new(d: usize, coeffs: RVector) -> Result<Self> {
        if coeffs.len() != d * d {
            return Err(QdtError::DimensionMismatch {
                expected: d * d,
                got: coeffs.len(),
            });
        }
        Ok(Self { d, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &RVector {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Expand a Hermitian operator in the basis: θ_a = Tr(A Ω_a).
///
/// The traces are real for Hermitian input; an imaginary residue above 1e-12
/// indicates a non-Hermitian matrix slipped through and is reported as an
/// error rather than silently truncated.
pub fn parameterize(op: &HermitianOp, basis: &OrthonormalBasis) -> Result<ParamVector> {
    if op.dim() != basis.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: basis.dim(),
            got: op.dim(),
        });
    }
    let mut coeffs = RVector::zeros(basis.len());
    for a in 0..basis.len() {
        let tr = (op.matrix() * basis.op(a)).trace();
        if tr.im.abs() > 1e-12 {
            return Err(QdtError::NotHermitian {
                deviation: tr.im.abs(),
            });
        }
        coeffs[a] = tr.re;
    }
    ParamVector::new(basis.dim(), coeffs)
}

/// Rebuild the operator A = Σ_a θ_a Ω_a from its coefficients.
pub fn deparameterize(theta: &ParamVector, basis: &OrthonormalBasis) -> Result<HermitianOp> {
    if theta.dim() != basis.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: basis.dim(),
            got: theta.dim(),
        });
    }
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    for a in 0..basis.len() {
        m += basis.op(a).scale(theta.coeffs()[a]);
    }
    HermitianOp::new(m)
}

/// Eigendecomposition A = V Λ V^dag with a deterministic gauge.
///
/// Eigenvalues come back in descending order. Each eigenvector is multiplied by
/// a phase so that its component of largest modulus (first such component on
/// ties) is real and nonnegative, making the decomposition reproducible across
/// runs and platforms up to degeneracies.
pub fn spectral_decomp(op: &HermitianOp) -> (RVector, CMatrix) {
    let d = op.dim();
    let eig = nalgebra::SymmetricEigen::new(op.matrix().clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut values = RVector::zeros(d);
    let mut vectors = CMatrix::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        values[new_col] = eig.eigenvalues[old_col];
        let col = eig.eigenvectors.column(old_col);
        // Gauge: rotate the phase of the largest-modulus component to +real.
        let mut pivot = 0;
        let mut best = 0.0;
        for (idx, z) in col.iter().enumerate() {
            if z.norm() > best + 1e-12 {
                best = z.norm();
                pivot = idx;
            }
        }
        let phase = if best > 0.0 {
            col[pivot] / best
        } else {
            Complex64::new(1.0, 0.0)
        };
        let fixed = col.map(|z| z * phase.conj());
        vectors.set_column(new_col, &fixed);
    }
    (values, vectors)
}

/// Principal square root of a PSD operator via its eigendecomposition.
///
/// Eigenvalues in [-[`PSD_TOL`], 0) are clamped to zero; anything more negative
/// is a genuine PSD violation and errors out.
pub fn principal_sqrt(op: &HermitianOp) -> Result<HermitianOp> {
    let (values, vectors) = spectral_decomp(op);
    let mut roots = RVector::zeros(values.len());
    for (i, &v) in values.iter().enumerate() {
        if v < -PSD_TOL {
            return Err(QdtError::NotPsd { min_eigenvalue: v });
        }
        roots[i] = v.max(0.0).sqrt();
    }
    let diag = CMatrix::from_fn(values.len(), values.len(), |r, c| {
        if r == c {
            Complex64::new(roots[r], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let m = &vectors * diag * vectors.adjoint();
    HermitianOp::new((&m + m.adjoint()).scale(0.5))
}

/// Complex matrix with i.i.d. standard complex Gaussian entries.
fn ginibre(d: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed random unitary, drawn from an explicit stream.
///
/// QR decomposition of a Ginibre matrix with the R diagonal's phases absorbed
/// into Q, which makes the distribution exactly Haar rather than QR-biased.
pub fn haar_random_unitary_with(d: usize, rng: &mut impl Rng) -> CMatrix {
    let qr = ginibre(d, rng).qr();
    let r_diag: Vec<Complex64> = (0..d).map(|i| qr.r()[(i, i)]).collect();
    let mut q = qr.q();
    for (j, rj) in r_diag.iter().enumerate() {
        let phase = if rj.norm() > 0.0 {
            rj / rj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let col = q.column(j).map(|z| z * phase);
        q.set_column(j, &col);
    }
    q
}

/// Haar-distributed random unitary for seed/stream pair.
pub fn haar_random_unitary(d: usize, seed: u64, stream: u64) -> CMatrix {
    haar_random_unitary_with(d, &mut stream_rng(seed, stream))
}

/// Haar-random pure state |psi><psi|, drawn from an explicit stream.
pub fn random_pure_state_with(d: usize, rng: &mut impl Rng) -> DensityMatrix {
    let mut psi = CVector::from_fn(d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = psi.norm();
    psi.unscale_mut(norm);
    DensityMatrix::pure(&psi).expect("normalized ket is a valid pure state")
}

/// Haar-random pure state for a seed/stream pair.
pub fn random_pure_state(d: usize, seed: u64, stream: u64) -> DensityMatrix {
    random_pure_state_with(d, &mut stream_rng(seed, stream))
}

/// Random POVM with `n` outcomes on a d-dimensional space.
///
/// Draws n random PSD operators Q_i = G_i G_i^dag and normalizes them with
/// S = Σ Q_i as P_i = S^{-1/2} Q_i S^{-1/2}, which sums to the identity by
/// construction. All elements are full rank almost surely.
pub fn random_povm_with(n: usize, d: usize, rng: &mut impl Rng) -> Povm {
    assert!(n >= 2, "a POVM needs at least 2 outcomes");
    let qs: Vec<CMatrix> = (0..n)
        .map(|_| {
            let g = ginibre(d, rng);
            &g * g.adjoint()
        })
        .collect();
    let mut s = CMatrix::zeros(d, d);
    for q in &qs {
        s += q;
    }
    let s_op = HermitianOp::new((&s + s.adjoint()).scale(0.5)).expect("sum of PSD is Hermitian");
    let (values, vectors) = spectral_decomp(&s_op);
    let inv_root = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex64::new(1.0 / values[r].sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let s_inv_sqrt = &vectors * inv_root * vectors.adjoint();
    let elements = qs
        .into_iter()
        .map(|q| {
            let m = &s_inv_sqrt * q * &s_inv_sqrt;
            HermitianOp::new((&m + m.adjoint()).scale(0.5)).expect("conjugated PSD is Hermitian")
        })
        .collect();
    Povm::new(elements).expect("normalized random elements form a POVM")
}

/// Random POVM for a seed/stream pair.
pub fn random_povm(n: usize, d: usize, seed: u64, stream: u64) -> Povm {
    random_povm_with(n, d, &mut stream_rng(seed, stream))
}
