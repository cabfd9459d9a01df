//! Fidelity measures for states and detector elements, plus the
//! linear-dependence test that predicts when the trace-normalized fidelity
//! misreports unequal detectors as identical.
//!
//! For detector elements the widely used figure is the trace-normalized
//! overlap F₀. It is blind to scale: F₀(2P, P) = 1. A POVM whose elements are
//! linearly dependent can therefore be estimated wrongly yet score F₀ = 1 on
//! every element. The corrected figure F subtracts a trace-mismatch penalty
//! and equals 1 exactly when the two operators coincide.

use crate::error::{QdtError, Result};
use crate::operators::{
    gell_mann_basis, parameterize, principal_sqrt, spectral_decomp, DensityMatrix, HermitianOp,
    Povm, RVector,
};
use nalgebra::DMatrix;

/// Singular values below this fraction of the largest are treated as zero when
/// ranking the element stack.
const RANK_TOL: f64 = 1e-9;
/// Residual tolerance for accepting a linear-dependence certificate.
const CERT_TOL: f64 = 1e-8;

/// Tr √M for Hermitian M that is PSD up to roundoff: eigenvalues are clamped
/// at zero before the square root, so noise at the -1e-12 scale cannot turn
/// into NaN.
fn trace_sqrt(m: &HermitianOp) -> f64 {
    let (values, _) = spectral_decomp(m);
    values.iter().map(|&v| v.max(0.0).sqrt()).sum()
}

/// Unnormalized overlap [Tr √(√a b √a)]² for PSD a, b.
fn psd_overlap(a: &HermitianOp, b: &HermitianOp) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let root = principal_sqrt(a)?;
    let mid = root.matrix() * b.matrix() * root.matrix();
    let mid = HermitianOp::new((&mid + mid.adjoint()).scale(0.5))?;
    let t = trace_sqrt(&mid);
    Ok(t * t)
}

/// Fidelity between quantum states, [Tr √(√a b √a)]² ∈ [0, 1].
pub fn state_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "states must share a dimension");
    psd_overlap(a.operator(), b.operator())
        .expect("density matrices are valid PSD operators")
        .clamp(0.0, 1.0)
}

/// Trace-normalized detector fidelity
/// F₀ = [Tr √(√est truth √est)]² / (Tr truth · Tr est).
///
/// Scale-blind: F₀(cP, P) = 1 for every c > 0, which is exactly the
/// distortion symptom [`detect_distortion`] diagnoses.
pub fn detector_fidelity_f0(est: &HermitianOp, truth: &HermitianOp) -> Result<f64> {
    let (te, tt) = (est.trace(), truth.trace());
    if te < 1e-14 || tt < 1e-14 {
        return Err(QdtError::InvalidArgument(format!(
            "detector fidelity needs nonzero traces, got est {te:.3e}, truth {tt:.3e}"
        )));
    }
    Ok(psd_overlap(est, truth)? / (te * tt))
}

/// Distortion-free detector fidelity F = F₀ − [Tr(truth − est)]²/d².
///
/// Lies in (1/d − 1, 1]; the lower bound is approached but never attained.
/// F = 1 if and only if est = truth, so a perfect score cannot be faked by
/// rescaling.
pub fn detector_fidelity_f(est: &HermitianOp, truth: &HermitianOp) -> Result<f64> {
    let f0 = detector_fidelity_f0(est, truth)?;
    let d = est.dim() as f64;
    let gap = truth.trace() - est.trace();
    Ok(f0 - gap * gap / (d * d))
}

/// Test whether a POVM's elements are linearly dependent.
///
/// Returns `(true, Some(c))` when a nonzero real vector c with Σ cᵢ Pᵢ = 0
/// exists — precisely the condition under which F₀ can report 1 for a wrong
/// estimate. The certificate follows a first-dependent-row convention: the
/// earliest element expressible from its predecessors gets coefficient −1,
/// its expansion coefficients fill the prefix, the tail is zero, and the
/// overall sign makes the first nonzero entry positive. Any POVM with more
/// than d² outcomes is dependent automatically.
pub fn detect_distortion(povm: &Povm) -> (bool, Option<RVector>) {
    let d = povm.dim();
    let n = povm.n_outcomes();
    let basis = gell_mann_basis(d);
    // Stack the real coefficient vectors as rows of an n x d² matrix.
    let mut stack = DMatrix::<f64>::zeros(n, d * d);
    for i in 0..n {
        let theta = parameterize(povm.element(i), &basis)
            .expect("POVM elements are Hermitian by construction");
        stack.set_row(i, &theta.coeffs().transpose());
    }
    let svd = stack.clone().svd(true, false);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * sigma_max)
        .count();
    if rank == n {
        return (false, None);
    }

    // Find the first row that is a combination of its predecessors.
    for i in 1..n {
        let prefix_t = stack.rows(0, i).transpose(); // d² x i
        let target = stack.row(i).transpose();
        let ls = prefix_t.clone().svd(true, true);
        if let Ok(x) = ls.solve(&target, RANK_TOL * sigma_max) {
            let residual = (&prefix_t * &x - &target).norm();
            if residual <= CERT_TOL * (1.0 + target.norm()) {
                let mut c = RVector::zeros(n);
                for j in 0..i {
                    c[j] = x[j];
                }
                c[i] = -1.0;
                if let Some(first) = c.iter().find(|v| v.abs() > 1e-12) {
                    if *first < 0.0 {
                        c.neg_mut();
                    }
                }
                return (true, Some(c));
            }
        }
    }
    // Rank says dependent but no single prefix fit converged; fall back to the
    // left-singular vector of the smallest singular value.
    let u = svd.u.expect("u requested");
    let mut c = RVector::from_iterator(n, u.column(n.min(d * d) - 1).iter().cloned());
    let peak = c.iter().cloned().fold(0.0, |a: f64, v| a.max(v.abs()));
    if peak > 0.0 {
        c.unscale_mut(peak);
    }
    (true, Some(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{random_povm_with, random_pure_state, CMatrix, CVector, Povm};
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use nalgebra::Complex;
    use rand::Rng;
    use rand_distr::StandardNormal;

    const TOL: f64 = 1e-10;

    fn diag(entries: &[f64]) -> HermitianOp {
        let d = entries.len();
        let m = CMatrix::from_fn(d, d, |r, c| {
            if r == c {
                Complex::new(entries[r], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        HermitianOp::new(m).unwrap()
    }

    fn random_psd(d: usize, rng: &mut impl Rng) -> HermitianOp {
        let g = CMatrix::from_fn(d, d, |_, _| {
            Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        HermitianOp::new(&g * g.adjoint()).unwrap()
    }

    /// Random detector-element-like operator: PSD with eigenvalues in (0, 1].
    fn random_contraction(d: usize, rng: &mut impl Rng) -> HermitianOp {
        let q = random_psd(d, rng);
        let peak = q.eigenvalues()[0];
        q.scale(rng.gen_range(0.05..=1.0) / peak)
    }

    #[test]
    fn state_fidelity_trivial_cases() {
        let rho = random_pure_state(3, 1, 0);
        assert_relative_eq!(state_fidelity(&rho, &rho), 1.0, epsilon = TOL);

        let zero = DensityMatrix::new(diag(&[1.0, 0.0]).matrix().clone()).unwrap();
        let one = DensityMatrix::new(diag(&[0.0, 1.0]).matrix().clone()).unwrap();
        assert!(state_fidelity(&zero, &one) < TOL);

        let mixed = DensityMatrix::new(CMatrix::identity(2, 2).scale(0.5)).unwrap();
        assert_relative_eq!(state_fidelity(&zero, &mixed), 0.5, epsilon = TOL);
    }

    #[test]
    fn state_fidelity_is_symmetric() {
        let mut rng = stream_rng(41, 0);
        for _ in 0..10 {
            let a = random_psd(3, &mut rng);
            let b = random_psd(3, &mut rng);
            let a = DensityMatrix::new(a.matrix().scale(1.0 / a.trace())).unwrap();
            let b = DensityMatrix::new(b.matrix().scale(1.0 / b.trace())).unwrap();
            assert_relative_eq!(
                state_fidelity(&a, &b),
                state_fidelity(&b, &a),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn f0_scale_blindness() {
        let mut rng = stream_rng(42, 0);
        let p = random_psd(4, &mut rng);
        assert_relative_eq!(detector_fidelity_f0(&p, &p).unwrap(), 1.0, epsilon = TOL);
        assert_relative_eq!(
            detector_fidelity_f0(&p.scale(2.0), &p).unwrap(),
            1.0,
            epsilon = TOL
        );
        assert!(detector_fidelity_f0(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap() < TOL);
    }

    #[test]
    fn f0_rejects_zero_trace() {
        let p = diag(&[1.0, 0.0]);
        let z = HermitianOp::zero(2);
        assert!(detector_fidelity_f0(&z, &p).is_err());
        assert!(detector_fidelity_f0(&p, &z).is_err());
    }

    #[test]
    fn f_penalizes_scale() {
        let mut rng = stream_rng(43, 0);
        let p = random_psd(4, &mut rng);
        assert_relative_eq!(detector_fidelity_f(&p, &p).unwrap(), 1.0, epsilon = TOL);
        let expect = 1.0 - (p.trace() / 4.0).powi(2);
        assert_relative_eq!(
            detector_fidelity_f(&p.scale(2.0), &p).unwrap(),
            expect,
            epsilon = TOL
        );
    }

    #[test]
    fn f_approaches_lower_bound() {
        // est = diag(tau,0,...), truth = diag(1-tau,1,...,1): F -> 1/d - 1.
        for d in [2, 4] {
            let tau = 1e-6;
            let mut est = vec![0.0; d];
            est[0] = tau;
            let mut truth = vec![1.0; d];
            truth[0] = 1.0 - tau;
            let f = detector_fidelity_f(&diag(&est), &diag(&truth)).unwrap();
            let bound = 1.0 / d as f64 - 1.0;
            assert!(f > bound, "bound must stay strict");
            assert!((f - bound).abs() < 1e-5, "d={d}: F = {f} far from {bound}");
        }
    }

    #[test]
    fn f_bounds_on_random_pairs() {
        // The range (1/d - 1, 1] holds for detector elements, 0 <= P <= I.
        let mut rng = stream_rng(44, 0);
        for d in [2usize, 4] {
            for _ in 0..200 {
                let est = random_contraction(d, &mut rng);
                let truth = random_contraction(d, &mut rng);
                let f = detector_fidelity_f(&est, &truth).unwrap();
                assert!(
                    f > 1.0 / d as f64 - 1.0 && f <= 1.0 + 1e-12,
                    "F out of range: {f}"
                );
            }
        }
    }

    #[test]
    fn f0_sandwiched_by_sorted_spectra() {
        // For PSD A, B with descending eigenvalues a, b:
        // overlap(diag(a), diag(b reversed)) <= overlap(A, B) <= overlap(diag(a), diag(b)).
        let mut rng = stream_rng(45, 0);
        for _ in 0..50 {
            let a = random_psd(4, &mut rng);
            let b = random_psd(4, &mut rng);
            let f = detector_fidelity_f0(&a, &b).unwrap();
            let ea: Vec<f64> = a.eigenvalues().iter().cloned().collect();
            let eb: Vec<f64> = b.eigenvalues().iter().cloned().collect();
            let mut eb_rev = eb.clone();
            eb_rev.reverse();
            let hi = detector_fidelity_f0(&diag(&ea), &diag(&eb)).unwrap();
            let lo = detector_fidelity_f0(&diag(&ea), &diag(&eb_rev)).unwrap();
            assert!(
                f <= hi + 1e-9 && f >= lo - 1e-9,
                "{lo} <= {f} <= {hi} violated"
            );
        }
    }

    /// Independent rank estimate from the Gram matrix of the element stack.
    fn brute_force_dependent(povm: &Povm) -> bool {
        let n = povm.n_outcomes();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = povm.element(i).inner(povm.element(j));
            }
        }
        let evs = gram.symmetric_eigen().eigenvalues;
        let peak = evs.iter().cloned().fold(0.0, f64::max);
        evs.iter().filter(|&&v| v > 1e-12 * peak.max(1.0)).count() < n
    }

    fn certificate_is_valid(povm: &Povm, c: &RVector) {
        let d = povm.dim();
        let mut combo = CMatrix::zeros(d, d);
        for i in 0..povm.n_outcomes() {
            combo += povm.element(i).matrix().scale(c[i]);
        }
        assert!(c.norm() > 1e-6, "certificate must be nonzero");
        assert!(
            combo.norm() < 1e-8,
            "certificate combination not null: {}",
            combo.norm()
        );
    }

    #[test]
    fn distortion_on_uniform_triple() {
        let third = HermitianOp::identity(4).scale(1.0 / 3.0);
        let povm = Povm::new(vec![third.clone(), third.clone(), third]).unwrap();
        let (dep, cert) = detect_distortion(&povm);
        assert!(dep);
        let c = cert.unwrap();
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(c[1], -1.0, epsilon = 1e-9);
        assert!(c[2].abs() < 1e-9);
        certificate_is_valid(&povm, &c);
    }

    #[test]
    fn projective_pair_is_independent() {
        let p = diag(&[1.0, 0.0, 0.0, 0.0]);
        let q = HermitianOp::identity(4).sub(&p);
        let (dep, cert) = detect_distortion(&Povm::new(vec![p, q]).unwrap());
        assert!(!dep);
        assert!(cert.is_none());
    }

    #[test]
    fn overcomplete_povm_always_distorts() {
        // More than d² outcomes forces linear dependence.
        let mut rng = stream_rng(46, 0);
        let povm = random_povm_with(5, 2, &mut rng);
        let (dep, cert) = detect_distortion(&povm);
        assert!(dep);
        certificate_is_valid(&povm, &cert.unwrap());
    }

    #[test]
    fn distortion_matches_brute_force_rank() {
        let mut rng = stream_rng(47, 0);
        for n in 2..=5 {
            for _ in 0..20 {
                let povm = random_povm_with(n, 2, &mut rng);
                let (dep, cert) = detect_distortion(&povm);
                assert_eq!(dep, brute_force_dependent(&povm), "disagreement at n={n}");
                if let Some(c) = cert {
                    certificate_is_valid(&povm, &c);
                }
            }
        }
    }

    #[test]
    fn rank_one_pure_states_compare_by_overlap() {
        // For projectors onto |u>, |v>: state fidelity is |<u|v>|².
        let mut rng = stream_rng(48, 0);
        for _ in 0..10 {
            let u = CVector::from_fn(3, |_, _| {
                Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let v = CVector::from_fn(3, |_, _| {
                Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let a = DensityMatrix::pure(&u).unwrap();
            let b = DensityMatrix::pure(&v).unwrap();
            let overlap =
                (u.adjoint() * &v)[(0, 0)].norm_sqr() / (u.norm_squared() * v.norm_squared());
            // sqrt amplifies eigenvalue dust near zero to ~1e-8, so compare
            // a touch looser than elsewhere.
            assert_relative_eq!(state_fidelity(&a, &b), overlap, epsilon = 1e-7);
        }
    }
}
