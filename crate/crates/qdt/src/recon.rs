//! Two-stage detector reconstruction from frequency data.
//!
//! Stage 1 solves the trace-constrained least-squares problem in coefficient
//! space. Writing ŷᵢ for the frequency row of outcome i and y₀ for the
//! all-ones vector, the constrained solution decouples into
//! θ̂ᵢ = (XᵀX)⁻¹Xᵀ(ŷᵢ − y₀/n) + 𝒹/n with 𝒹 = (√d, 0, …, 0)ᵀ, which sums to 𝒹
//! over outcomes by construction — the estimated elements always add up to
//! the identity, but individual elements may dip below zero under shot noise.
//!
//! Stage 2 restores positivity without losing the completeness constraint:
//! each element splits spectrally into a positive part F̂ᵢ and a flipped
//! nonpositive part Ĝᵢ, the F̂ᵢ are whitened by a factor C of ΣF̂ᵢ = CC†, and a
//! closing unitary Û_op = √(C†C)·C⁻¹ aligns the result so the output is a
//! valid POVM regardless of which factor C was chosen.

use crate::error::{QdtError, Result};
use crate::operators::{
    deparameterize, gell_mann_basis, parameterize, principal_sqrt, spectral_decomp, CMatrix,
    HermitianOp, ParamVector, Povm, RVector,
};
use crate::probes::{design_matrix, DesignReport, ProbeSet};
use crate::sim::FrequencyData;

/// Eigenvalues with |λ| at or below this go to the nonpositive part in the
/// Stage-2 split.
const SPLIT_TOL: f64 = 1e-12;

/// Stage-1 output: one Hermitian (possibly non-PSD) operator per outcome,
/// summing to the identity within 1e-8.
#[derive(Debug, Clone)]
pub struct Stage1Estimate {
    elements: Vec<HermitianOp>,
    thetas: Vec<ParamVector>,
}

impl Stage1Estimate {
    /// Wrap per-outcome Hermitian estimates, enforcing the completeness
    /// constraint Σᵢ Êᵢ = I within 1e-8.
    pub fn new(elements: Vec<HermitianOp>) -> Result<Self> {
        if elements.len() < 2 {
            return Err(QdtError::InvalidArgument(format!(
                "need at least 2 outcome estimates, got {}",
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
            sum += el.matrix();
        }
        let dev = (&sum - CMatrix::identity(d, d)).norm();
        if dev > 1e-8 {
            return Err(QdtError::IncompleteSum { deviation: dev });
        }
        let basis = gell_mann_basis(d);
        let thetas = elements
            .iter()
            .map(|el| parameterize(el, &basis).expect("validated Hermitian elements"))
            .collect();
        Ok(Self { elements, thetas })
    }

    pub fn n_outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn element(&self, i: usize) -> &HermitianOp {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    /// Coefficient vector of element i in the default basis.
    pub fn theta(&self, i: usize) -> &ParamVector {
        &self.thetas[i]
    }
}

/// Stage-2 output: a valid POVM plus the closing unitary that was applied.
#[derive(Debug, Clone)]
pub struct PhysicalEstimate {
    povm: Povm,
    gauge: CMatrix,
}

impl PhysicalEstimate {
    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn into_povm(self) -> Povm {
        self.povm
    }

    /// The unitary Û_op used to close the reconstruction.
    pub fn gauge(&self) -> &CMatrix {
        &self.gauge
    }
}

/// Stage 1: constrained least squares in coefficient space.
///
/// Requires an informationally complete probe set (rank X = d²); the
/// completeness constraint is built into the solution formula rather than
/// imposed afterwards.
pub fn stage1_cls(freqs: &FrequencyData, set: &ProbeSet) -> Result<Stage1Estimate> {
    if freqs.n_probes() != set.len() {
        return Err(QdtError::DimensionMismatch {
            expected: set.len(),
            got: freqs.n_probes(),
        });
    }
    let d = set.dim();
    let d2 = d * d;
    let n = freqs.n_outcomes();
    if n < 2 {
        return Err(QdtError::InvalidArgument(
            "detector needs at least 2 outcomes".into(),
        ));
    }
    let design = design_matrix(set);
    let x = design.matrix();
    let svd = x.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * sigma_max)
        .count();
    if rank < d2 {
        return Err(QdtError::IncompleteDesign { rank, needed: d2 });
    }

    let basis = gell_mann_basis(d);
    let sqrt_d = (d as f64).sqrt();
    let nf = n as f64;
    let mut elements = Vec::with_capacity(n);
    for i in 0..n {
        // Shift by the uniform detector, solve, shift back: the constraint
        // sum drops out of the regression.
        let shifted = RVector::from_iterator(
            set.len(),
            freqs.freqs().row(i).iter().map(|&p| p - 1.0 / nf),
        );
        let mut theta = svd
            .solve(&shifted, 1e-9 * sigma_max)
            .map_err(|e| QdtError::Numerical(format!("least-squares solve failed: {e}")))?;
        theta[0] += sqrt_d / nf;
        elements.push(deparameterize(&ParamVector::new(d, theta)?, &basis)?);
    }
    Stage1Estimate::new(elements)
}

/// Split a Hermitian operator into (positive part, flipped nonpositive part):
/// A = F − G with F, G both PSD built from the eigenvalue sign.
fn positive_split(op: &HermitianOp) -> (HermitianOp, HermitianOp) {
    let d = op.dim();
    let (values, vectors) = spectral_decomp(op);
    let mut f = CMatrix::zeros(d, d);
    let mut g = CMatrix::zeros(d, d);
    for k in 0..d {
        let v = vectors.column(k);
        let outer = v * v.adjoint();
        if values[k] > SPLIT_TOL {
            f += outer.scale(values[k]);
        } else {
            g += outer.scale(-values[k]);
        }
    }
    (
        HermitianOp::new((&f + f.adjoint()).scale(0.5)).expect("split part is Hermitian"),
        HermitianOp::new((&g + g.adjoint()).scale(0.5)).expect("split part is Hermitian"),
    )
}

/// Stage 2 with an explicit factor C satisfying CC† = ΣF̂ᵢ. The public entry
/// point uses the principal Hermitian square root; the final POVM does not
/// depend on the factor choice because Û_op absorbs it.
fn stage2_from_factor(
    positives: &[HermitianOp],
    c_factor: &CMatrix,
) -> Result<(Vec<HermitianOp>, CMatrix)> {
    let d = c_factor.nrows();
    let c_inv = c_factor
        .clone()
        .try_inverse()
        .ok_or_else(|| QdtError::Numerical("whitening factor is singular".into()))?;
    // Closing unitary from the polar decomposition of C.
    let ctc = HermitianOp::new(c_factor.adjoint() * c_factor)?;
    let u_op = principal_sqrt(&ctc)?.matrix() * &c_inv;
    let unitary_dev = (u_op.adjoint() * &u_op - CMatrix::identity(d, d)).norm();
    if unitary_dev > 1e-9 {
        return Err(QdtError::Numerical(format!(
            "closing matrix failed the unitarity check (|U^dag U - I| = {unitary_dev:.3e})"
        )));
    }
    let elements = positives
        .iter()
        .map(|f| {
            let b = &c_inv * f.matrix() * c_inv.adjoint();
            let p = u_op.adjoint() * b * &u_op;
            HermitianOp::new((&p + p.adjoint()).scale(0.5)).expect("conjugation keeps Hermitian")
        })
        .collect();
    Ok((elements, u_op))
}

/// Stage 2: eigenvalue correction producing a physical estimate.
pub fn stage2_correct(estimate: &Stage1Estimate) -> Result<PhysicalEstimate> {
    let d = estimate.dim();
    let mut sum = CMatrix::zeros(d, d);
    for el in estimate.elements() {
        sum += el.matrix();
    }
    let dev = (&sum - CMatrix::identity(d, d)).norm();
    if dev > 1e-6 {
        return Err(QdtError::IncompleteSum { deviation: dev });
    }

    let positives: Vec<HermitianOp> = estimate
        .elements()
        .iter()
        .map(|el| positive_split(el).0)
        .collect();
    let mut f_sum = CMatrix::zeros(d, d);
    for f in &positives {
        f_sum += f.matrix();
    }
    let f_sum = HermitianOp::new((&f_sum + f_sum.adjoint()).scale(0.5))?;
    // ΣF̂ᵢ ≥ I when the input sums to the identity, so singularity signals a
    // broken caller rather than bad data.
    if f_sum.min_eigenvalue() < 1e-12 {
        return Err(QdtError::Numerical(
            "sum of positive parts is singular".into(),
        ));
    }
    let c_factor = principal_sqrt(&f_sum)?.matrix().clone();
    let (elements, gauge) = stage2_from_factor(&positives, &c_factor)?;
    Ok(PhysicalEstimate {
        povm: Povm::new(elements)?,
        gauge,
    })
}

/// Full pipeline: Stage 1 then Stage 2.
pub fn reconstruct(freqs: &FrequencyData, set: &ProbeSet) -> Result<PhysicalEstimate> {
    stage2_correct(&stage1_cls(freqs, set)?)
}

/// Total squared error Σᵢ ‖P̂ᵢ − Pᵢ‖² (Frobenius).
pub fn mse(est: &Povm, truth: &Povm) -> Result<f64> {
    if est.n_outcomes() != truth.n_outcomes() {
        return Err(QdtError::DimensionMismatch {
            expected: truth.n_outcomes(),
            got: est.n_outcomes(),
        });
    }
    if est.dim() != truth.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: truth.dim(),
            got: est.dim(),
        });
    }
    Ok((0..truth.n_outcomes())
        .map(|i| {
            est.element(i)
                .sub(truth.element(i))
                .frobenius_norm()
                .powi(2)
        })
        .sum())
}

/// Which analytic error bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Bound on the Stage-1 squared error summed over the n−1 unconstrained
    /// outcome blocks (the last block is fixed by completeness).
    Stage1,
    /// Bound on the final post-correction squared error.
    Final,
}

/// Analytic mean-squared-error bound for a design.
///
/// Stage 1: (n−1)/(4N) · umse_criterion. Final: the Stage-1 bound times
/// (dn + 2√d·n + 1), the worst-case amplification of the eigenvalue
/// correction. Incomplete designs give +infinity.
pub fn umse_bound(report: &DesignReport, n: usize, shots: u64, which: BoundKind) -> f64 {
    if !report.complete {
        return f64::INFINITY;
    }
    let stage1 = (n as f64 - 1.0) / (4.0 * shots as f64) * report.umse_criterion;
    match which {
        BoundKind::Stage1 => stage1,
        BoundKind::Final => {
            let d = report.dim as f64;
            (d * n as f64 + 2.0 * d.sqrt() * n as f64 + 1.0) * stage1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{haar_random_unitary, random_povm, random_povm_with};
    use crate::probes::{design_report, random_pure_set, sic_states_d2, sic_states_d4};
    use crate::rng::stream_rng;
    use crate::sim::{exact_frequencies, sample_frequencies, MeasurementPlan};
    use approx::assert_relative_eq;
    use nalgebra::{Complex, DMatrix};

    fn diag_op(entries: &[f64]) -> HermitianOp {
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

    #[test]
    fn noiseless_data_reproduces_truth() {
        let set = sic_states_d4();
        let povm = random_povm(3, 4, 60, 0);
        let data = exact_frequencies(&povm, &set).unwrap();
        let stage1 = stage1_cls(&data, &set).unwrap();
        for i in 0..3 {
            assert!(
                stage1.element(i).sub(povm.element(i)).frobenius_norm() < 1e-8,
                "stage-1 element {i} off"
            );
        }
        let physical = reconstruct(&data, &set).unwrap();
        assert!(mse(physical.povm(), &povm).unwrap() < 1e-14);
    }

    #[test]
    fn uniform_detector_gives_uniform_blocks() {
        let set = sic_states_d2();
        let half = HermitianOp::identity(2).scale(0.5);
        let povm = Povm::new(vec![half.clone(), half]).unwrap();
        let data = exact_frequencies(&povm, &set).unwrap();
        let stage1 = stage1_cls(&data, &set).unwrap();
        for i in 0..2 {
            let theta = stage1.theta(i).coeffs();
            assert_relative_eq!(theta[0], 2.0_f64.sqrt() / 2.0, epsilon = 1e-10);
            for a in 1..4 {
                assert!(theta[a].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stage1_sum_is_identity_under_noise() {
        let set = sic_states_d4();
        let povm = random_povm(4, 4, 61, 0);
        let plan = MeasurementPlan::even(set.clone(), 10_000).unwrap();
        let data = sample_frequencies(&povm, &plan, 3, 0).unwrap();
        let stage1 = stage1_cls(&data, &set).unwrap();
        let mut sum = CMatrix::zeros(4, 4);
        for el in stage1.elements() {
            sum += el.matrix();
        }
        assert!((sum - CMatrix::identity(4, 4)).norm() < 1e-8);
    }

    #[test]
    fn incomplete_design_is_rejected() {
        let set = random_pure_set(10, 4, 0); // 10 < 16 states
        let povm = random_povm(2, 4, 62, 0);
        let data = exact_frequencies(&povm, &set).unwrap();
        assert!(matches!(
            stage1_cls(&data, &set),
            Err(QdtError::IncompleteDesign { .. })
        ));
    }

    #[test]
    fn stage1_matches_constrained_kkt_oracle() {
        // Independent check: solve the constrained least-squares problem
        // min Σᵢ‖Xθᵢ − ŷᵢ‖² s.t. Σᵢθᵢ = 𝒹 through its full KKT system and
        // compare block by block.
        let set = sic_states_d2();
        let povm = random_povm(3, 2, 63, 0);
        let plan = MeasurementPlan::even(set.clone(), 500).unwrap();
        let data = sample_frequencies(&povm, &plan, 8, 0).unwrap();
        let stage1 = stage1_cls(&data, &set).unwrap();

        let x = design_matrix(&set);
        let xtx = x.matrix().transpose() * x.matrix();
        let (n, d2) = (3usize, 4usize);
        let dim = n * d2 + d2;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = RVector::zeros(dim);
        for i in 0..n {
            for a in 0..d2 {
                for b in 0..d2 {
                    kkt[(i * d2 + a, i * d2 + b)] = 2.0 * xtx[(a, b)];
                }
                // Lagrange coupling to the sum constraint.
                kkt[(i * d2 + a, n * d2 + a)] = 1.0;
                kkt[(n * d2 + a, i * d2 + a)] = 1.0;
            }
            let y = RVector::from_iterator(set.len(), data.freqs().row(i).iter().cloned());
            let xty = x.matrix().transpose() * y;
            for a in 0..d2 {
                rhs[i * d2 + a] = 2.0 * xty[a];
            }
        }
        rhs[n * d2] = 2.0_f64.sqrt(); // constraint target 𝒹 = (√d, 0, 0, 0)
        let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
        for i in 0..n {
            for a in 0..d2 {
                assert_relative_eq!(stage1.theta(i).coeffs()[a], sol[i * d2 + a], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn stage2_is_identity_on_physical_input() {
        let povm = random_povm(3, 4, 64, 0);
        let stage1 = Stage1Estimate::new(povm.elements().to_vec()).unwrap();
        let out = stage2_correct(&stage1).unwrap();
        assert!(mse(out.povm(), &povm).unwrap() < 1e-20);
        assert!((out.gauge() - CMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn stage2_hand_checkable_case() {
        // Ê₁ = diag(1.2, −0.2): positive part diag(1.2, 0); Ê₂ = diag(−0.2, 1.2).
        // ΣF̂ = diag(1.2, 1.2), C = √1.2·I, so P̂₁ = diag(1, 0), P̂₂ = diag(0, 1).
        let e1 = diag_op(&[1.2, -0.2]);
        let e2 = diag_op(&[-0.2, 1.2]);
        let out = stage2_correct(&Stage1Estimate::new(vec![e1, e2]).unwrap()).unwrap();
        assert!(
            out.povm()
                .element(0)
                .sub(&diag_op(&[1.0, 0.0]))
                .frobenius_norm()
                < 1e-10
        );
        assert!(
            out.povm()
                .element(1)
                .sub(&diag_op(&[0.0, 1.0]))
                .frobenius_norm()
                < 1e-10
        );
    }

    #[test]
    fn stage2_output_is_physical_and_gauge_unitary() {
        let set = sic_states_d4();
        let povm = random_povm(3, 4, 65, 0);
        let plan = MeasurementPlan::even(set.clone(), 2_000).unwrap();
        for stream in 0..5 {
            let data = sample_frequencies(&povm, &plan, 21, stream).unwrap();
            let out = reconstruct(&data, &set).unwrap();
            // Povm::new inside already validated PSD and completeness.
            let g = out.gauge();
            assert!((g.adjoint() * g - CMatrix::identity(4, 4)).norm() < 1e-9);
        }
    }

    #[test]
    fn stage2_result_is_factorization_independent() {
        // Principal-root C versus Cholesky C must give the same POVM; the
        // closing unitary absorbs the factor choice.
        let set = sic_states_d4();
        let povm = random_povm(2, 4, 66, 0);
        let plan = MeasurementPlan::even(set.clone(), 1_000).unwrap();
        let data = sample_frequencies(&povm, &plan, 30, 0).unwrap();
        let stage1 = stage1_cls(&data, &set).unwrap();

        let reference = stage2_correct(&stage1).unwrap();

        let positives: Vec<HermitianOp> = stage1
            .elements()
            .iter()
            .map(|el| positive_split(el).0)
            .collect();
        let mut f_sum = CMatrix::zeros(4, 4);
        for f in &positives {
            f_sum += f.matrix();
        }
        let chol = f_sum.cholesky().expect("ΣF̂ is positive definite");
        let (elements, _) = stage2_from_factor(&positives, &chol.l()).unwrap();
        for (i, el) in elements.iter().enumerate() {
            assert!(
                reference.povm().element(i).sub(el).frobenius_norm() < 1e-9,
                "element {i} depends on the factorization"
            );
        }
    }

    #[test]
    fn gauge_beats_random_unitaries() {
        // Û_op minimizes ‖C·U − I‖ over unitaries.
        let set = sic_states_d2();
        let povm = random_povm(2, 2, 67, 0);
        let plan = MeasurementPlan::even(set.clone(), 300).unwrap();
        let data = sample_frequencies(&povm, &plan, 44, 0).unwrap();
        let stage1 = stage1_cls(&data, &set).unwrap();
        let positives: Vec<HermitianOp> = stage1
            .elements()
            .iter()
            .map(|el| positive_split(el).0)
            .collect();
        let mut f_sum = CMatrix::zeros(2, 2);
        for f in &positives {
            f_sum += f.matrix();
        }
        let c = principal_sqrt(&HermitianOp::new(f_sum).unwrap())
            .unwrap()
            .matrix()
            .clone();
        let (_, u_op) = stage2_from_factor(&positives, &c).unwrap();
        let best = (&c * &u_op - CMatrix::identity(2, 2)).norm();
        let mut rng = stream_rng(68, 0);
        for _ in 0..100 {
            let u = crate::operators::haar_random_unitary_with(2, &mut rng);
            assert!(best <= (&c * u - CMatrix::identity(2, 2)).norm() + 1e-12);
        }
    }

    #[test]
    fn mse_examples() {
        let half = HermitianOp::identity(2).scale(0.5);
        let uniform = Povm::new(vec![half.clone(), half]).unwrap();
        assert_eq!(mse(&uniform, &uniform).unwrap(), 0.0);

        let sharp = Povm::new(vec![HermitianOp::identity(2), HermitianOp::zero(2)]).unwrap();
        assert_relative_eq!(mse(&uniform, &sharp).unwrap(), 1.0, epsilon = 1e-12);

        let mut rng = stream_rng(69, 0);
        let a = random_povm_with(3, 2, &mut rng);
        let b = random_povm_with(3, 2, &mut rng);
        let brute: f64 = (0..3)
            .map(|i| {
                let diff = a.element(i).matrix() - b.element(i).matrix();
                diff.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum();
        assert_relative_eq!(mse(&a, &b).unwrap(), brute, epsilon = 1e-12);

        let five = random_povm(5, 2, 70, 0);
        assert!(mse(&a, &five).is_err());
    }

    #[test]
    fn umse_bound_values() {
        let sic = design_report(&sic_states_d4());
        assert_relative_eq!(
            umse_bound(&sic, 2, 304, BoundKind::Stage1),
            0.25,
            epsilon = 1e-12
        );
        let tetra = design_report(&sic_states_d2());
        assert_relative_eq!(
            umse_bound(&tetra, 2, 20, BoundKind::Stage1),
            0.25,
            epsilon = 1e-12
        );
        assert!(
            umse_bound(&sic, 2, 304, BoundKind::Final)
                >= umse_bound(&sic, 2, 304, BoundKind::Stage1)
        );
        let incomplete = design_report(&random_pure_set(10, 4, 0));
        assert!(umse_bound(&incomplete, 2, 100, BoundKind::Stage1).is_infinite());
    }

    #[test]
    fn stage1_error_respects_bound_at_tight_case() {
        // The uniform qubit detector with tetrahedron probes saturates the
        // Stage-1 bound: every Born probability is 1/2, maximizing the
        // binomial variance. The bound covers the n−1 free blocks (the last
        // is fixed by completeness), so sum the error over those.
        let set = sic_states_d2();
        let report = design_report(&set);
        let half = HermitianOp::identity(2).scale(0.5);
        let povm = Povm::new(vec![half.clone(), half]).unwrap();
        let shots = 10_000u64;
        let plan = MeasurementPlan::even(set.clone(), shots).unwrap();
        let bound = umse_bound(&report, 2, shots, BoundKind::Stage1);

        let reps = 300;
        let mut total = 0.0;
        for rep in 0..reps {
            let data = sample_frequencies(&povm, &plan, 500, rep).unwrap();
            let stage1 = stage1_cls(&data, &set).unwrap();
            total += stage1
                .element(0)
                .sub(povm.element(0))
                .frobenius_norm()
                .powi(2);
        }
        let mean = total / reps as f64;
        assert!(
            (mean - bound).abs() < 0.15 * bound,
            "tight-case mean {mean} should sit near bound {bound}"
        );
    }

    #[test]
    fn reconstruction_handles_rotated_detectors() {
        // Conjugating detector and data leaves the recovered element spectra
        // invariant (noiseless case).
        let set = sic_states_d4();
        let u = haar_random_unitary(4, 71, 0);
        let base = random_povm(2, 4, 72, 0);
        let rotated = Povm::new(
            base.elements()
                .iter()
                .map(|el| el.conjugate_by(&u))
                .collect(),
        )
        .unwrap();
        let est_base = reconstruct(&exact_frequencies(&base, &set).unwrap(), &set).unwrap();
        let est_rot = reconstruct(&exact_frequencies(&rotated, &set).unwrap(), &set).unwrap();
        for i in 0..2 {
            let ev_base = est_base.povm().element(i).eigenvalues();
            let ev_rot = est_rot.povm().element(i).eigenvalues();
            assert!((ev_base - ev_rot).norm() < 1e-7);
        }
    }
}
