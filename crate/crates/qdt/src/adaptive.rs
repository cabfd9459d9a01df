//! Two-step adaptive detector tomography.
//!
//! A fixed probe set estimates every detector spectrum at the standard 1/√N
//! error rate. Rank-deficient detector elements admit a faster rate: once a
//! first pass has located each element's eigenbasis, probes aligned with that
//! basis pin the element's null space exactly, and the residual error of the
//! aligned second pass scales as 1/N in the total shot count.
//!
//! The protocol here spends `step1_shots` on a fixed informationally complete
//! set, diagonalizes each estimated element, builds one aligned probe set per
//! element (either a full projector family on the estimated eigenbasis, or a
//! reference set rotated so a chosen anchor state tracks the estimated null
//! direction), then spends the remaining shots on the pooled aligned sets.
//! Each element is re-estimated from its own aligned block of the pool, so the
//! refinement of one element is never diluted by probes aligned to another.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::error::{QdtError, Result};
use crate::fidelity::detector_fidelity_f;
use crate::operators::{spectral_decomp, CMatrix, DensityMatrix, HermitianOp, Povm};
use crate::probes::{design_matrix, gpb_states, ProbeSet};
use crate::recon::{mse, reconstruct};
use crate::rng::{grid_stream, stream_rng};
use crate::sim::{sample_frequencies_with, MeasurementPlan};
use crate::slope::fit_log_slope;

/// Relative eigenvalue cutoff for estimating the rank of a noisy element.
pub const RANK_EST_TOL: f64 = 1e-3;
/// A probe counts as supported in the null space if ‖ρ − ΠρΠ‖ is below this.
const NULL_SUPPORT_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for the span tests in [`check_conditions`].
const SPAN_RANK_TOL: f64 = 1e-9;
/// Unitarity tolerance for externally supplied rotation matrices.
const UNITARY_TOL: f64 = 1e-9;

/// Estimated rank of a noisy PSD estimate: the number of eigenvalues above
/// [`RANK_EST_TOL`] times the largest one. Returns 0 if the largest
/// eigenvalue is non-positive.
pub fn estimate_rank(op: &HermitianOp) -> usize {
    let ev = op.eigenvalues();
    let top = ev[0];
    if top <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&v| v > RANK_EST_TOL * top).count()
}

fn require_unitary(u: &CMatrix, d: usize) -> Result<()> {
    if u.nrows() != d || u.ncols() != d {
        return Err(QdtError::DimensionMismatch {
            expected: d,
            got: u.nrows(),
        });
    }
    let dev = (u.adjoint() * u - CMatrix::identity(d, d)).norm();
    if dev > UNITARY_TOL {
        return Err(QdtError::InvalidArgument(format!(
            "rotation matrix is not unitary (deviation {dev:.2e})"
        )));
    }
    Ok(())
}

/// Rotate a reference probe set so that its `anchor` state tracks the
/// estimated null direction of a detector element.
///
/// `u_est` must hold the estimated eigenvectors as columns, ordered by
/// descending eigenvalue (the convention of [`spectral_decomp`]), so its last
/// column spans the least-weight — for rank-deficient elements, null —
/// direction. Writing V for the eigenvectors of the anchor state in
/// *ascending* order, every probe is conjugated by W = `u_est`·V†: the
/// anchor's top eigenvector lands exactly on the estimated least-weight
/// direction, and all pairwise overlaps (hence the design scores) are
/// preserved.
pub fn rotate_probe_set(base: &ProbeSet, anchor: usize, u_est: &CMatrix) -> Result<ProbeSet> {
    let d = base.dim();
    if anchor >= base.len() {
        return Err(QdtError::InvalidArgument(format!(
            "anchor index {anchor} out of range for a set of {} probes",
            base.len()
        )));
    }
    require_unitary(u_est, d)?;
    let (_, v_desc) = spectral_decomp(base.state(anchor).operator());
    // Reverse the columns so the anchor's dominant eigenvector comes last,
    // matching the position of the estimated null direction in u_est.
    let mut v_asc = CMatrix::zeros(d, d);
    for k in 0..d {
        v_asc.set_column(k, &v_desc.column(d - 1 - k));
    }
    let w = u_est * v_asc.adjoint();
    let states = base
        .states()
        .iter()
        .map(|rho| DensityMatrix::new(rho.operator().conjugate_by(&w).matrix().clone()))
        .collect::<Result<Vec<_>>>()?;
    ProbeSet::new(
        format!("{}-rotated", base.name()),
        states,
        base.labels().to_vec(),
    )
}

/// Check the identifiability conditions for a second-step probe set against
/// an estimated eigenbasis `u_est` (columns, descending eigenvalue order) and
/// an assumed element rank `r`.
///
/// Returns `(c1, c2, c3)`:
/// * `c1` — the set determines every detector element (full parameter rank);
/// * `c2` — the set determines the refined element in particular (same rank
///   test in this parameterization);
/// * `c3` — the probes supported entirely inside the estimated null space
///   span the full (d−r)²-dimensional space of operators on that subspace,
///   which is what upgrades the error rate of the null block.
pub fn check_conditions(set: &ProbeSet, u_est: &CMatrix, r: usize) -> Result<(bool, bool, bool)> {
    let d = set.dim();
    require_unitary(u_est, d)?;
    if r > d {
        return Err(QdtError::InvalidArgument(format!(
            "rank {r} exceeds the dimension {d}"
        )));
    }
    let x = design_matrix(set);
    let svals = x.matrix().clone().svd(false, false).singular_values;
    let smax = svals.max();
    let rank = svals.iter().filter(|&&s| s > SPAN_RANK_TOL * smax).count();
    let complete = rank == d * d;

    let null_dim = d - r;
    if null_dim == 0 {
        return Ok((complete, complete, true));
    }

    // Orthonormal Hermitian basis of operators on the estimated null space,
    // built from the trailing columns of u_est.
    let cols: Vec<_> = (r..d).map(|k| u_est.column(k).into_owned()).collect();
    let mut null_ops: Vec<HermitianOp> = Vec::with_capacity(null_dim * null_dim);
    for v in &cols {
        null_ops.push(HermitianOp::projector(v));
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..null_dim {
        for b in (a + 1)..null_dim {
            let cross = &cols[a] * cols[b].adjoint();
            let x_op = (&cross + cross.adjoint()).scale(inv_sqrt2);
            let y_op = ((&cross - cross.adjoint()) * num_complex::Complex64::new(0.0, -1.0))
                .scale(inv_sqrt2);
            null_ops.push(HermitianOp::new(x_op).expect("symmetrized by construction"));
            null_ops.push(HermitianOp::new(y_op).expect("symmetrized by construction"));
        }
    }

    // Projector onto the estimated null space.
    let mut proj = CMatrix::zeros(d, d);
    for v in &cols {
        proj += v * v.adjoint();
    }

    let candidates: Vec<&DensityMatrix> = set
        .states()
        .iter()
        .filter(|rho| {
            let compressed = &proj * rho.matrix() * &proj;
            (rho.matrix() - compressed).norm() < NULL_SUPPORT_TOL
        })
        .collect();

    let needed = null_dim * null_dim;
    let c3 = if candidates.len() < needed {
        false
    } else {
        let mut coeffs = DMatrix::<f64>::zeros(candidates.len(), needed);
        for (row, rho) in candidates.iter().enumerate() {
            for (col, op) in null_ops.iter().enumerate() {
                coeffs[(row, col)] = rho.operator().inner(op);
            }
        }
        let sv = coeffs.svd(false, false).singular_values;
        let top = sv.max();
        top > 0.0 && sv.iter().filter(|&&s| s > SPAN_RANK_TOL * top).count() == needed
    };

    Ok((complete, complete, c3))
}

/// How the second-step probe set is built from an element's estimated
/// eigenbasis.
#[derive(Debug, Clone)]
pub enum Step2Family {
    /// Projector family on the estimated eigenbasis plus its pairwise
    /// superpositions — informationally complete and aligned by construction.
    Gpb,
    /// A fixed reference set rotated so `base`'s `anchor` state tracks the
    /// estimated least-weight direction. Preserves the reference design
    /// scores exactly.
    Rotated { base: ProbeSet, anchor: usize },
}

/// Shot budget and probe choices for one two-step run.
#[derive(Debug, Clone)]
pub struct AdaptivePlan {
    step1_set: ProbeSet,
    family: Step2Family,
    total_shots: u64,
    step1_shots: u64,
}

impl AdaptivePlan {
    /// Build a plan with an explicit first-step budget (0 < step1 < total).
    pub fn new(
        step1_set: ProbeSet,
        family: Step2Family,
        total_shots: u64,
        step1_shots: u64,
    ) -> Result<Self> {
        if step1_shots == 0 || step1_shots >= total_shots {
            return Err(QdtError::InvalidArgument(format!(
                "step-1 budget must satisfy 0 < {step1_shots} < {total_shots}"
            )));
        }
        if let Step2Family::Rotated { base, anchor } = &family {
            if *anchor >= base.len() {
                return Err(QdtError::InvalidArgument(format!(
                    "anchor index {anchor} out of range for a set of {} probes",
                    base.len()
                )));
            }
            if base.dim() != step1_set.dim() {
                return Err(QdtError::DimensionMismatch {
                    expected: step1_set.dim(),
                    got: base.dim(),
                });
            }
        }
        Ok(Self {
            step1_set,
            family,
            total_shots,
            step1_shots,
        })
    }

    /// The default split: half the budget on each step.
    pub fn half_split(step1_set: ProbeSet, family: Step2Family, total_shots: u64) -> Result<Self> {
        if total_shots < 2 {
            return Err(QdtError::InvalidArgument(
                "need at least 2 shots to split across two steps".into(),
            ));
        }
        let half = total_shots / 2;
        Self::new(step1_set, family, total_shots, half)
    }

    pub fn step1_set(&self) -> &ProbeSet {
        &self.step1_set
    }

    pub fn family(&self) -> &Step2Family {
        &self.family
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn step1_shots(&self) -> u64 {
        self.step1_shots
    }

    pub fn step2_shots(&self) -> u64 {
        self.total_shots - self.step1_shots
    }
}

/// Output of one two-step run: the first-pass POVM and the per-element
/// refined estimates from the aligned second pass.
///
/// The refined elements are reported individually rather than as a POVM:
/// element i comes from the reconstruction on its own aligned probe block, so
/// the collection does not satisfy a joint completeness constraint.
#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    step1: Povm,
    refined: Vec<HermitianOp>,
    step1_shots: u64,
    step2_shots: u64,
    seed: (u64, u64),
}

impl AdaptiveResult {
    pub fn step1(&self) -> &Povm {
        &self.step1
    }

    pub fn refined(&self) -> &[HermitianOp] {
        &self.refined
    }

    pub fn refined_element(&self, i: usize) -> &HermitianOp {
        &self.refined[i]
    }

    pub fn step1_shots(&self) -> u64 {
        self.step1_shots
    }

    pub fn step2_shots(&self) -> u64 {
        self.step2_shots
    }

    /// (seed, stream) pair that reproduces this run.
    pub fn seed(&self) -> (u64, u64) {
        self.seed
    }

    /// Per-element infidelity 1 − F against a reference detector.
    pub fn infidelities_against(&self, truth: &Povm) -> Result<Vec<f64>> {
        if truth.n_outcomes() != self.refined.len() {
            return Err(QdtError::DimensionMismatch {
                expected: self.refined.len(),
                got: truth.n_outcomes(),
            });
        }
        self.refined
            .iter()
            .zip(truth.elements())
            .map(|(est, tru)| Ok(1.0 - detector_fidelity_f(est, tru)?))
            .collect()
    }

    /// Total squared error Σᵢ ‖P̂ᵢ − Pᵢ‖² of the refined elements.
    pub fn mse_against(&self, truth: &Povm) -> Result<f64> {
        if truth.n_outcomes() != self.refined.len() {
            return Err(QdtError::DimensionMismatch {
                expected: self.refined.len(),
                got: truth.n_outcomes(),
            });
        }
        Ok(self
            .refined
            .iter()
            .zip(truth.elements())
            .map(|(est, tru)| est.sub(tru).frobenius_norm().powi(2))
            .sum())
    }
}

/// Run the two-step protocol once against a known detector.
///
/// Step 1 measures the plan's fixed set, reconstructs a physical POVM, and
/// diagonalizes each element. Step 2 builds one aligned probe set per element,
/// pools them, spreads the remaining budget evenly over the pool, and
/// re-estimates element i from the block aligned to it.
pub fn run_two_step(
    truth: &Povm,
    plan: &AdaptivePlan,
    seed: u64,
    stream: u64,
) -> Result<AdaptiveResult> {
    let d = truth.dim();
    if plan.step1_set.dim() != d {
        return Err(QdtError::DimensionMismatch {
            expected: d,
            got: plan.step1_set.dim(),
        });
    }
    let mut rng = stream_rng(seed, stream);

    let plan1 = MeasurementPlan::even(plan.step1_set.clone(), plan.step1_shots)?;
    let data1 = sample_frequencies_with(truth, &plan1, &mut rng)?;
    let step1 = reconstruct(&data1, &plan.step1_set)?.into_povm();

    let n = truth.n_outcomes();
    let mut element_sets = Vec::with_capacity(n);
    for i in 0..n {
        let (_, u_est) = spectral_decomp(step1.element(i));
        let set = match &plan.family {
            Step2Family::Gpb => gpb_states(d, &u_est)?,
            Step2Family::Rotated { base, anchor } => rotate_probe_set(base, *anchor, &u_est)?,
        };
        element_sets.push(set);
    }

    let mut pool_states = Vec::new();
    let mut pool_labels = Vec::new();
    for (i, set) in element_sets.iter().enumerate() {
        pool_states.extend(set.states().iter().cloned());
        pool_labels.extend(set.labels().iter().map(|l| format!("e{i}:{l}")));
    }
    let pool = ProbeSet::new("aligned-pool", pool_states, pool_labels)?;
    let plan2 = MeasurementPlan::even(pool, plan.step2_shots())?;
    let data2 = sample_frequencies_with(truth, &plan2, &mut rng)?;

    let mut refined = Vec::with_capacity(n);
    let mut offset = 0;
    for (i, set) in element_sets.iter().enumerate() {
        let block = data2.slice_probes(offset, set.len())?;
        offset += set.len();
        let est = reconstruct(&block, set)?;
        refined.push(est.povm().element(i).clone());
    }

    Ok(AdaptiveResult {
        step1,
        refined,
        step1_shots: plan.step1_shots,
        step2_shots: plan.step2_shots(),
        seed: (seed, stream),
    })
}

/// A shot-scaling protocol: either a single fixed probe set, or the two-step
/// adaptive scheme with the default half/half budget split.
#[derive(Debug, Clone)]
pub enum Protocol {
    NonAdaptive {
        set: ProbeSet,
    },
    TwoStep {
        step1_set: ProbeSet,
        family: Step2Family,
    },
}

impl Protocol {
    pub fn dim(&self) -> usize {
        match self {
            Protocol::NonAdaptive { set } => set.dim(),
            Protocol::TwoStep { step1_set, .. } => step1_set.dim(),
        }
    }

    /// Human-readable synopsis for logs and result files.
    pub fn describe(&self) -> String {
        match self {
            Protocol::NonAdaptive { set } => {
                format!("non-adaptive({}, M={})", set.name(), set.len())
            }
            Protocol::TwoStep { step1_set, family } => match family {
                Step2Family::Gpb => {
                    format!("two-step({} -> eigenbasis projectors)", step1_set.name())
                }
                Step2Family::Rotated { base, anchor } => format!(
                    "two-step({} -> rotated {}, anchor {})",
                    step1_set.name(),
                    base.name(),
                    anchor
                ),
            },
        }
    }
}

/// One rep of a protocol at a fixed budget: per-element infidelities plus the
/// total squared error.
fn run_protocol_rep(
    truth: &Povm,
    protocol: &Protocol,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<(Vec<f64>, f64)> {
    match protocol {
        Protocol::NonAdaptive { set } => {
            let mut rng = stream_rng(seed, stream);
            let plan = MeasurementPlan::even(set.clone(), shots)?;
            let data = sample_frequencies_with(truth, &plan, &mut rng)?;
            let est = reconstruct(&data, set)?;
            let infid = est
                .povm()
                .elements()
                .iter()
                .zip(truth.elements())
                .map(|(e, t)| Ok(1.0 - detector_fidelity_f(e, t)?))
                .collect::<Result<Vec<_>>>()?;
            let total = mse(est.povm(), truth)?;
            Ok((infid, total))
        }
        Protocol::TwoStep { step1_set, family } => {
            let plan = AdaptivePlan::half_split(step1_set.clone(), family.clone(), shots)?;
            let result = run_two_step(truth, &plan, seed, stream)?;
            let infid = result.infidelities_against(truth)?;
            let total = result.mse_against(truth)?;
            Ok((infid, total))
        }
    }
}

/// One row of the per-rep scaling data: infidelity of one element at one
/// budget in one repetition.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScalingRow {
    pub shots: u64,
    pub rep: u32,
    pub element: usize,
    pub infidelity: f64,
}

/// Total squared error of one repetition at one budget.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MseRow {
    pub shots: u64,
    pub rep: u32,
    pub mse: f64,
}

/// Per-element aggregate over the budget grid.
#[derive(Debug, Clone, Serialize)]
pub struct ElementSummary {
    pub element: usize,
    /// Mean infidelity at each grid point.
    pub mean_infidelity: Vec<f64>,
    /// Sample standard deviation at each grid point (0 when reps == 1).
    pub std_infidelity: Vec<f64>,
    /// Log-log slope of mean infidelity vs. shots (needs ≥ 3 grid points).
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

/// Full output of a shot-scaling experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub protocol: String,
    pub dim: usize,
    pub n_outcomes: usize,
    pub seed: u64,
    pub reps: u32,
    pub n_grid: Vec<u64>,
    #[serde(skip_serializing)]
    pub rows: Vec<ScalingRow>,
    #[serde(skip_serializing)]
    pub mse_rows: Vec<MseRow>,
    pub elements: Vec<ElementSummary>,
    /// Mean total squared error at each grid point.
    pub mean_mse: Vec<f64>,
    /// Log-log slope of the mean total squared error (needs ≥ 3 grid points).
    pub mse_slope: Option<f64>,
    pub mse_slope_stderr: Option<f64>,
    pub wall_clock_secs: f64,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

fn slope_of(points: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    if points.len() < 3 || points.iter().any(|&(_, y)| y <= 0.0) {
        return (None, None);
    }
    match fit_log_slope(points) {
        Ok((s, se)) => (Some(s), Some(se)),
        Err(_) => (None, None),
    }
}

/// Sweep a protocol over a grid of total shot budgets, repeating each budget
/// `reps` times with independent RNG streams, and aggregate infidelity and
/// squared-error statistics.
///
/// Reps run in parallel; every rep derives its stream from the grid index and
/// rep index alone, so results are independent of scheduling and identical
/// across runs with the same seed.
pub fn scaling_experiment(
    truth: &Povm,
    protocol: &Protocol,
    n_grid: &[u64],
    reps: u32,
    seed: u64,
) -> Result<ExperimentRecord> {
    let start = Instant::now();
    if n_grid.is_empty() {
        return Err(QdtError::InvalidArgument("empty shot grid".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QdtError::InvalidArgument(
            "shot grid must be strictly increasing".into(),
        ));
    }
    if n_grid[0] < 2 {
        return Err(QdtError::InvalidArgument(
            "budgets must be at least 2 shots".into(),
        ));
    }
    if reps == 0 {
        return Err(QdtError::InvalidArgument(
            "need at least one repetition".into(),
        ));
    }
    if protocol.dim() != truth.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: truth.dim(),
            got: protocol.dim(),
        });
    }

    let jobs: Vec<(usize, u32)> = (0..n_grid.len())
        .flat_map(|g| (0..reps).map(move |r| (g, r)))
        .collect();
    let mut per_rep: Vec<(usize, u32, Vec<f64>, f64)> = jobs
        .par_iter()
        .map(|&(g, rep)| {
            let (infid, total) =
                run_protocol_rep(truth, protocol, n_grid[g], seed, grid_stream(g, rep))?;
            Ok((g, rep, infid, total))
        })
        .collect::<Result<Vec<_>>>()?;
    per_rep.sort_by_key(|&(g, rep, _, _)| (g, rep));

    let n = truth.n_outcomes();
    let mut rows = Vec::with_capacity(per_rep.len() * n);
    let mut mse_rows = Vec::with_capacity(per_rep.len());
    for (g, rep, infid, total) in &per_rep {
        for (element, &value) in infid.iter().enumerate() {
            rows.push(ScalingRow {
                shots: n_grid[*g],
                rep: *rep,
                element,
                infidelity: value,
            });
        }
        mse_rows.push(MseRow {
            shots: n_grid[*g],
            rep: *rep,
            mse: *total,
        });
    }

    let mut elements = Vec::with_capacity(n);
    for e in 0..n {
        let mut means = Vec::with_capacity(n_grid.len());
        let mut stds = Vec::with_capacity(n_grid.len());
        for g in 0..n_grid.len() {
            let vals: Vec<f64> = per_rep
                .iter()
                .filter(|&&(gg, _, _, _)| gg == g)
                .map(|(_, _, infid, _)| infid[e])
                .collect();
            let (m, s) = mean_and_std(&vals);
            means.push(m);
            stds.push(s);
        }
        let pts: Vec<(f64, f64)> = n_grid
            .iter()
            .zip(&means)
            .map(|(&x, &y)| (x as f64, y))
            .collect();
        let (slope, slope_stderr) = slope_of(&pts);
        elements.push(ElementSummary {
            element: e,
            mean_infidelity: means,
            std_infidelity: stds,
            slope,
            slope_stderr,
        });
    }

    let mut mean_mse = Vec::with_capacity(n_grid.len());
    for g in 0..n_grid.len() {
        let vals: Vec<f64> = per_rep
            .iter()
            .filter(|&&(gg, _, _, _)| gg == g)
            .map(|&(_, _, _, total)| total)
            .collect();
        mean_mse.push(mean_and_std(&vals).0);
    }
    let mse_pts: Vec<(f64, f64)> = n_grid
        .iter()
        .zip(&mean_mse)
        .map(|(&x, &y)| (x as f64, y))
        .collect();
    let (mse_slope, mse_slope_stderr) = slope_of(&mse_pts);

    Ok(ExperimentRecord {
        protocol: protocol.describe(),
        dim: truth.dim(),
        n_outcomes: n,
        seed,
        reps,
        n_grid: n_grid.to_vec(),
        rows,
        mse_rows,
        elements,
        mean_mse,
        mse_slope,
        mse_slope_stderr,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
