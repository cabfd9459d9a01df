//! Quantum detector tomography: probe-state designs, measurement simulation,
//! two-stage constrained reconstruction, and adaptive refinement.

pub mod adaptive;
pub mod coherent;
pub mod detectors;
pub mod error;
pub mod fidelity;
pub mod io;
pub mod operators;
pub mod optim;
pub mod probes;
pub mod recon;
pub mod rng;
pub mod sim;
pub mod slope;

pub use adaptive::{
    check_conditions, estimate_rank, rotate_probe_set, run_two_step, scaling_experiment,
    AdaptivePlan, AdaptiveResult, ElementSummary, ExperimentRecord, MseRow, Protocol, ScalingRow,
    Step2Family,
};
pub use coherent::{
    coherent_truncated, fock_coherent_infidelity, optimize_superposition, random_superposition_set,
    superposed_probe_set, superposition_cost, CoherentSuperposition, SynthesizedProbe,
    SynthesizedSet,
};
pub use detectors::{build_detector, DetectorSpec, Rotation};
pub use error::{QdtError, Result};
pub use fidelity::{detect_distortion, detector_fidelity_f, detector_fidelity_f0, state_fidelity};
pub use operators::{
    deparameterize, gell_mann_basis, haar_random_unitary, parameterize, principal_sqrt,
    random_povm, random_pure_state, spectral_decomp, CMatrix, CVector, DensityMatrix, HermitianOp,
    OrthonormalBasis, ParamVector, Povm, RVector,
};
pub use probes::{
    cube_states, design_matrix, design_report, gpb_states, gpb_states_computational, mub_states,
    optimal_design_bounds, optimal_product_design_bounds, perturbation_bounds, platonic_states,
    random_pure_set, sic_states_d2, sic_states_d4, DesignMatrix, DesignReport, OptimalDesign,
    ProbeSet,
};
pub use recon::{
    mse, reconstruct, stage1_cls, stage2_correct, umse_bound, BoundKind, PhysicalEstimate,
    Stage1Estimate,
};
pub use rng::{grid_stream, stream_rng, StreamRng};
pub use sim::{
    born_matrix, exact_frequencies, sample_frequencies, FrequencyData, MeasurementPlan, ShotRecord,
};
pub use slope::{fit_log_slope, fit_log_slope_counts};
