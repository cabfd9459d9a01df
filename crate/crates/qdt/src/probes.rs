//! Probe-state families, the design matrix they induce, and the two scores —
//! mean-squared-error criterion and condition number — that rank probe sets
//! for detector tomography.
//!
//! A probe set {ρ_j} of M states becomes an M×d² real design matrix X whose
//! row j is the coefficient vector of ρ_j. Reconstruction quality is governed
//! by X: the shot-noise-driven error bound scales with
//! `umse_criterion = M·Tr[(XᵀX)⁻¹]`, and sensitivity to probe miscalibration
//! with `cond = σmax(X)/σmin(X)`. The minima over all sets of pure probes are
//! closed-form ([`optimal_design_bounds`]) and are attained by the symmetric
//! families built here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{QdtError, Result};
use crate::operators::{
    gell_mann_basis, parameterize, random_pure_state_with, CMatrix, CVector, DensityMatrix,
    OrthonormalBasis,
};
use crate::rng::stream_rng;

/// Smallest singular value of X must exceed this fraction of the largest for
/// the set to count as informationally complete.
const COMPLETE_TOL: f64 = 1e-9;

/// An ordered collection of probe states sharing one dimension.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    name: String,
    dim: usize,
    states: Vec<DensityMatrix>,
    labels: Vec<String>,
}

impl ProbeSet {
    pub fn new(
        name: impl Into<String>,
        states: Vec<DensityMatrix>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(QdtError::InvalidArgument(
                "probe set needs at least one state".into(),
            ));
        }
        if labels.len() != states.len() {
            return Err(QdtError::DimensionMismatch {
                expected: states.len(),
                got: labels.len(),
            });
        }
        let dim = states[0].dim();
        for s in &states {
            if s.dim() != dim {
                return Err(QdtError::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            states,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of probe states, M.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, j: usize) -> &DensityMatrix {
        &self.states[j]
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn label(&self, j: usize) -> &str {
        &self.labels[j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// The M×d² real matrix whose rows are probe-state coefficient vectors.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    dim: usize,
}

impl DesignMatrix {
    /// The raw M×d² matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.x.nrows()
    }
}

/// Build the design matrix in an explicit orthonormal basis.
pub fn design_matrix_in(set: &ProbeSet, basis: &OrthonormalBasis) -> Result<DesignMatrix> {
    if basis.dim() != set.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: set.dim(),
            got: basis.dim(),
        });
    }
    let d2 = basis.len();
    let mut x = DMatrix::<f64>::zeros(set.len(), d2);
    for j in 0..set.len() {
        let theta = parameterize(set.state(j).operator(), basis)?;
        x.set_row(j, &theta.coeffs().transpose());
    }
    Ok(DesignMatrix { x, dim: set.dim() })
}

/// Build the design matrix in the default operator basis.
pub fn design_matrix(set: &ProbeSet) -> DesignMatrix {
    design_matrix_in(set, &gell_mann_basis(set.dim()))
        .expect("default basis always matches the set dimension")
}

/// Scores of a probe set.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    /// Number of probe states, M.
    pub n_states: usize,
    /// Hilbert-space dimension d.
    pub dim: usize,
    /// Eigenvalues of XᵀX, descending.
    pub eigenvalues: Vec<f64>,
    /// M·Tr[(XᵀX)⁻¹]; +infinity for an incomplete set.
    pub umse_criterion: f64,
    /// σmax(X)/σmin(X); +infinity for an incomplete set.
    pub cond: f64,
    /// True when rank X = d² (σmin > 1e-9·σmax).
    pub complete: bool,
}

/// Score a design matrix: XᵀX spectrum, error criterion, condition number.
pub fn design_report_for(design: &DesignMatrix) -> DesignReport {
    let x = &design.x;
    let d2 = x.ncols();
    let xtx = x.transpose() * x;
    let mut eigenvalues: Vec<f64> = xtx.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let svd = x.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let complete = x.nrows() >= d2 && sigma_min > COMPLETE_TOL * sigma_max;

    let m = x.nrows() as f64;
    let (umse_criterion, cond) = if complete {
        (
            m * eigenvalues.iter().map(|&l| 1.0 / l).sum::<f64>(),
            sigma_max / sigma_min,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    DesignReport {
        n_states: x.nrows(),
        dim: design.dim,
        eigenvalues,
        umse_criterion,
        cond,
        complete,
    }
}

/// Score a probe set in the default basis.
pub fn design_report(set: &ProbeSet) -> DesignReport {
    design_report_for(&design_matrix(set))
}

fn ket(entries: &[Complex64]) -> CVector {
    CVector::from_row_slice(entries)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pure(name: &str, kets: Vec<CVector>, labels: Vec<String>) -> ProbeSet {
    let states = kets
        .iter()
        .map(|v| DensityMatrix::pure(v).expect("family kets are nonzero"))
        .collect();
    ProbeSet::new(name, states, labels).expect("family construction is well-formed")
}

/// The six single-qubit axis kets |0>, |1>, |+>, |->, |R>, |L> with
/// R = (|0> - i|1>)/√2 and L = (|0> + i|1>)/√2.
fn qubit_axes() -> Vec<(char, CVector)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        ('0', ket(&[c(1.0, 0.0), c(0.0, 0.0)])),
        ('1', ket(&[c(0.0, 0.0), c(1.0, 0.0)])),
        ('+', ket(&[c(s, 0.0), c(s, 0.0)])),
        ('-', ket(&[c(s, 0.0), c(-s, 0.0)])),
        ('R', ket(&[c(s, 0.0), c(0.0, -s)])),
        ('L', ket(&[c(s, 0.0), c(0.0, s)])),
    ]
}

/// Symmetric informationally complete set of 16 pure states at d = 4.
///
/// Columns of a fixed 4×16 matrix built from x = √(2 + √5), normalized by
/// √(x² + 3); every pair of distinct states has overlap |⟨φⱼ|φₖ⟩|² = 1/5.
/// Attains the minimum error criterion d⁴+d³−d² = 304 and minimum condition
/// number √5.
pub fn sic_states_d4() -> ProbeSet {
    let x = (2.0 + 5.0_f64.sqrt()).sqrt();
    let xc = c(x, 0.0);
    let i = c(0.0, 1.0);
    let ni = c(0.0, -1.0);
    let p = c(1.0, 0.0);
    let n = c(-1.0, 0.0);
    // One row per entry below; the 16 columns are the states.
    let rows = [
        [xc, xc, xc, xc, i, i, ni, ni, i, i, ni, ni, i, i, ni, ni],
        [p, p, n, n, xc, xc, xc, xc, i, ni, i, ni, p, n, p, n],
        [p, n, p, n, p, n, p, n, xc, xc, xc, xc, ni, i, i, ni],
        [p, n, n, p, ni, i, i, ni, n, p, p, n, xc, xc, xc, xc],
    ];
    let kets: Vec<CVector> = (0..16)
        .map(|k| ket(&[rows[0][k], rows[1][k], rows[2][k], rows[3][k]]))
        .collect();
    let labels = (0..16).map(|k| format!("s{k:02}")).collect();
    pure("sic-d4", kets, labels)
}

/// Density matrix from a Bloch vector r, ρ = (I + r·σ)/2.
fn bloch_state(r: [f64; 3]) -> DensityMatrix {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.5 * (1.0 + r[2]), 0.0),
            c(0.5 * r[0], -0.5 * r[1]),
            c(0.5 * r[0], 0.5 * r[1]),
            c(0.5 * (1.0 - r[2]), 0.0),
        ],
    );
    DensityMatrix::new(m).expect("unit Bloch vector gives a valid state")
}

/// Regular-tetrahedron vertices on the Bloch sphere: 4 pure qubit states with
/// pairwise overlap 1/3, one vertex at the north pole.
pub fn sic_states_d2() -> ProbeSet {
    platonic_states(4).expect("4 is an allowed vertex count")
}

/// Mutually unbiased bases: M = d(d+1) pure states for d ∈ {2, 4}.
///
/// d = 2 gives the six axis states (the octahedron). d = 4 gives five bases of
/// four two-qubit states each; any two states from different bases have
/// overlap 1/4.
pub fn mub_states(d: usize) -> Result<ProbeSet> {
    match d {
        2 => {
            let (labels, kets): (Vec<char>, Vec<CVector>) = qubit_axes().into_iter().unzip();
            Ok(pure(
                "mub-d2",
                kets,
                labels.iter().map(|ch| ch.to_string()).collect(),
            ))
        }
        4 => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let z0 = ket(&[c(1.0, 0.0), c(0.0, 0.0)]);
            let z1 = ket(&[c(0.0, 0.0), c(1.0, 0.0)]);
            let plus = ket(&[c(s, 0.0), c(s, 0.0)]);
            let minus = ket(&[c(s, 0.0), c(-s, 0.0)]);
            let r = ket(&[c(s, 0.0), c(0.0, -s)]);
            let l = ket(&[c(s, 0.0), c(0.0, s)]);
            let i = c(0.0, 1.0);

            let kron = |a: &CVector, b: &CVector| a.kronecker(b);

            let mut kets = Vec::with_capacity(20);
            let mut labels = Vec::with_capacity(20);
            // Basis A: computational products.
            for (idx, (a, b)) in [(&z0, &z0), (&z0, &z1), (&z1, &z0), (&z1, &z1)]
                .iter()
                .enumerate()
            {
                kets.push(kron(a, b));
                labels.push(format!("A{idx}"));
            }
            // Basis B: circular x diagonal.
            for (idx, (a, b)) in [(&r, &plus), (&r, &minus), (&l, &plus), (&l, &minus)]
                .iter()
                .enumerate()
            {
                kets.push(kron(a, b));
                labels.push(format!("B{idx}"));
            }
            // Basis C: diagonal x circular.
            for (idx, (a, b)) in [(&plus, &r), (&plus, &l), (&minus, &r), (&minus, &l)]
                .iter()
                .enumerate()
            {
                kets.push(kron(a, b));
                labels.push(format!("C{idx}"));
            }
            // Bases D and E: entangled combinations (v ± i w)/√2.
            let pairs_d = [
                (kron(&r, &z0), kron(&l, &z1)),
                (kron(&r, &z1), kron(&l, &z0)),
            ];
            let pairs_e = [(kron(&r, &r), kron(&l, &l)), (kron(&r, &l), kron(&l, &r))];
            for (base, pairs) in [('D', pairs_d), ('E', pairs_e)] {
                let mut idx = 0;
                for (v, w) in &pairs {
                    for sign in [1.0, -1.0] {
                        kets.push((v + w * (i * c(sign, 0.0))).unscale(std::f64::consts::SQRT_2));
                        labels.push(format!("{base}{idx}"));
                        idx += 1;
                    }
                }
            }
            Ok(pure("mub-d4", kets, labels))
        }
        other => Err(QdtError::InvalidArgument(format!(
            "mutually unbiased probe sets are built for d = 2 or 4, got {other}"
        ))),
    }
}

/// All 36 tensor products of the six single-qubit axis states (d = 4).
///
/// The optimal two-qubit product design: criterion 400, condition number 3.
pub fn cube_states() -> ProbeSet {
    let axes = qubit_axes();
    let mut kets = Vec::with_capacity(36);
    let mut labels = Vec::with_capacity(36);
    for (la, a) in &axes {
        for (lb, b) in &axes {
            kets.push(a.kronecker(b));
            labels.push(format!("{la}{lb}"));
        }
    }
    pure("cube", kets, labels)
}

/// Generalized Pauli-basis probes: d² states adapted to a given orthonormal
/// basis {|v_i>} (the columns of `basis_vectors`).
///
/// The set contains the d basis projectors |v_i><v_i|, the (v_i + v_j)/√2
/// combinations, and the (v_i + i·v_j)/√2 combinations, pairs in
/// lexicographic order. Measuring a detector in (an estimate of) its own
/// eigenbasis with this family is what removes the O(1/√N) error floor of
/// rank-deficient elements.
pub fn gpb_states(d: usize, basis_vectors: &CMatrix) -> Result<ProbeSet> {
    if basis_vectors.nrows() != d || basis_vectors.ncols() != d {
        return Err(QdtError::DimensionMismatch {
            expected: d,
            got: basis_vectors.nrows(),
        });
    }
    let dev = (basis_vectors.adjoint() * basis_vectors - CMatrix::identity(d, d)).norm();
    if dev > 1e-10 {
        return Err(QdtError::InvalidArgument(format!(
            "probe basis vectors are not orthonormal (|V^dag V - I| = {dev:.3e})"
        )));
    }
    let cols: Vec<CVector> = (0..d)
        .map(|j| basis_vectors.column(j).into_owned())
        .collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut kets = Vec::with_capacity(d * d);
    let mut labels = Vec::with_capacity(d * d);
    for (idx, v) in cols.iter().enumerate() {
        kets.push(v.clone());
        labels.push(format!("z{idx}"));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            kets.push((&cols[i] + &cols[j]).scale(s));
            labels.push(format!("x{i}{j}"));
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            kets.push((&cols[i] + &cols[j] * c(0.0, 1.0)).scale(s));
            labels.push(format!("y{i}{j}"));
        }
    }
    Ok(pure(&format!("gpb-d{d}"), kets, labels))
}

/// GPB probes in the computational basis.
pub fn gpb_states_computational(d: usize) -> ProbeSet {
    gpb_states(d, &CMatrix::identity(d, d)).expect("identity columns are orthonormal")
}

fn rot_z(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_x(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn mat_apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (r, row) in m.iter().enumerate() {
        out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for q in 0..3 {
            for k in 0..3 {
                out[r][q] += a[r][k] * b[k][q];
            }
        }
    }
    out
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Pure qubit states at the vertices of a platonic solid on the Bloch sphere,
/// for M ∈ {4, 6, 8, 12, 20}.
///
/// All five solids score identically — criterion 20, condition number √3,
/// XᵀX spectrum {M/2, M/6, M/6, M/6} — the optimum for single-qubit designs.
/// Orientation is fixed with one vertex at the north pole: the tetrahedron's
/// lower triangle starts at azimuth 0, the cube/dodecahedron use the rotation
/// taking (1,1,1)/√3 to the pole (azimuth -45° then polar tilt), and the
/// icosahedron tilts (0,1,φ) to the pole about the x axis.
pub fn platonic_states(m: usize) -> Result<ProbeSet> {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    // Rotation used by the cube and dodecahedron: z by -45°, then y by
    // -arccos(1/√3), sending the (1,1,1) corner to the pole.
    let corner_up = mat_mul(
        &rot_y(-(1.0 / 3.0_f64.sqrt()).acos()),
        &rot_z(-std::f64::consts::FRAC_PI_4),
    );
    let vertices: Vec<[f64; 3]> = match m {
        4 => {
            let z = -1.0 / 3.0;
            let r = (8.0_f64 / 9.0).sqrt();
            let mut v = vec![[0.0, 0.0, 1.0]];
            for k in 0..3 {
                let az = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                v.push([r * az.cos(), r * az.sin(), z]);
            }
            v
        }
        6 => vec![
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ],
        8 => {
            let mut v = Vec::with_capacity(8);
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        v.push(mat_apply(&corner_up, normalized([sx, sy, sz])));
                    }
                }
            }
            v
        }
        12 => {
            let tilt = rot_x((1.0 / phi).atan());
            let mut v = Vec::with_capacity(12);
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    v.push([0.0, s1, s2 * phi]);
                    v.push([s1, s2 * phi, 0.0]);
                    v.push([s2 * phi, 0.0, s1]);
                }
            }
            v.into_iter()
                .map(|p| mat_apply(&tilt, normalized(p)))
                .collect()
        }
        20 => {
            let mut v = Vec::with_capacity(20);
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        v.push([sx, sy, sz]);
                    }
                }
            }
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    v.push([0.0, s1 / phi, s2 * phi]);
                    v.push([s1 / phi, s2 * phi, 0.0]);
                    v.push([s2 * phi, 0.0, s1 / phi]);
                }
            }
            v.into_iter()
                .map(|p| mat_apply(&corner_up, normalized(p)))
                .collect()
        }
        other => {
            return Err(QdtError::InvalidArgument(format!(
                "no platonic solid has {other} vertices; choose 4, 6, 8, 12 or 20"
            )))
        }
    };
    let states = vertices.iter().map(|&r| bloch_state(r)).collect();
    let labels = (0..m).map(|k| format!("vtx{k}")).collect();
    ProbeSet::new(format!("platonic-{m}"), states, labels)
}

/// M Haar-random pure states, drawn from an explicit stream.
pub fn random_pure_set_with(m: usize, d: usize, rng: &mut impl Rng) -> ProbeSet {
    let states = (0..m).map(|_| random_pure_state_with(d, rng)).collect();
    let labels = (0..m).map(|k| format!("rand{k}")).collect();
    ProbeSet::new(format!("random-{m}"), states, labels).expect("m >= 1 checked by caller")
}

/// M Haar-random pure states for a seed/stream pair.
pub fn random_pure_set(m: usize, d: usize, seed: u64) -> ProbeSet {
    random_pure_set_with(m, d, &mut stream_rng(seed, 0))
}

/// Closed-form minima over all pure-probe designs in dimension d.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalDesign {
    /// Minimum mean-squared-error bound, (n−1)(d⁴+d³−d²)/(4·shots).
    pub min_umse: f64,
    /// Minimum condition number, √(d+1).
    pub min_cond: f64,
    /// Optimal XᵀX eigenvalues divided by M: 1/d once, then 1/(d(d+1))
    /// repeated d²−1 times. They sum to 1 (Tr XᵀX = M for pure states).
    pub eigenvalue_fractions: Vec<f64>,
}

/// Minimum achievable error bound and condition number for any set of pure
/// probes in dimension `d`, with an `n`-outcome detector and `shots` total
/// measurements.
pub fn optimal_design_bounds(d: usize, n: usize, shots: u64) -> OptimalDesign {
    assert!(
        d >= 2 && n >= 2 && shots > 0,
        "need d >= 2, n >= 2, shots > 0"
    );
    let df = d as f64;
    let min_umse = (n as f64 - 1.0) * (df.powi(4) + df.powi(3) - df.powi(2)) / (4.0 * shots as f64);
    let mut eigenvalue_fractions = vec![1.0 / df];
    eigenvalue_fractions.extend(std::iter::repeat_n(1.0 / (df * (df + 1.0)), d * d - 1));
    OptimalDesign {
        min_umse,
        min_cond: (df + 1.0).sqrt(),
        eigenvalue_fractions,
    }
}

/// Minimum error bound and condition number when probes are restricted to
/// m-qubit product states: (20^m·(n−1)/(4·shots), 3^{m/2}).
pub fn optimal_product_design_bounds(m_qubits: usize, n: usize, shots: u64) -> (f64, f64) {
    assert!(
        m_qubits >= 1 && n >= 2 && shots > 0,
        "need m >= 1, n >= 2, shots > 0"
    );
    let min_umse = 20.0_f64.powi(m_qubits as i32) * (n as f64 - 1.0) / (4.0 * shots as f64);
    (min_umse, 3.0_f64.powf(m_qubits as f64 / 2.0))
}

/// Worst-case score drift when every probe state moves by at most `eps` in
/// Frobenius norm.
///
/// Returns `(criterion_bound, cond_bound)`:
/// criterion drift ≤ 2d²M²ε/(λmin − 2Mε)² — multiply by the experiment's
/// (n−1)/(4·shots) factor to bound the error-bound drift itself — and
/// condition-number drift ≤ Mε(λmax + λmin)/(λmin − 2Mε)², with λ the
/// eigenvalues of XᵀX. Valid for ε ≤ λmin/(2M); at equality the bounds are
/// +infinity.
pub fn perturbation_bounds(set: &ProbeSet, eps: f64) -> Result<(f64, f64)> {
    if eps < 0.0 {
        return Err(QdtError::InvalidArgument(format!(
            "perturbation size must be >= 0, got {eps}"
        )));
    }
    if eps == 0.0 {
        return Ok((0.0, 0.0));
    }
    let report = design_report(set);
    let m = set.len() as f64;
    let d2 = (set.dim() * set.dim()) as f64;
    let lambda_max = report.eigenvalues[0];
    let lambda_min = *report.eigenvalues.last().expect("nonempty spectrum");
    if eps > lambda_min / (2.0 * m) {
        return Err(QdtError::InvalidArgument(format!(
            "perturbation {eps} exceeds the analysis region lambda_min/(2M) = {}",
            lambda_min / (2.0 * m)
        )));
    }
    let denom = (lambda_min - 2.0 * m * eps).powi(2);
    let criterion_bound = 2.0 * d2 * m * m * eps / denom;
    let cond_bound = m * eps * (lambda_max + lambda_min) / denom;
    Ok((criterion_bound, cond_bound))
}
