//! Born-rule probabilities and finite-shot frequency simulation.
//!
//! A tomography experiment sends each probe ρ_j through the detector
//! allocation[j] times and records outcome counts n_ij. The reconstruction
//! layers consume only the frequencies p̂_ij = n_ij/allocation[j]; the exact
//! probabilities p_ij = Tr(P_i ρ_j) are available through
//! [`exact_frequencies`] for noiseless oracles and infinite-shot limits.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{QdtError, Result};
use crate::operators::Povm;
use crate::probes::ProbeSet;
use crate::rng::stream_rng;

/// How an experiment's shot budget is split across probe states.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    set: ProbeSet,
    total_shots: u64,
    allocation: Vec<u64>,
}

impl MeasurementPlan {
    /// Even split of `total_shots` over the probes: every probe gets
    /// ⌊N/M⌋ shots and the first N mod M probes one extra, so the counts sum
    /// to N exactly and differ by at most one.
    pub fn even(set: ProbeSet, total_shots: u64) -> Result<Self> {
        if total_shots == 0 {
            return Err(QdtError::InvalidArgument(
                "total shot count must be positive".into(),
            ));
        }
        let m = set.len() as u64;
        let base = total_shots / m;
        let extra = (total_shots % m) as usize;
        let allocation = (0..set.len())
            .map(|j| base + u64::from(j < extra))
            .collect();
        Ok(Self {
            set,
            total_shots,
            allocation,
        })
    }

    pub fn set(&self) -> &ProbeSet {
        &self.set
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn allocation(&self) -> &[u64] {
        &self.allocation
    }
}

/// Shot bookkeeping attached to frequency data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShotRecord {
    /// Sampled data: shots per probe.
    Finite(Vec<u64>),
    /// Noiseless probabilities standing in for the infinite-shot limit.
    Exact,
}

/// Outcome frequencies p̂_ij for one experiment: an n×M column-stochastic
/// matrix plus the shot record and, for sampled data, the (seed, stream) pair
/// that produced it.
#[derive(Debug, Clone)]
pub struct FrequencyData {
    freqs: DMatrix<f64>,
    shots: ShotRecord,
    seed: Option<(u64, u64)>,
}

impl FrequencyData {
    /// Validate and wrap a frequency matrix: entries in [0,1], columns
    /// summing to 1 within 1e-12.
    pub fn new(freqs: DMatrix<f64>, shots: ShotRecord, seed: Option<(u64, u64)>) -> Result<Self> {
        for j in 0..freqs.ncols() {
            let col = freqs.column(j);
            if col.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(QdtError::InvalidArgument(format!(
                    "frequency column {j} has entries outside [0,1]"
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(QdtError::InvalidTrace {
                    expected: 1.0,
                    got: sum,
                });
            }
        }
        if let ShotRecord::Finite(alloc) = &shots {
            if alloc.len() != freqs.ncols() {
                return Err(QdtError::DimensionMismatch {
                    expected: freqs.ncols(),
                    got: alloc.len(),
                });
            }
        }
        Ok(Self { freqs, shots, seed })
    }

    /// The n×M frequency matrix.
    pub fn freqs(&self) -> &DMatrix<f64> {
        &self.freqs
    }

    /// Outcome count n.
    pub fn n_outcomes(&self) -> usize {
        self.freqs.nrows()
    }

    /// Probe count M.
    pub fn n_probes(&self) -> usize {
        self.freqs.ncols()
    }

    pub fn shots(&self) -> &ShotRecord {
        &self.shots
    }

    pub fn seed(&self) -> Option<(u64, u64)> {
        self.seed
    }

    /// Restrict to a contiguous block of probe columns [start, start+count).
    /// Used when one sampled pool serves several per-element reconstructions.
    pub fn slice_probes(&self, start: usize, count: usize) -> Result<FrequencyData> {
        if start + count > self.n_probes() {
            return Err(QdtError::DimensionMismatch {
                expected: self.n_probes(),
                got: start + count,
            });
        }
        let freqs = self.freqs.columns(start, count).into_owned();
        let shots = match &self.shots {
            ShotRecord::Finite(alloc) => ShotRecord::Finite(alloc[start..start + count].to_vec()),
            ShotRecord::Exact => ShotRecord::Exact,
        };
        FrequencyData::new(freqs, shots, self.seed)
    }
}

/// Born probabilities: entry (i, j) = Tr(P_i ρ_j), clipped to [0,1].
pub fn born_matrix(povm: &Povm, set: &ProbeSet) -> Result<DMatrix<f64>> {
    if povm.dim() != set.dim() {
        return Err(QdtError::DimensionMismatch {
            expected: set.dim(),
            got: povm.dim(),
        });
    }
    let n = povm.n_outcomes();
    let m = set.len();
    let mut probs = DMatrix::<f64>::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let tr = (povm.element(i).matrix() * set.state(j).matrix()).trace();
            if tr.im.abs() > 1e-10 {
                return Err(QdtError::Numerical(format!(
                    "Born probability ({i},{j}) has imaginary part {:.3e}",
                    tr.im
                )));
            }
            probs[(i, j)] = tr.re.clamp(0.0, 1.0);
        }
    }
    Ok(probs)
}

/// One multinomial draw of `shots` trials over the outcome distribution `p`,
/// by conditioning one binomial per outcome. Sequential conditioning keeps the
/// draw reproducible for a given RNG stream regardless of platform.
fn multinomial(shots: u64, p: &[f64], rng: &mut impl Rng) -> Vec<u64> {
    let n = p.len();
    let mut counts = vec![0u64; n];
    let mut remaining = shots;
    let mut rest = 1.0;
    for i in 0..n - 1 {
        if remaining == 0 {
            break;
        }
        let cond = if rest > 0.0 {
            (p[i] / rest).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let draw = Binomial::new(remaining, cond)
            .expect("conditional probability clamped to [0,1]")
            .sample(rng);
        counts[i] = draw;
        remaining -= draw;
        rest -= p[i];
    }
    counts[n - 1] = remaining;
    counts
}

/// Simulate an experiment: one multinomial sample per probe, from an explicit
/// stream. The caller-facing wrapper [`sample_frequencies`] derives the
/// stream from (seed, stream) and records it.
pub fn sample_frequencies_with(
    povm: &Povm,
    plan: &MeasurementPlan,
    rng: &mut impl Rng,
) -> Result<FrequencyData> {
    let probs = born_matrix(povm, plan.set())?;
    let n = probs.nrows();
    let m = probs.ncols();
    let mut freqs = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        let shots = plan.allocation()[j];
        if shots == 0 {
            return Err(QdtError::InvalidArgument(format!(
                "probe {j} was allocated zero shots; raise the budget above the probe count"
            )));
        }
        let col: Vec<f64> = probs.column(j).iter().cloned().collect();
        let counts = multinomial(shots, &col, rng);
        for i in 0..n {
            freqs[(i, j)] = counts[i] as f64 / shots as f64;
        }
    }
    FrequencyData::new(freqs, ShotRecord::Finite(plan.allocation().to_vec()), None)
}

/// Simulate an experiment deterministically from a (seed, stream) pair.
pub fn sample_frequencies(
    povm: &Povm,
    plan: &MeasurementPlan,
    seed: u64,
    stream: u64,
) -> Result<FrequencyData> {
    let mut rng = stream_rng(seed, stream);
    let mut data = sample_frequencies_with(povm, plan, &mut rng)?;
    data.seed = Some((seed, stream));
    Ok(data)
}

/// Noiseless frequencies: Born probabilities passed through unchanged, shot
/// record marked as exact.
pub fn exact_frequencies(povm: &Povm, set: &ProbeSet) -> Result<FrequencyData> {
    let probs = born_matrix(povm, set)?;
    FrequencyData::new(probs, ShotRecord::Exact, None)
}
