//! TOML scenario files and their translation into library objects.
//!
//! A scaling/adaptive scenario has three sections plus optional checks:
//!
//! ```toml
//! [detector]                 # what is being tomographed
//! kind = "binary_mu"         # binary_mu | binary_perturbed | three_valued
//!                            #   | three_perturbed | custom
//! mu = 1.0                   # binary_mu only
//! rotation_seed = 2025       # omit for an unrotated detector
//! # rotation_seeds = [3, 4]  # three_valued / three_perturbed
//! # file = "detector.txt"    # custom: operator blocks, relative to the file
//!
//! [protocol]                 # how it is probed
//! family = "sic"             # random | sic | mub | cube | platonic | gpb
//! # m = 48                   # probe count (random) or vertex count (platonic)
//! # probe_seed = 1001        # random family only
//! adaptive = false
//! # step2 = "gpb"            # gpb | rotated (adaptive only)
//! # step2_base = "sic"       # rotated only: family to rotate
//! # anchor = 0               # rotated only: element whose eigenbasis aligns
//!
//! [run]
//! n_grid = [1000, 10000, 100000]   # strictly increasing shot budgets
//! reps = 50
//! seed = 77
//!
//! [[check]]                  # optional slope windows, verified with --check
//! elements = [0, 1]
//! lo = -0.65
//! hi = -0.35
//! ```
//!
//! A robustness scenario adds a `[robustness]` section with `sweeps`; a
//! coherent-synthesis scenario instead has a `[synthesis]` section and an
//! optional scalar `[check]` (see `SynthesisConfig`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use qdt::io::load_povm;
use qdt::{
    build_detector, cube_states, gpb_states_computational, mub_states, platonic_states,
    random_pure_set, sic_states_d2, sic_states_d4, DetectorSpec, Povm, ProbeSet, Protocol,
    Rotation, Step2Family,
};

use crate::CliError;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub detector: DetectorConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub run: RunConfig,
    pub robustness: Option<RobustnessConfig>,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckWindow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: String,
    pub mu: Option<f64>,
    pub rotation_seed: Option<u64>,
    pub rotation_seeds: Option<[u64; 2]>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub family: String,
    pub m: Option<usize>,
    pub probe_seed: Option<u64>,
    #[serde(default)]
    pub adaptive: bool,
    pub step2: Option<String>,
    pub step2_base: Option<String>,
    pub step2_m: Option<usize>,
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_grid: Vec<u64>,
    pub reps: u32,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_grid: default_grid(),
            reps: 100,
            seed: 0,
        }
    }
}

/// Eight logarithmically spaced budgets from 10^3 to 10^6.
pub fn default_grid() -> Vec<u64> {
    (0..8)
        .map(|k| 10f64.powf(3.0 + 3.0 * k as f64 / 7.0).round() as u64)
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// Number of independently rotated copies of the detector to run.
    pub sweeps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckWindow {
    pub elements: Vec<usize>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentConfig {
    pub synthesis: SynthesisConfig,
    pub check: Option<CoherentCheck>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Probe family to rebuild (same names as `[protocol].family`).
    pub family: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub m: Option<usize>,
    pub probe_seed: Option<u64>,
    /// Coherent terms per synthesized probe.
    pub terms: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Independent search seeds; the best-scoring one is reported.
    #[serde(default = "default_batch")]
    pub seed_batch: Vec<u64>,
}

fn default_dim() -> usize {
    4
}

fn default_starts() -> usize {
    100
}

fn default_batch() -> Vec<u64> {
    vec![0, 1, 2]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentCheck {
    /// The synthesized set must score at or below this error criterion.
    pub max_criterion: f64,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    read_toml(path)
}

pub fn load_coherent(path: &Path) -> Result<CoherentConfig, CliError> {
    read_toml(path)
}

/// Rotation seeds for robustness sweep `s`. Sweep seeds stride by 1000 so
/// distinct base seeds never collide across sweeps.
fn sweep_offset(base: u64, sweep: u64) -> Rotation {
    Rotation::Haar {
        seed: base + 1000 * sweep,
    }
}

/// Build the detector, optionally replacing its orientation with the
/// `sweep`-th rotation of a robustness run (`sweep = None` keeps the
/// configured orientation).
pub fn build_detector_from(
    cfg: &DetectorConfig,
    config_dir: &Path,
    sweep: Option<u64>,
) -> Result<Povm, CliError> {
    let single = |cfg: &DetectorConfig| match sweep {
        Some(s) => sweep_offset(cfg.rotation_seed.unwrap_or(0), s),
        None => match cfg.rotation_seed {
            Some(seed) => Rotation::Haar { seed },
            None => Rotation::Identity,
        },
    };
    let pair = |cfg: &DetectorConfig| {
        let [a, b] = cfg.rotation_seeds.unwrap_or([0, 1]);
        match sweep {
            Some(s) => (sweep_offset(a, s), sweep_offset(b, s)),
            None => match cfg.rotation_seeds {
                Some(_) => (Rotation::Haar { seed: a }, Rotation::Haar { seed: b }),
                None => (Rotation::Identity, Rotation::Identity),
            },
        }
    };
    let spec = match cfg.kind.as_str() {
        "binary_mu" => {
            let mu = cfg
                .mu
                .ok_or_else(|| config_err("detector kind binary_mu requires mu"))?;
            DetectorSpec::BinaryMu {
                mu,
                rotation: single(cfg),
            }
        }
        "binary_perturbed" => DetectorSpec::BinaryPerturbed {
            rotation: single(cfg),
        },
        "three_valued" => DetectorSpec::ThreeValued {
            rotations: pair(cfg),
        },
        "three_perturbed" => DetectorSpec::ThreePerturbed {
            rotations: pair(cfg),
        },
        "custom" => {
            let file = cfg
                .file
                .as_ref()
                .ok_or_else(|| config_err("detector kind custom requires file"))?;
            let path = if file.is_absolute() {
                file.clone()
            } else {
                config_dir.join(file)
            };
            if sweep.is_some() {
                return Err(config_err(
                    "custom detectors have no rotation seeds to sweep",
                ));
            }
            return load_povm(&path)
                .map_err(|e| config_err(format!("cannot load detector {}: {e}", path.display())));
        }
        other => return Err(config_err(format!("unknown detector kind '{other}'"))),
    };
    build_detector(&spec).map_err(|e| config_err(format!("invalid detector: {e}")))
}

/// Build a probe family by name in dimension `d`.
pub fn build_probe_set(
    family: &str,
    m: Option<usize>,
    probe_seed: Option<u64>,
    d: usize,
) -> Result<ProbeSet, CliError> {
    let need_m = || config_err(format!("family '{family}' requires m"));
    match family {
        "random" => {
            let m = m.ok_or_else(need_m)?;
            let seed =
                probe_seed.ok_or_else(|| config_err("family 'random' requires probe_seed"))?;
            Ok(random_pure_set(m, d, seed))
        }
        "sic" => match d {
            2 => Ok(sic_states_d2()),
            4 => Ok(sic_states_d4()),
            _ => Err(config_err(format!(
                "family 'sic' is defined for d = 2 or 4, not {d}"
            ))),
        },
        "mub" => mub_states(d).map_err(|e| config_err(e.to_string())),
        "cube" => {
            if d != 4 {
                return Err(config_err(format!(
                    "family 'cube' is defined for d = 4, not {d}"
                )));
            }
            Ok(cube_states())
        }
        "platonic" => {
            if d != 2 {
                return Err(config_err(format!(
                    "family 'platonic' is defined for d = 2, not {d}"
                )));
            }
            platonic_states(m.ok_or_else(need_m)?).map_err(|e| config_err(e.to_string()))
        }
        "gpb" => Ok(gpb_states_computational(d)),
        other => Err(config_err(format!("unknown probe family '{other}'"))),
    }
}

/// Translate the `[protocol]` section for a detector of dimension `d` with
/// `n_outcomes` elements.
pub fn build_protocol(
    cfg: &ProtocolConfig,
    d: usize,
    n_outcomes: usize,
) -> Result<Protocol, CliError> {
    let step1 = build_probe_set(&cfg.family, cfg.m, cfg.probe_seed, d)?;
    if !cfg.adaptive {
        if cfg.step2.is_some() || cfg.step2_base.is_some() || cfg.anchor.is_some() {
            return Err(config_err("step2 options require adaptive = true"));
        }
        return Ok(Protocol::NonAdaptive { set: step1 });
    }
    let family = match cfg.step2.as_deref() {
        None | Some("gpb") => Step2Family::Gpb,
        Some("rotated") => {
            let base_family = cfg
                .step2_base
                .as_deref()
                .ok_or_else(|| config_err("step2 = \"rotated\" requires step2_base"))?;
            let base = build_probe_set(base_family, cfg.step2_m, cfg.probe_seed, d)?;
            let anchor = cfg.anchor.unwrap_or(0);
            if anchor >= n_outcomes {
                return Err(config_err(format!(
                    "anchor {anchor} out of range for a detector with {n_outcomes} outcomes"
                )));
            }
            Step2Family::Rotated { base, anchor }
        }
        Some(other) => return Err(config_err(format!("unknown step2 family '{other}'"))),
    };
    Ok(Protocol::TwoStep {
        step1_set: step1,
        family,
    })
}

/// Validate a shot grid before handing it to the library.
pub fn validate_grid(grid: &[u64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(config_err("n_grid must not be empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err("n_grid must be strictly increasing"));
    }
    if grid[0] < 2 {
        return Err(config_err("shot budgets must be at least 2"));
    }
    Ok(())
}

/// Apply `--seed`/`--reps`/`--fast` to the `[run]` section.
pub fn apply_overrides(
    run: &mut RunConfig,
    seed: Option<u64>,
    reps: Option<u32>,
    fast: bool,
) -> Result<(), CliError> {
    if let Some(s) = seed {
        run.seed = s;
    }
    if let Some(r) = reps {
        run.reps = r;
    }
    if fast {
        run.reps = run.reps.min(20);
        run.n_grid.retain(|&n| n <= 100_000);
        if run.n_grid.len() < 3 {
            return Err(config_err(
                "--fast keeps only budgets <= 10^5, leaving fewer than 3 grid points",
            ));
        }
    }
    validate_grid(&run.n_grid)
}
