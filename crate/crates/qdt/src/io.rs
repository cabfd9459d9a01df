//! Text serialization for probe sets, detectors, frequency data, experiment
//! records, and coherent superpositions.
//!
//! All formats are plain text, deterministic, and round-trip exact: floats are
//! written with 17 significant digits, which is enough to recover the original
//! f64 bit pattern. CSV files start with a `#` comment carrying the schema
//! version and the seed, so every artifact records how it was produced.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::adaptive::{ExperimentRecord, ScalingRow};
use crate::coherent::CoherentSuperposition;
use crate::error::{QdtError, Result};
use crate::operators::{CMatrix, DensityMatrix, HermitianOp, Povm};
use crate::probes::ProbeSet;
use crate::sim::{FrequencyData, ShotRecord};

/// Format version stamped into every file this module writes.
pub const SCHEMA_VERSION: u32 = 1;

fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

fn parse_field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| QdtError::Parse {
        line,
        message: format!("cannot parse {what} from {tok:?}"),
    })
}

// ---------------------------------------------------------------------------
// Operator block format: one operator per block, header line `d M label`,
// then d rows of d real parts and d rows of d imaginary parts.
// ---------------------------------------------------------------------------

fn write_operator_blocks(
    kind: &str,
    name: &str,
    mats: &[&CMatrix],
    labels: &[String],
    w: &mut impl Write,
) -> Result<()> {
    writeln!(
        w,
        "# {kind} schema={SCHEMA_VERSION} name={}",
        name.replace(' ', "_")
    )?;
    let m = mats.len();
    for (mat, label) in mats.iter().zip(labels) {
        let d = mat.nrows();
        writeln!(w, "{d} {m} {}", label.replace(' ', "_"))?;
        for part in 0..2 {
            for r in 0..d {
                let row: Vec<String> = (0..d)
                    .map(|c| {
                        let z = mat[(r, c)];
                        fmt_f64(if part == 0 { z.re } else { z.im })
                    })
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
    }
    Ok(())
}

struct ParsedBlocks {
    name: String,
    mats: Vec<CMatrix>,
    labels: Vec<String>,
}

fn read_operator_blocks(r: &mut impl BufRead) -> Result<ParsedBlocks> {
    let mut name = String::from("loaded");
    let mut mats = Vec::new();
    let mut labels = Vec::new();
    let mut declared_m: Option<usize> = None;

    let mut lines = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        lines.push((idx + 1, line?));
    }
    let mut pos = 0;
    while pos < lines.len() {
        let (lineno, text) = &lines[pos];
        let trimmed = text.trim();
        if trimmed.is_empty() {
            pos += 1;
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            for tok in comment.split_whitespace() {
                if let Some(n) = tok.strip_prefix("name=") {
                    name = n.to_string();
                }
            }
            pos += 1;
            continue;
        }
        // Block header: `d M label`.
        let mut toks = trimmed.split_whitespace();
        let d: usize = parse_field(
            toks.next().ok_or(QdtError::Parse {
                line: *lineno,
                message: "missing dimension in block header".into(),
            })?,
            *lineno,
            "dimension",
        )?;
        let m: usize = parse_field(
            toks.next().ok_or(QdtError::Parse {
                line: *lineno,
                message: "missing state count in block header".into(),
            })?,
            *lineno,
            "state count",
        )?;
        let label = toks.collect::<Vec<_>>().join(" ");
        if label.is_empty() {
            return Err(QdtError::Parse {
                line: *lineno,
                message: "missing label in block header".into(),
            });
        }
        if d == 0 {
            return Err(QdtError::Parse {
                line: *lineno,
                message: "dimension is zero".into(),
            });
        }
        match declared_m {
            None => declared_m = Some(m),
            Some(prev) if prev != m => {
                return Err(QdtError::Parse {
                    line: *lineno,
                    message: format!("inconsistent state count: {m} after {prev}"),
                });
            }
            _ => {}
        }

        let mut mat = CMatrix::zeros(d, d);
        pos += 1;
        for part in 0..2 {
            for row in 0..d {
                let (rowno, rowtext) = lines.get(pos).ok_or(QdtError::Parse {
                    line: lines.last().map(|(n, _)| *n).unwrap_or(0),
                    message: "unexpected end of file inside a block".into(),
                })?;
                let vals: Vec<f64> = rowtext
                    .split_whitespace()
                    .map(|t| parse_field(t, *rowno, "matrix entry"))
                    .collect::<Result<_>>()?;
                if vals.len() != d {
                    return Err(QdtError::Parse {
                        line: *rowno,
                        message: format!("expected {d} entries, found {}", vals.len()),
                    });
                }
                for (col, v) in vals.into_iter().enumerate() {
                    if part == 0 {
                        mat[(row, col)].re = v;
                    } else {
                        mat[(row, col)].im = v;
                    }
                }
                pos += 1;
            }
        }
        mats.push(mat);
        labels.push(label);
    }

    if let Some(m) = declared_m {
        if m != mats.len() {
            return Err(QdtError::Parse {
                line: lines.last().map(|(n, _)| *n).unwrap_or(0),
                message: format!("header declared {m} blocks, found {}", mats.len()),
            });
        }
    }
    if mats.is_empty() {
        return Err(QdtError::Parse {
            line: 0,
            message: "no operator blocks found".into(),
        });
    }
    Ok(ParsedBlocks { name, mats, labels })
}

/// Write a probe set in the block matrix format.
pub fn write_probe_set(set: &ProbeSet, w: &mut impl Write) -> Result<()> {
    let mats: Vec<&CMatrix> = set.states().iter().map(|s| s.matrix()).collect();
    write_operator_blocks("probe-set", set.name(), &mats, set.labels(), w)
}

/// Read a probe set from the block matrix format; every block must be a
/// valid density matrix.
pub fn read_probe_set(r: &mut impl BufRead) -> Result<ProbeSet> {
    let parsed = read_operator_blocks(r)?;
    let states = parsed
        .mats
        .into_iter()
        .map(DensityMatrix::new)
        .collect::<Result<Vec<_>>>()?;
    ProbeSet::new(parsed.name, states, parsed.labels)
}

pub fn save_probe_set(set: &ProbeSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_probe_set(set, &mut w)
}

pub fn load_probe_set(path: impl AsRef<Path>) -> Result<ProbeSet> {
    let mut r = BufReader::new(File::open(path)?);
    read_probe_set(&mut r)
}

/// Write a detector in the same block format (labels `element0`, ...).
pub fn write_povm(povm: &Povm, name: &str, w: &mut impl Write) -> Result<()> {
    let mats: Vec<&CMatrix> = povm.elements().iter().map(|e| e.matrix()).collect();
    let labels: Vec<String> = (0..povm.n_outcomes())
        .map(|i| format!("element{i}"))
        .collect();
    write_operator_blocks("detector", name, &mats, &labels, w)
}

/// Read a detector from the block format; blocks must form a valid POVM.
pub fn read_povm(r: &mut impl BufRead) -> Result<Povm> {
    let parsed = read_operator_blocks(r)?;
    let elements = parsed
        .mats
        .into_iter()
        .map(HermitianOp::new)
        .collect::<Result<Vec<_>>>()?;
    Povm::new(elements)
}

pub fn save_povm(povm: &Povm, name: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_povm(povm, name, &mut w)
}

pub fn load_povm(path: impl AsRef<Path>) -> Result<Povm> {
    let mut r = BufReader::new(File::open(path)?);
    read_povm(&mut r)
}

// ---------------------------------------------------------------------------
// Frequency data CSV: i,j,freq,shots,seed
// ---------------------------------------------------------------------------

/// Write frequency data as CSV with columns `i,j,freq,shots,seed`.
pub fn write_frequency_csv(data: &FrequencyData, w: &mut impl Write) -> Result<()> {
    let seed_txt = match data.seed() {
        Some((s, t)) => format!("{s}:{t}"),
        None => "none".into(),
    };
    writeln!(
        w,
        "# frequency-data schema={SCHEMA_VERSION} seed={seed_txt}"
    )?;
    writeln!(w, "i,j,freq,shots,seed")?;
    for j in 0..data.n_probes() {
        let shots_txt = match data.shots() {
            ShotRecord::Finite(alloc) => alloc[j].to_string(),
            ShotRecord::Exact => "exact".into(),
        };
        for i in 0..data.n_outcomes() {
            writeln!(
                w,
                "{i},{j},{},{shots_txt},{seed_txt}",
                fmt_f64(data.freqs()[(i, j)])
            )?;
        }
    }
    Ok(())
}

/// Read frequency data written by [`write_frequency_csv`].
pub fn read_frequency_csv(r: &mut impl BufRead) -> Result<FrequencyData> {
    let mut entries: Vec<(usize, usize, f64, String, String)> = Vec::new();
    let mut n = 0;
    let mut m = 0;
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let text = line?;
        let t = text.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("i,") {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != 5 {
            return Err(QdtError::Parse {
                line: lineno,
                message: format!("expected 5 columns, found {}", cols.len()),
            });
        }
        let i: usize = parse_field(cols[0], lineno, "outcome index")?;
        let j: usize = parse_field(cols[1], lineno, "probe index")?;
        let f: f64 = parse_field(cols[2], lineno, "frequency")?;
        entries.push((i, j, f, cols[3].to_string(), cols[4].to_string()));
        n = n.max(i + 1);
        m = m.max(j + 1);
    }
    if entries.is_empty() {
        return Err(QdtError::Parse {
            line: 0,
            message: "no frequency rows found".into(),
        });
    }
    if entries.len() != n * m {
        return Err(QdtError::Parse {
            line: 0,
            message: format!(
                "expected {} rows for a {n}x{m} table, found {}",
                n * m,
                entries.len()
            ),
        });
    }

    let mut freqs = nalgebra::DMatrix::<f64>::zeros(n, m);
    let mut alloc: Vec<Option<String>> = vec![None; m];
    let mut seed_txt: Option<String> = None;
    for (i, j, f, shots, seed) in entries {
        freqs[(i, j)] = f;
        match &alloc[j] {
            None => alloc[j] = Some(shots),
            Some(prev) if *prev != shots => {
                return Err(QdtError::Parse {
                    line: 0,
                    message: format!("inconsistent shot counts for probe {j}"),
                });
            }
            _ => {}
        }
        seed_txt.get_or_insert(seed);
    }
    let shots = if alloc.iter().any(|a| a.as_deref() == Some("exact")) {
        ShotRecord::Exact
    } else {
        ShotRecord::Finite(
            alloc
                .into_iter()
                .map(|a| {
                    let txt = a.expect("all columns seen");
                    txt.parse::<u64>().map_err(|_| QdtError::Parse {
                        line: 0,
                        message: format!("cannot parse shot count {txt:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let seed = match seed_txt.as_deref() {
        Some("none") | None => None,
        Some(txt) => {
            let (a, b) = txt.split_once(':').ok_or(QdtError::Parse {
                line: 0,
                message: format!("seed field {txt:?} is not seed:stream"),
            })?;
            Some((parse_field(a, 0, "seed")?, parse_field(b, 0, "stream")?))
        }
    };
    FrequencyData::new(freqs, shots, seed)
}

// ---------------------------------------------------------------------------
// Scaling experiment CSV + JSON summary
// ---------------------------------------------------------------------------

/// Write per-rep scaling rows as CSV with columns `N,rep,element,infidelity`.
pub fn write_scaling_csv(record: &ExperimentRecord, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# scaling schema={SCHEMA_VERSION} seed={}", record.seed)?;
    writeln!(w, "N,rep,element,infidelity")?;
    for row in &record.rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.shots,
            row.rep,
            row.element,
            fmt_f64(row.infidelity)
        )?;
    }
    Ok(())
}

/// Read rows written by [`write_scaling_csv`] (used by the slope-refit tool).
pub fn read_scaling_csv(r: &mut impl BufRead) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let text = line?;
        let t = text.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("N,") {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != 4 {
            return Err(QdtError::Parse {
                line: lineno,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        rows.push(ScalingRow {
            shots: parse_field(cols[0], lineno, "shot count")?,
            rep: parse_field(cols[1], lineno, "rep index")?,
            element: parse_field(cols[2], lineno, "element index")?,
            infidelity: parse_field(cols[3], lineno, "infidelity")?,
        });
    }
    if rows.is_empty() {
        return Err(QdtError::Parse {
            line: 0,
            message: "no scaling rows found".into(),
        });
    }
    Ok(rows)
}

/// Write the aggregate summary (means, stds, slopes, wall clock) as JSON.
/// Per-rep rows are excluded; they live in the CSV.
pub fn write_summary_json(record: &ExperimentRecord, w: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, record)
        .map_err(|e| QdtError::Numerical(format!("JSON serialization failed: {e}")))?;
    writeln!(w)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Coherent superpositions CSV: k,Re(c),Im(c),Re(alpha),Im(alpha)
// ---------------------------------------------------------------------------

/// Write superpositions as CSV rows `k,Re(c),Im(c),Re(alpha),Im(alpha)`,
/// where k indexes the target probe and each of its terms gets one row.
pub fn write_superpositions_csv(
    sups: &[CoherentSuperposition],
    seed: u64,
    w: &mut impl Write,
) -> Result<()> {
    writeln!(w, "# superpositions schema={SCHEMA_VERSION} seed={seed}")?;
    writeln!(w, "k,Re(c),Im(c),Re(alpha),Im(alpha)")?;
    for (k, sup) in sups.iter().enumerate() {
        for &(c, alpha) in sup.terms() {
            writeln!(
                w,
                "{k},{},{},{},{}",
                fmt_f64(c.re),
                fmt_f64(c.im),
                fmt_f64(alpha.re),
                fmt_f64(alpha.im)
            )?;
        }
    }
    Ok(())
}

/// Read superpositions written by [`write_superpositions_csv`].
pub fn read_superpositions_csv(r: &mut impl BufRead) -> Result<Vec<CoherentSuperposition>> {
    let mut terms_by_k: Vec<Vec<(Complex64, Complex64)>> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let text = line?;
        let t = text.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("k,") {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != 5 {
            return Err(QdtError::Parse {
                line: lineno,
                message: format!("expected 5 columns, found {}", cols.len()),
            });
        }
        let k: usize = parse_field(cols[0], lineno, "probe index")?;
        let c = Complex64::new(
            parse_field(cols[1], lineno, "Re(c)")?,
            parse_field(cols[2], lineno, "Im(c)")?,
        );
        let alpha = Complex64::new(
            parse_field(cols[3], lineno, "Re(alpha)")?,
            parse_field(cols[4], lineno, "Im(alpha)")?,
        );
        if k >= terms_by_k.len() {
            terms_by_k.resize(k + 1, Vec::new());
        }
        terms_by_k[k].push((c, alpha));
    }
    terms_by_k
        .into_iter()
        .map(CoherentSuperposition::new)
        .collect()
}
