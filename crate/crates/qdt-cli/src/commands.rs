//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qdt::io::{
    read_scaling_csv, save_probe_set, write_scaling_csv, write_summary_json,
    write_superpositions_csv, SCHEMA_VERSION,
};
use qdt::{
    cube_states, design_report, gpb_states_computational, mub_states, random_pure_set,
    random_superposition_set, scaling_experiment, sic_states_d4, superposed_probe_set,
    DesignReport, ExperimentRecord, QdtError, ScalingRow, SynthesizedSet,
};

use crate::config::{self, CheckWindow};
use crate::{Cli, CliError};

/// Round-trip-exact float formatting for CSV fields.
fn fmt17(v: f64) -> String {
    format!("{v:.17e}")
}

/// Compact float for terminal tables: plain in a readable range, scientific
/// outside it.
fn fmt_g(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (0.01..10_000.0).contains(&a) || v == 0.0 {
        format!("{v:.4}")
    } else {
        format!("{v:.4e}")
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(QdtError::from)?))
}

// ---------------------------------------------------------------------------
// scaling / adaptive
// ---------------------------------------------------------------------------

/// Run a scaling or adaptive scenario end to end: build the detector and
/// protocol, sweep the shot grid, write CSV + JSON artifacts, report
/// per-element slopes, and verify any declared check windows.
pub fn scenario(cli: &Cli, path: &Path, want_adaptive: bool) -> Result<(), CliError> {
    let cfg = config::load_scenario(path)?;
    if cfg.robustness.is_some() {
        return Err(CliError::Config(
            "scenario declares [robustness]; run it with the robustness command".into(),
        ));
    }
    if cfg.protocol.adaptive != want_adaptive {
        let other = if want_adaptive { "scaling" } else { "adaptive" };
        return Err(CliError::Config(format!(
            "scenario sets adaptive = {}; use the {other} command",
            cfg.protocol.adaptive
        )));
    }
    let mut run = cfg.run.clone();
    config::apply_overrides(&mut run, cli.seed, cli.reps, cli.fast)?;

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let truth = config::build_detector_from(&cfg.detector, dir, None)?;
    let protocol = config::build_protocol(&cfg.protocol, truth.dim(), truth.n_outcomes())?;
    let record = scaling_experiment(&truth, &protocol, &run.n_grid, run.reps, run.seed)?;

    let stem = file_stem(path);
    let csv_path = cli.out.join(format!("{stem}.csv"));
    let mut w = create(&csv_path)?;
    write_scaling_csv(&record, &mut w)?;
    w.flush().map_err(QdtError::from)?;
    let json_path = cli.out.join(format!("{stem}.json"));
    let mut w = create(&json_path)?;
    write_summary_json(&record, &mut w)?;
    w.flush().map_err(QdtError::from)?;

    println!("{}", record.protocol);
    println!(
        "  d = {}, outcomes = {}, budgets = {:?}, reps = {}, seed = {}",
        record.dim, record.n_outcomes, record.n_grid, record.reps, record.seed
    );
    for e in &record.elements {
        let last = *e.mean_infidelity.last().expect("nonempty grid");
        match (e.slope, e.slope_stderr) {
            (Some(s), Some(se)) => println!(
                "  element {}: slope {s:+.4} +/- {se:.4}, mean infidelity {} at N = {}",
                e.element,
                fmt_g(last),
                record.n_grid.last().expect("nonempty grid"),
            ),
            _ => println!(
                "  element {}: slope n/a (fewer than 3 budgets), mean infidelity {}",
                e.element,
                fmt_g(last)
            ),
        }
    }
    println!(
        "  mse slope {:?}, wall clock {:.2} s",
        record.mse_slope, record.wall_clock_secs
    );
    println!("  wrote {} and {}", csv_path.display(), json_path.display());

    run_checks(cli, &record, &cfg.checks)
}

/// Print PASS/FAIL for each declared slope window; under `--check`, collect
/// failures into a threshold error.
fn run_checks(
    cli: &Cli,
    record: &ExperimentRecord,
    checks: &[CheckWindow],
) -> Result<(), CliError> {
    let mut failures = Vec::new();
    for check in checks {
        for &e in &check.elements {
            let verdict = match record.elements.get(e).and_then(|s| s.slope) {
                Some(slope) if (check.lo..=check.hi).contains(&slope) => {
                    format!(
                        "slope {slope:+.4} in [{:+.2}, {:+.2}]: PASS",
                        check.lo, check.hi
                    )
                }
                Some(slope) => {
                    failures.push(format!(
                        "element {e} slope {slope:+.4} outside [{:+.2}, {:+.2}]",
                        check.lo, check.hi
                    ));
                    format!(
                        "slope {slope:+.4} in [{:+.2}, {:+.2}]: FAIL",
                        check.lo, check.hi
                    )
                }
                None => {
                    failures.push(format!("element {e} has no fitted slope"));
                    "no fitted slope: FAIL".to_string()
                }
            };
            println!("  check element {e}: {verdict}");
        }
    }
    if cli.check && !failures.is_empty() {
        return Err(CliError::Threshold(failures.join("; ")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// robustness
// ---------------------------------------------------------------------------

/// Re-run a scenario under `sweeps` independently rotated copies of the
/// detector and summarize how stable the per-element slopes are.
pub fn robustness(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let cfg = config::load_scenario(path)?;
    let rob = cfg
        .robustness
        .as_ref()
        .ok_or_else(|| CliError::Config("scenario has no [robustness] section".into()))?;
    let mut run = cfg.run.clone();
    config::apply_overrides(&mut run, cli.seed, cli.reps, cli.fast)?;
    let mut sweeps = rob.sweeps;
    if cli.fast {
        sweeps = sweeps.min(5);
    }
    if sweeps == 0 {
        return Err(CliError::Config("sweeps must be at least 1".into()));
    }

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    // (sweep, element, slope, stderr, mean infidelity at the largest budget)
    let mut rows: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
    let mut failures = Vec::new();
    for s in 0..sweeps {
        let truth = config::build_detector_from(&cfg.detector, dir, Some(s as u64))?;
        let protocol = config::build_protocol(&cfg.protocol, truth.dim(), truth.n_outcomes())?;
        // Each sweep gets well-separated sampling streams.
        let record = scaling_experiment(
            &truth,
            &protocol,
            &run.n_grid,
            run.reps,
            run.seed + 7919 * s as u64,
        )?;
        let mut line = format!("sweep {s:>3}: slopes");
        for e in &record.elements {
            let slope = e.slope.unwrap_or(f64::NAN);
            let stderr = e.slope_stderr.unwrap_or(f64::NAN);
            let last = *e.mean_infidelity.last().expect("nonempty grid");
            rows.push((s, e.element, slope, stderr, last));
            line.push_str(&format!(" {slope:+.3}"));
        }
        println!("{line}");
        for check in &cfg.checks {
            for &e in &check.elements {
                match record.elements.get(e).and_then(|el| el.slope) {
                    Some(sl) if (check.lo..=check.hi).contains(&sl) => {}
                    Some(sl) => failures.push(format!(
                        "sweep {s} element {e} slope {sl:+.4} outside [{:+.2}, {:+.2}]",
                        check.lo, check.hi
                    )),
                    None => failures.push(format!("sweep {s} element {e} has no fitted slope")),
                }
            }
        }
    }

    let stem = file_stem(path);
    let csv_path = cli.out.join(format!("{stem}.csv"));
    let mut w = create(&csv_path)?;
    writeln!(w, "# robustness schema={SCHEMA_VERSION} seed={}", run.seed)
        .map_err(QdtError::from)?;
    writeln!(w, "sweep,element,slope,slope_stderr,mean_infidelity").map_err(QdtError::from)?;
    for &(s, e, slope, stderr, last) in &rows {
        writeln!(
            w,
            "{s},{e},{},{},{}",
            fmt17(slope),
            fmt17(stderr),
            fmt17(last)
        )
        .map_err(QdtError::from)?;
    }
    w.flush().map_err(QdtError::from)?;

    // Aggregate slope dispersion per element.
    let n_outcomes = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
    let mut per_element = Vec::new();
    println!("aggregate over {sweeps} sweeps:");
    for e in 0..n_outcomes {
        let slopes: Vec<f64> = rows
            .iter()
            .filter(|r| r.1 == e && r.2.is_finite())
            .map(|r| r.2)
            .collect();
        let n = slopes.len();
        let mean = slopes.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "  element {e}: slope mean {mean:+.4}, std {:.4}, range [{min:+.4}, {max:+.4}]",
            var.sqrt()
        );
        per_element.push(serde_json::json!({
            "element": e,
            "slope_mean": mean,
            "slope_std": var.sqrt(),
            "slope_min": min,
            "slope_max": max,
            "fitted_sweeps": n,
        }));
    }
    let json_path = cli.out.join(format!("{stem}.json"));
    let summary = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "sweeps": sweeps,
        "seed": run.seed,
        "n_grid": run.n_grid,
        "reps": run.reps,
        "elements": per_element,
        "check_failures": failures,
    });
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &summary)
        .map_err(|e| QdtError::Numerical(e.to_string()))?;
    w.flush().map_err(QdtError::from)?;
    println!("  wrote {} and {}", csv_path.display(), json_path.display());

    if !failures.is_empty() {
        println!("  {} check failure(s)", failures.len());
        if cli.check {
            return Err(CliError::Threshold(failures.join("; ")));
        }
    } else if !cfg.checks.is_empty() {
        println!("  all sweep checks passed");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// coherent synthesis
// ---------------------------------------------------------------------------

/// Rebuild a probe family from coherent superpositions, trying each seed in
/// the batch and keeping the set with the best error criterion.
pub fn coherent(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let cfg = config::load_coherent(path)?;
    let syn = &cfg.synthesis;
    if syn.terms == 0 {
        return Err(CliError::Config("terms must be at least 1".into()));
    }
    let mut starts = syn.starts;
    let mut batch = syn.seed_batch.clone();
    if cli.fast {
        starts = starts.min(10);
        batch.truncate(1);
    }
    if let Some(seed) = cli.seed {
        batch = vec![seed];
    }
    if batch.is_empty() || starts == 0 {
        return Err(CliError::Config(
            "need a nonempty seed_batch and starts >= 1".into(),
        ));
    }

    let base = config::build_probe_set(&syn.family, syn.m, syn.probe_seed, syn.dim)?;
    println!(
        "synthesizing {} ({} probes, d = {}) with {} terms, {starts} starts per probe",
        base.name(),
        base.len(),
        syn.dim,
        syn.terms
    );
    let mut per_seed = Vec::new();
    let mut best: Option<(u64, SynthesizedSet, DesignReport)> = None;
    for &seed in &batch {
        let result = superposed_probe_set(&base, syn.terms, starts, seed)?;
        let report = design_report(&result.set);
        let worst_cost = result.probes.iter().map(|p| p.cost).fold(0.0, f64::max);
        let flags = result.probes.iter().filter(|p| p.truncation_flag).count();
        println!(
            "  seed {seed}: criterion {}, cond {}, worst cost {:.3e}, truncation flags {flags}",
            fmt_g(report.umse_criterion),
            fmt_g(report.cond),
            worst_cost
        );
        per_seed.push(serde_json::json!({
            "seed": seed,
            "criterion": report.umse_criterion,
            "cond": report.cond,
            "worst_cost": worst_cost,
            "truncation_flags": flags,
        }));
        if best
            .as_ref()
            .is_none_or(|(_, _, b)| report.umse_criterion < b.umse_criterion)
        {
            best = Some((seed, result, report));
        }
    }
    let (best_seed, best_set, best_report) = best.expect("nonempty batch");
    println!(
        "  best: seed {best_seed}, criterion {}, cond {}",
        fmt_g(best_report.umse_criterion),
        fmt_g(best_report.cond)
    );

    let stem = file_stem(path);
    let sup_path = cli.out.join(format!("{stem}_superpositions.csv"));
    let sups: Vec<_> = best_set
        .probes
        .iter()
        .map(|p| p.superposition.clone())
        .collect();
    let mut w = create(&sup_path)?;
    write_superpositions_csv(&sups, best_seed, &mut w)?;
    w.flush().map_err(QdtError::from)?;
    let probes_path = cli.out.join(format!("{stem}_probes.txt"));
    save_probe_set(&best_set.set, &probes_path)?;
    let json_path = cli.out.join(format!("{stem}.json"));
    let summary = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "family": syn.family,
        "dim": syn.dim,
        "terms": syn.terms,
        "starts": starts,
        "seed_batch": batch,
        "per_seed": per_seed,
        "best_seed": best_seed,
        "best_criterion": best_report.umse_criterion,
        "best_cond": best_report.cond,
    });
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &summary)
        .map_err(|e| QdtError::Numerical(e.to_string()))?;
    w.flush().map_err(QdtError::from)?;
    println!(
        "  wrote {}, {} and {}",
        sup_path.display(),
        probes_path.display(),
        json_path.display()
    );

    if let Some(check) = &cfg.check {
        let ok = best_report.umse_criterion <= check.max_criterion;
        println!(
            "  check criterion {} <= {}: {}",
            fmt_g(best_report.umse_criterion),
            fmt_g(check.max_criterion),
            if ok { "PASS" } else { "FAIL" }
        );
        if cli.check && !ok {
            return Err(CliError::Threshold(format!(
                "criterion {} exceeds {}",
                best_report.umse_criterion, check.max_criterion
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

struct TableRow {
    idx: usize,
    protocol: String,
    m: usize,
    criterion: f64,
    cond: f64,
    note: String,
}

/// Mean design scores over seeded draws of `build_set`, skipping (and
/// counting) draws that are informationally incomplete.
fn sampled_row(
    draws: usize,
    build_set: impl Fn(u64) -> Result<qdt::ProbeSet, QdtError>,
) -> Result<(f64, f64, usize), CliError> {
    let mut crit_sum = 0.0;
    let mut cond_sum = 0.0;
    let mut used = 0usize;
    for k in 0..draws {
        let report = design_report(&build_set(k as u64)?);
        if report.complete {
            crit_sum += report.umse_criterion;
            cond_sum += report.cond;
            used += 1;
        }
    }
    if used == 0 {
        return Err(CliError::Run(QdtError::Numerical(
            "every sampled draw was informationally incomplete".into(),
        )));
    }
    Ok((crit_sum / used as f64, cond_sum / used as f64, draws - used))
}

/// Score the reference designs: four analytic probe families, sampled random
/// pure sets, and coherent-superposition rebuilds with one to three terms.
pub fn table1(cli: &Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let draws = if cli.fast { 100 } else { 1000 };
    let starts = if cli.fast { 10 } else { 100 };
    let batch: &[u64] = if cli.fast { &[0] } else { &[0, 1, 2] };

    let sic = sic_states_d4();
    let mub = mub_states(4)?;
    let mut rows = Vec::new();

    for (idx, set) in [
        (1, &sic),
        (2, &mub),
        (3, &cube_states()),
        (4, &gpb_states_computational(4)),
    ] {
        let report = design_report(set);
        rows.push(TableRow {
            idx,
            protocol: set.name().to_string(),
            m: set.len(),
            criterion: report.umse_criterion,
            cond: report.cond,
            note: "analytic".into(),
        });
    }

    let (crit, cond, skipped) =
        sampled_row(draws, |k| Ok(random_pure_set(32, 4, seed + 10_000 + k)))?;
    rows.push(TableRow {
        idx: 5,
        protocol: "random-pure".into(),
        m: 32,
        criterion: crit,
        cond,
        note: format!("mean of {} draws", draws - skipped),
    });

    for s in 1..=3usize {
        for (offset, base) in [(0, &sic), (1, &mub)] {
            let mut best: Option<DesignReport> = None;
            let mut flags = 0usize;
            for &b in batch {
                let result = superposed_probe_set(base, s, starts, b)?;
                let report = design_report(&result.set);
                if best
                    .as_ref()
                    .is_none_or(|r| report.umse_criterion < r.umse_criterion)
                {
                    flags = result.probes.iter().filter(|p| p.truncation_flag).count();
                    best = Some(report);
                }
            }
            let report = best.expect("nonempty batch");
            let mut note = format!("best of {} seeds x {starts} starts", batch.len());
            if flags > 0 {
                note.push_str(&format!("; {flags} truncation flags"));
            }
            rows.push(TableRow {
                idx: 5 + 3 * (s - 1) + offset + 1,
                protocol: format!("{}-{s}-coherent", base.name()),
                m: base.len(),
                criterion: report.umse_criterion,
                cond: report.cond,
                note,
            });
        }
        let (crit, cond, skipped) = sampled_row(draws, |k| {
            random_superposition_set(32, 4, s, seed + 20_000 * s as u64 + k)
        })?;
        let mut note = format!("mean of {} draws", draws - skipped);
        if skipped > 0 {
            note.push_str(&format!("; {skipped} incomplete draws skipped"));
        }
        rows.push(TableRow {
            idx: 5 + 3 * (s - 1) + 3,
            protocol: format!("random-{s}-coherent"),
            m: 32,
            criterion: crit,
            cond,
            note,
        });
    }
    rows.sort_by_key(|r| r.idx);

    println!(
        "{:>3}  {:<20} {:>4}  {:>12}  {:>10}  note",
        "row", "protocol", "M", "criterion", "cond"
    );
    for r in &rows {
        println!(
            "{:>3}  {:<20} {:>4}  {:>12}  {:>10}  {}",
            r.idx,
            r.protocol,
            r.m,
            fmt_g(r.criterion),
            fmt_g(r.cond),
            r.note
        );
    }

    let csv_path = cli.out.join("table1.csv");
    let mut w = create(&csv_path)?;
    writeln!(w, "# table1 schema={SCHEMA_VERSION} seed={seed}").map_err(QdtError::from)?;
    writeln!(w, "row,protocol,M,criterion,cond,note").map_err(QdtError::from)?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.idx,
            r.protocol,
            r.m,
            fmt17(r.criterion),
            fmt17(r.cond),
            r.note
        )
        .map_err(QdtError::from)?;
    }
    w.flush().map_err(QdtError::from)?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// slope / plotdata
// ---------------------------------------------------------------------------

/// Read a scaling CSV back and keep the seed label from its header line.
fn read_scaling_rows(path: &Path) -> Result<(Vec<ScalingRow>, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let seed_label = text
        .lines()
        .next()
        .and_then(|line| line.split("seed=").nth(1))
        .map_or_else(|| "none".to_string(), |s| s.trim().to_string());
    let mut bytes = text.as_bytes();
    let rows = read_scaling_csv(&mut bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((rows, seed_label))
}

/// Group rows by element, then by shot budget.
fn group_rows(rows: &[ScalingRow]) -> BTreeMap<usize, BTreeMap<u64, Vec<f64>>> {
    let mut grouped: BTreeMap<usize, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.element)
            .or_default()
            .entry(r.shots)
            .or_default()
            .push(r.infidelity);
    }
    grouped
}

/// Refit per-element log-log slopes from a scaling CSV, optionally windowed
/// to a budget range (useful when a rate only emerges at large N).
pub fn slope(cli: &Cli, csv: &Path, min_n: u64, max_n: u64) -> Result<(), CliError> {
    let (rows, seed_label) = read_scaling_rows(csv)?;
    let kept: Vec<ScalingRow> = rows
        .into_iter()
        .filter(|r| (min_n..=max_n).contains(&r.shots))
        .collect();
    if kept.is_empty() {
        return Err(CliError::Config(format!(
            "no rows with budgets in [{min_n}, {max_n}] in {}",
            csv.display()
        )));
    }
    let grouped = group_rows(&kept);
    let mut out_rows = Vec::new();
    for (&element, by_n) in &grouped {
        let pts: Vec<(f64, f64)> = by_n
            .iter()
            .map(|(&n, v)| (n as f64, v.iter().sum::<f64>() / v.len() as f64))
            .collect();
        let (slope, stderr) = qdt::fit_log_slope(&pts)
            .map_err(|e| CliError::Config(format!("element {element}: {e}")))?;
        println!(
            "element {element}: slope {slope:+.4} +/- {stderr:.4} over {} budgets",
            pts.len()
        );
        out_rows.push((element, slope, stderr, pts.len()));
    }
    let out_path = cli.out.join(format!("{}_slopes.csv", file_stem(csv)));
    let mut w = create(&out_path)?;
    writeln!(w, "# slopes schema={SCHEMA_VERSION} seed={seed_label}").map_err(QdtError::from)?;
    writeln!(w, "element,slope,slope_stderr,n_budgets").map_err(QdtError::from)?;
    for (element, slope, stderr, n) in out_rows {
        writeln!(w, "{element},{},{},{n}", fmt17(slope), fmt17(stderr)).map_err(QdtError::from)?;
    }
    w.flush().map_err(QdtError::from)?;
    println!("wrote {}", out_path.display());
    Ok(())
}

/// Write per-element `shots mean std` files that gnuplot can plot directly,
/// e.g. `plot "run_e0.dat" using 1:2:3 with yerrorlines`.
pub fn plotdata(cli: &Cli, csv: &Path) -> Result<(), CliError> {
    let (rows, _) = read_scaling_rows(csv)?;
    let grouped = group_rows(&rows);
    if grouped.is_empty() {
        return Err(CliError::Config(format!(
            "{} has no data rows",
            csv.display()
        )));
    }
    let stem = file_stem(csv);
    for (&element, by_n) in &grouped {
        let out_path = cli.out.join(format!("{stem}_e{element}.dat"));
        let mut w = create(&out_path)?;
        writeln!(
            w,
            "# {stem} element {element}: shots mean_infidelity std_infidelity"
        )
        .map_err(QdtError::from)?;
        for (&n, v) in by_n {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
            } else {
                0.0
            };
            writeln!(w, "{n} {:.10e} {:.10e}", mean, var.sqrt()).map_err(QdtError::from)?;
        }
        w.flush().map_err(QdtError::from)?;
        println!("wrote {}", out_path.display());
    }
    Ok(())
}
