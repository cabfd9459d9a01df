//! A small deterministic Nelder–Mead simplex minimizer.
//!
//! Used for the low-dimensional, non-convex probe-synthesis searches, where
//! gradients are awkward (the objective involves normalized state overlaps)
//! and dimension stays in the tens. The implementation is the standard
//! reflect / expand / contract / shrink scheme with fixed coefficients; all
//! tie-breaking is stable, so a given starting point always produces the same
//! trajectory.

/// Tuning knobs for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Hard cap on iterations (one reflection cycle each).
    pub max_iters: usize,
    /// Stop when the simplex f-spread falls below `f_tol · (1 + |f_best|)`.
    pub f_tol: f64,
    /// Coordinate offset used to build the initial simplex around the start.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iters: 2_000,
            f_tol: 1e-12,
            initial_step: 0.1,
        }
    }
}

/// Result of a simplex run.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub f: f64,
    /// Iterations actually used.
    pub iters: usize,
    /// True if the f-spread tolerance was met before `max_iters`.
    pub converged: bool,
}

/// Minimize `f` from `x0` with the Nelder–Mead simplex method.
///
/// Deterministic: no internal randomness, stable sorting, fixed coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> OptimOutcome {
    let n = x0.len();
    assert!(n > 0, "need at least one coordinate");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        // Order the simplex by objective value (stable, so ties keep their
        // insertion order and the trajectory stays reproducible).
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = values[order[0]];
        let worst = values[order[n]];
        if (worst - best).abs() <= opts.f_tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iters += 1;

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for &idx in &order[..n] {
            for k in 0..n {
                centroid[k] += simplex[idx][k];
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let worst_idx = order[n];
        let second_worst = values[order[n - 1]];
        let lerp = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (centroid[k] - simplex[worst_idx][k]))
                .collect()
        };

        let reflected = lerp(1.0);
        let f_r = f(&reflected);
        if f_r < best {
            let expanded = lerp(2.0);
            let f_e = f(&expanded);
            if f_e < f_r {
                simplex[worst_idx] = expanded;
                values[worst_idx] = f_e;
            } else {
                simplex[worst_idx] = reflected;
                values[worst_idx] = f_r;
            }
            continue;
        }
        if f_r < second_worst {
            simplex[worst_idx] = reflected;
            values[worst_idx] = f_r;
            continue;
        }
        // Contract toward the better of the worst vertex and its reflection.
        let contracted = if f_r < values[worst_idx] {
            lerp(0.5)
        } else {
            lerp(-0.5)
        };
        let f_c = f(&contracted);
        if f_c < values[worst_idx].min(f_r) {
            simplex[worst_idx] = contracted;
            values[worst_idx] = f_c;
            continue;
        }
        // Shrink everything toward the best vertex.
        let best_point = simplex[order[0]].clone();
        for &idx in order.iter().skip(1) {
            for k in 0..n {
                simplex[idx][k] = best_point[k] + 0.5 * (simplex[idx][k] - best_point[k]);
            }
            values[idx] = f(&simplex[idx]);
        }
    }

    let mut best_idx = 0;
    for i in 1..=n {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    OptimOutcome {
        x: simplex[best_idx].clone(),
        f: values[best_idx],
        iters,
        converged,
    }
}
