//! Min-max allocation by bisection on the common level.
//!
//! For a target level `D` each pipe takes the share that brings its level to
//! `D`, clamped to its box. The total share is nonincreasing in `D`, so the
//! level that spends exactly the budget is found by bisection.

use super::{BoundSide, Face, SolveResult, SumDelayProblem};
use crate::error::Result;

/// `min max(c_i / w_i)` over the same box and budget as the sum problem.
pub fn solve_minmax_mean_delay(problem: &SumDelayProblem) -> Result<SolveResult> {
    problem.check_nonempty()?;
    let c = problem.c();
    let (lo, hi) = (&problem.bounds().lo, &problem.bounds().hi);
    let (w, iterations) = level_bisection(|i, level| c[i] / level, lo, hi, problem.budget());
    Ok(SolveResult {
        objective: problem.max_level(&w),
        fixed_faces: pinned_faces(&w, lo, hi),
        w,
        nodes_visited: iterations,
    })
}

/// Finds `w_i = clamp(share(i, D), lo_i, hi_i)` with `sum(w) = budget`.
///
/// `share(i, D)` must be positive and nonincreasing in `D > 0`, and the
/// box must meet the budget. Returns the allocation and the number of
/// bisection steps.
pub(crate) fn level_bisection(
    share: impl Fn(usize, f64) -> f64,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
) -> (Vec<f64>, usize) {
    let n = lo.len();
    let at = |level: f64| -> Vec<f64> {
        (0..n)
            .map(|i| share(i, level).clamp(lo[i], hi[i]))
            .collect()
    };
    let total = |w: &[f64]| w.iter().sum::<f64>();

    // bracket: total(at(d_lo)) >= budget >= total(at(d_hi))
    let mut d_lo = 1.0;
    let mut d_hi = 1.0;
    let mut steps = 0;
    while total(&at(d_hi)) > budget && steps < 2100 {
        d_hi *= 2.0;
        steps += 1;
    }
    while total(&at(d_lo)) < budget && steps < 4200 {
        d_lo *= 0.5;
        steps += 1;
    }
    for _ in 0..400 {
        let mid = (d_lo * d_hi).sqrt();
        if !(mid > d_lo && mid < d_hi) {
            break;
        }
        steps += 1;
        if total(&at(mid)) > budget {
            d_lo = mid;
        } else {
            d_hi = mid;
        }
    }

    let mut w = at(d_hi);
    let residual = budget - total(&w);
    distribute(&mut w, residual, lo, hi);
    (w, steps)
}

/// Spends a small leftover on pipes pinned at their lower bound first (it
/// only lowers their level), then on any pipe with room.
fn distribute(w: &mut [f64], residual: f64, lo: &[f64], hi: &[f64]) {
    if residual <= 0.0 {
        return;
    }
    let pinned: Vec<usize> = (0..w.len())
        .filter(|&i| w[i] <= lo[i] && w[i] < hi[i])
        .collect();
    let targets: Vec<usize> = if pinned.is_empty() {
        (0..w.len()).filter(|&i| w[i] < hi[i]).collect()
    } else {
        pinned
    };
    let room: f64 = targets.iter().map(|&i| hi[i] - w[i]).sum();
    if room <= 0.0 {
        return;
    }
    let give = residual.min(room);
    for &i in &targets {
        let r = hi[i] - w[i];
        w[i] = if r.is_finite() && room.is_finite() {
            (w[i] + give * r / room).min(hi[i])
        } else {
            w[i] + give / targets.len() as f64
        };
    }
}

pub(crate) fn pinned_faces(w: &[f64], lo: &[f64], hi: &[f64]) -> Vec<Face> {
    (0..w.len())
        .filter_map(|i| {
            if w[i] <= lo[i] {
                Some(Face {
                    pipe: i,
                    side: BoundSide::Lower,
                })
            } else if w[i] >= hi[i] {
                Some(Face {
                    pipe: i,
                    side: BoundSide::Upper,
                })
            } else {
                None
            }
        })
        .collect()
}
