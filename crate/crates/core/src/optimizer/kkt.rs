//! Optimality certificates.

use serde::{Deserialize, Serialize};

use super::SumDelayProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub satisfied: bool,
    /// Budget multiplier (sum problem) or common level (min-max problem).
    pub multiplier: Option<f64>,
    pub diagnostic: Option<String>,
}

impl KktReport {
    fn pass(multiplier: f64) -> Self {
        KktReport {
            satisfied: true,
            multiplier: Some(multiplier),
            diagnostic: None,
        }
    }

    fn fail(multiplier: Option<f64>, diagnostic: String) -> Self {
        KktReport {
            satisfied: false,
            multiplier,
            diagnostic: Some(diagnostic),
        }
    }
}

fn feasibility(w: &[f64], lo: &[f64], hi: &[f64], budget: f64, tol: f64) -> Option<String> {
    if w.len() != lo.len() {
        return Some(format!(
            "point has {} coordinates, problem has {}",
            w.len(),
            lo.len()
        ));
    }
    let total: f64 = w.iter().sum();
    if (total - budget).abs() > tol {
        return Some(format!("sum(w) = {total}, budget {budget}"));
    }
    for i in 0..w.len() {
        if !(w[i] >= lo[i] - tol && w[i] <= hi[i] + tol) {
            return Some(format!("w[{i}] = {} outside [{}, {}]", w[i], lo[i], hi[i]));
        }
    }
    None
}

/// Checks the KKT conditions of `min sum(c_i / w_i)` at `w`.
///
/// With ratios `r_i = c_i / w_i^2` there must be a multiplier `lambda` with
/// `r_i = lambda` on free coordinates, `r_i <= lambda` at lower bounds and
/// `r_i >= lambda` at upper bounds. Ratios are compared relative to
/// `lambda`; bound activity and feasibility are absolute.
pub fn verify_kkt(problem: &SumDelayProblem, w: &[f64], tol: f64) -> KktReport {
    let (lo, hi) = (&problem.bounds().lo, &problem.bounds().hi);
    if let Some(msg) = feasibility(w, lo, hi, problem.budget(), tol) {
        return KktReport::fail(None, format!("infeasible: {msg}"));
    }
    let ratio: Vec<f64> = problem
        .c()
        .iter()
        .zip(w)
        .map(|(c, w)| c / (w * w))
        .collect();

    let mut interior = Vec::new();
    let mut at_lo = Vec::new();
    let mut at_hi = Vec::new();
    for i in 0..w.len() {
        if w[i] - lo[i] <= tol {
            at_lo.push(i);
        } else if hi[i] - w[i] <= tol {
            at_hi.push(i);
        } else {
            interior.push(i);
        }
    }

    // feasible multipliers form [lambda_min, lambda_max]
    let lambda_min = at_lo.iter().map(|&i| ratio[i]).fold(0.0, f64::max);
    let lambda_max = at_hi
        .iter()
        .map(|&i| ratio[i])
        .fold(f64::INFINITY, f64::min);

    let lambda = if interior.is_empty() {
        if lambda_min > lambda_max * (1.0 + tol) {
            return KktReport::fail(
                None,
                format!("lower-bound ratio {lambda_min} exceeds upper-bound ratio {lambda_max}"),
            );
        }
        if lambda_max.is_finite() {
            0.5 * (lambda_min + lambda_max)
        } else {
            lambda_min
        }
    } else {
        let lambda = interior.iter().map(|&i| ratio[i]).sum::<f64>() / interior.len() as f64;
        if let Some(&i) = interior
            .iter()
            .find(|&&i| (ratio[i] - lambda).abs() > tol * lambda)
        {
            return KktReport::fail(
                Some(lambda),
                format!(
                    "free pipe {i} has ratio {} but the common ratio is {lambda}",
                    ratio[i]
                ),
            );
        }
        lambda
    };
    if let Some(&i) = at_lo.iter().find(|&&i| ratio[i] > lambda * (1.0 + tol)) {
        return KktReport::fail(
            Some(lambda),
            format!(
                "pipe {i} at its lower bound has ratio {} > {lambda}",
                ratio[i]
            ),
        );
    }
    if let Some(&i) = at_hi.iter().find(|&&i| ratio[i] < lambda * (1.0 - tol)) {
        return KktReport::fail(
            Some(lambda),
            format!(
                "pipe {i} at its upper bound has ratio {} < {lambda}",
                ratio[i]
            ),
        );
    }
    KktReport::pass(lambda)
}

/// Optimality certificate for `min max_i level_i(w_i)` with nonincreasing
/// per-pipe levels, over `lo <= w <= hi`, `sum(w) = budget`.
///
/// Lowering the maximum needs every pipe at the top level to grow, paid for
/// by pipes below it. So `w` is optimal iff some top-level pipe sits at its
/// upper bound, or every other pipe sits at its lower bound.
pub fn verify_level_equalization(
    levels: &[f64],
    w: &[f64],
    lo: &[f64],
    hi: &[f64],
    budget: f64,
    tol: f64,
) -> KktReport {
    if let Some(msg) = feasibility(w, lo, hi, budget, tol) {
        return KktReport::fail(None, format!("infeasible: {msg}"));
    }
    let top = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at_top = |i: usize| levels[i] >= top - tol * top.abs().max(1.0);
    let n = w.len();
    let capped = (0..n).any(|i| at_top(i) && hi[i] - w[i] <= tol);
    let no_donor = (0..n).all(|i| at_top(i) || w[i] - lo[i] <= tol);
    if capped || no_donor {
        KktReport::pass(top)
    } else {
        let donor = (0..n)
            .find(|&i| !at_top(i) && w[i] - lo[i] > tol)
            .unwrap_or(0);
        KktReport::fail(
            Some(top),
            format!("pipe {donor} sits above its lower bound below the top level {top}"),
        )
    }
}
