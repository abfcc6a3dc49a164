//! Allocations that empty every queue within the horizon.
//!
//! When `A + B/t_upd <= 1` every pipe can receive at least its nullifying
//! share `w_prime_i`. Mean delay of a nullified pipe is proportional to
//! `b_i^2 / (w_i (w_i - a_i))`, which is convex and decreasing for
//! `w_i > a_i`; the two problems minimize its sum or its maximum. Both are
//! solved by bisection: on the common marginal gain for the sum, on the
//! common level for the maximum.

use serde::{Deserialize, Serialize};

use super::minmax::{level_bisection, pinned_faces};
use super::oracle::{Aggregate, SeparableObjective, Term};
use super::{projected_gradient_norm, SolveResult, FACE_SLACK};
use crate::error::{Error, Infeasibility, Result};
use crate::fluid_model::{raw_thresholds, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullVariant {
    Sum,
    MinMax,
}

/// Projected-gradient norm the sum variant is expected to reach.
pub const NULL_SUM_PG_TOL: f64 = 1e-10;

/// Objective, lower bounds `w_prime` and upper bounds (the whole budget) of
/// the nullification problem for `state`.
pub fn nullification_objective(
    state: &SystemState,
    variant: NullVariant,
) -> (SeparableObjective, Vec<f64>, Vec<f64>) {
    let terms = state
        .pipes()
        .iter()
        .map(|p| Term::Nullification { a: p.a, b: p.b })
        .collect();
    let lo: Vec<f64> = state
        .pipes()
        .iter()
        .map(|p| raw_thresholds(p, state.t_upd(), state.m()).1)
        .collect();
    let hi = vec![1.0; lo.len()];
    let aggregate = match variant {
        NullVariant::Sum => Aggregate::Sum,
        NullVariant::MinMax => Aggregate::Max,
    };
    (SeparableObjective { terms, aggregate }, lo, hi)
}

pub fn solve_nullification(variant: NullVariant, state: &SystemState) -> Result<SolveResult> {
    let nullifying_total = state.total_intensity() + state.total_backlog() / state.t_upd();
    if nullifying_total > 1.0 + FACE_SLACK {
        return Err(Error::Infeasible(Infeasibility::NotDecomposable {
            nullifying_total,
        }));
    }
    let (objective, lo, hi) = nullification_objective(state, variant);
    let pipes = state.pipes();
    let (w, work) = match variant {
        // stationarity: every free pipe has the same marginal gain
        // -f_i'(w_i) = lambda, so bisect on lambda
        NullVariant::Sum => level_bisection(
            |i, lambda| marginal_inverse(pipes[i].a, pipes[i].b, lambda, lo[i], hi[i]),
            &lo,
            &hi,
            1.0,
        ),
        NullVariant::MinMax => level_bisection(
            |i, level| {
                let (a, b) = (pipes[i].a, pipes[i].b);
                // root above a of x (x - a) = b^2 / level
                0.5 * (a + (a * a + 4.0 * b * b / level).sqrt())
            },
            &lo,
            &hi,
            1.0,
        ),
    };
    Ok(SolveResult {
        objective: objective.value(&w),
        fixed_faces: pinned_faces(&w, &lo, &hi),
        w,
        nodes_visited: work,
    })
}

/// Share in `[lo, hi]` at which the marginal gain
/// `-d/dw b^2 / (w (w - a)) = b^2 (2w - a) / (w (w - a))^2` equals `lambda`.
/// The gain decreases in `w`, so bisect down to adjacent floats.
fn marginal_inverse(a: f64, b: f64, lambda: f64, lo: f64, hi: f64) -> f64 {
    if b == 0.0 {
        return lo;
    }
    let gain = |w: f64| {
        let d = w * (w - a);
        b * b * (2.0 * w - a) / (d * d)
    };
    if gain(lo) <= lambda {
        return lo;
    }
    if gain(hi) >= lambda {
        return hi;
    }
    let (mut l, mut h) = (lo, hi);
    loop {
        let mid = 0.5 * (l + h);
        if mid <= l || mid >= h {
            return h;
        }
        if gain(mid) > lambda {
            l = mid;
        } else {
            h = mid;
        }
    }
}

/// Projected-gradient norm of the sum variant at `w`; zero at the optimum.
pub fn nullification_stationarity(state: &SystemState, w: &[f64]) -> f64 {
    let (objective, lo, hi) = nullification_objective(state, NullVariant::Sum);
    let mut g = vec![0.0; w.len()];
    objective.gradient(w, &mut g);
    projected_gradient_norm(w, &g, &lo, &hi, 1.0)
}
