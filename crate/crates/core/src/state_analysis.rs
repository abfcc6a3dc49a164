//! Whole-system feasibility classification.

use serde::{Deserialize, Serialize};

use crate::fluid_model::{raw_thresholds, SystemState};

/// Verdicts of the three feasibility criteria plus steadiness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateClass {
    /// `A`, the sum of arrival intensities.
    pub total_intensity: f64,
    /// `B`, the sum of backlogs.
    pub total_backlog: f64,
    /// Some allocation empties every queue: `A + B/t_upd <= 1`.
    pub decomposable: bool,
    /// Some allocation avoids every overflow: `sum(max(0, w_star)) <= 1`.
    pub avoidable: bool,
    /// Some allocation keeps every queue non-increasing: `A <= 1`.
    pub nonincreasable: bool,
    /// Avoidable without strict decomposability: `A + B/t_upd >= 1`.
    pub steady: bool,
    /// Zero-based indices of pipes with `w_star <= 0`.
    pub nodrop_pipes: Vec<usize>,
}

/// Per-pipe interval `[max(0, w_star), w_prime]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl FeasibleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds of different length");
        FeasibleBox { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn sum_lo(&self) -> f64 {
        self.lo.iter().sum()
    }

    pub fn sum_hi(&self) -> f64 {
        self.hi.iter().sum()
    }

    /// Whether the box meets the hyperplane `sum(x) = budget`.
    pub fn meets_budget(&self, budget: f64) -> bool {
        self.sum_lo() <= budget && budget <= self.sum_hi()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.len()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }
}

pub fn classify_state(state: &SystemState) -> StateClass {
    let t_upd = state.t_upd();
    let total_intensity = state.total_intensity();
    let total_backlog = state.total_backlog();
    let nullifying_total = total_intensity + total_backlog / t_upd;

    let mut clamped_star_sum = 0.0;
    let mut nodrop_pipes = Vec::new();
    for (i, pipe) in state.pipes().iter().enumerate() {
        let (w_star, _) = raw_thresholds(pipe, t_upd, state.m());
        if w_star <= 0.0 {
            nodrop_pipes.push(i);
        } else {
            clamped_star_sum += w_star;
        }
    }
    let avoidable = clamped_star_sum <= 1.0;

    StateClass {
        total_intensity,
        total_backlog,
        decomposable: nullifying_total <= 1.0,
        avoidable,
        nonincreasable: total_intensity <= 1.0,
        steady: avoidable && nullifying_total >= 1.0,
        nodrop_pipes,
    }
}

/// Box whose intersection with the simplex is the polytope of uniform
/// confined allocations.
pub fn feasible_box(state: &SystemState) -> FeasibleBox {
    let (lo, hi) = state
        .pipes()
        .iter()
        .map(|pipe| {
            let (w_star, w_prime) = raw_thresholds(pipe, state.t_upd(), state.m());
            (w_star.max(0.0), w_prime)
        })
        .unzip();
    FeasibleBox { lo, hi }
}
