//! Capacity allocation solvers.
//!
//! Four problems are handled, all over allocations `w` with `sum(w) = 1`:
//!
//! * sum of mean delays for a steady state, `min sum(c_i / w_i)` over the
//!   box `[max(0, w_star), w_prime]` ([`solve_sum_mean_delay`], exact);
//! * the min-max counterpart `min max(c_i / w_i)` ([`solve_minmax_mean_delay`]);
//! * sum and min-max of `b_i^2 / (w_i (w_i - a_i))` over `w_i >= w_prime`
//!   for decomposable states ([`solve_nullification`]).
//!
//! Here `c_i = a_i t_upd / 2 + b_i`. Every solver has an independent check:
//! [`oracle_solve`] searches lattices or runs projected descent, and
//! [`verify_kkt`] / [`verify_level_equalization`] certify optimality.

mod faces;
mod kkt;
mod minmax;
mod nullification;
mod oracle;
mod projection;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Infeasibility, Result};
use crate::fluid_model::SystemState;
use crate::state_analysis::{feasible_box, FeasibleBox};

pub use faces::solve_sum_mean_delay;
pub use kkt::{verify_kkt, verify_level_equalization, KktReport};
pub use minmax::solve_minmax_mean_delay;
pub use nullification::{
    nullification_objective, nullification_stationarity, solve_nullification, NullVariant,
    NULL_SUM_PG_TOL,
};
pub use oracle::{oracle_minimize, oracle_solve, Aggregate, OracleMode, SeparableObjective, Term};
pub use projection::{project_onto_box_budget, projected_gradient_norm};

/// Slack used when deciding whether a point violates a box constraint or
/// whether a face is feasible.
pub const FACE_SLACK: f64 = 1e-12;

/// `min sum(c_i / x_i)` subject to `lo <= x <= hi` and `sum(x) = budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumDelayProblem {
    c: Vec<f64>,
    bounds: FeasibleBox,
    budget: f64,
}

impl SumDelayProblem {
    pub fn new(c: Vec<f64>, bounds: FeasibleBox, budget: f64) -> Result<Self> {
        if c.is_empty() {
            return Err(domain("problem without pipes"));
        }
        if c.len() != bounds.len() {
            return Err(domain(format!(
                "{} weights but a box of dimension {}",
                c.len(),
                bounds.len()
            )));
        }
        if let Some(i) = c.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(domain(format!("weight c[{i}] = {} must be positive", c[i])));
        }
        if !(budget.is_finite() && budget > 0.0) {
            return Err(domain(format!("budget must be positive, got {budget}")));
        }
        for i in 0..c.len() {
            let (lo, hi) = (bounds.lo[i], bounds.hi[i]);
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(domain(format!("bounds of pipe {i} are [{lo}, {hi}]")));
            }
        }
        Ok(SumDelayProblem { c, bounds, budget })
    }

    /// Builds the problem for a system state: `c_i = a_i t_upd / 2 + b_i`,
    /// box from [`feasible_box`], unit budget.
    pub fn from_state(state: &SystemState) -> Result<Self> {
        let c = state
            .pipes()
            .iter()
            .map(|p| p.a * state.t_upd() / 2.0 + p.b)
            .collect();
        Self::new(c, feasible_box(state), 1.0)
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn bounds(&self) -> &FeasibleBox {
        &self.bounds
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `sum(c_i / x_i)`; infinite if some `x_i` is zero.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c / x).sum()
    }

    /// `max(c_i / x_i)`.
    pub fn max_level(&self, x: &[f64]) -> f64 {
        self.c
            .iter()
            .zip(x)
            .map(|(c, x)| c / x)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_nonempty(&self) -> Result<()> {
        check_budget(&self.bounds.lo, &self.bounds.hi, self.budget)
    }
}

pub(crate) fn check_budget(lo: &[f64], hi: &[f64], budget: f64) -> Result<()> {
    let sum_lo: f64 = lo.iter().sum();
    let sum_hi: f64 = hi.iter().sum();
    if sum_lo > budget + FACE_SLACK {
        return Err(Error::Infeasible(Infeasibility::LowerBoundsExceedBudget {
            sum_lo,
            budget,
        }));
    }
    if sum_hi < budget - FACE_SLACK {
        return Err(Error::Infeasible(Infeasibility::UpperBoundsBelowBudget {
            sum_hi,
            budget,
        }));
    }
    Ok(())
}

/// Which bound of a box coordinate is held as an equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

/// An active box constraint `x_pipe = bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Face {
    pub pipe: usize,
    pub side: BoundSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub w: Vec<f64>,
    pub objective: f64,
    /// Box constraints held as equalities at the solution.
    pub fixed_faces: Vec<Face>,
    /// Work counter: face subproblems for the exact solver, iterations or
    /// evaluated points for the others.
    pub nodes_visited: usize,
}

/// Unconstrained minimizer of `sum(c_i / x_i)` on `{x > 0, sum(x) = budget}`:
/// `x_i = budget * sqrt(c_i) / sum(sqrt(c_j))`.
pub fn simplex_minimum(c: &[f64], budget: f64) -> Result<Vec<f64>> {
    if c.is_empty() {
        return Err(domain("empty weight vector"));
    }
    if let Some(i) = c.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(domain(format!("weight c[{i}] = {} must be positive", c[i])));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(domain(format!("budget must be positive, got {budget}")));
    }
    Ok(raw_simplex_minimum(c.iter().copied(), budget))
}

pub(crate) fn raw_simplex_minimum(c: impl Iterator<Item = f64> + Clone, budget: f64) -> Vec<f64> {
    let total: f64 = c.clone().map(f64::sqrt).sum();
    c.map(|ci| budget * ci.sqrt() / total).collect()
}

/// Faces that `x` touches within `tol`.
pub(crate) fn active_faces(x: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> Vec<Face> {
    let mut faces = Vec::new();
    for i in 0..x.len() {
        if (x[i] - lo[i]).abs() <= tol {
            faces.push(Face {
                pipe: i,
                side: BoundSide::Lower,
            });
        } else if (x[i] - hi[i]).abs() <= tol {
            faces.push(Face {
                pipe: i,
                side: BoundSide::Upper,
            });
        }
    }
    faces
}
