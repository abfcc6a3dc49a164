use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::fluid_model::{Allocation, PipeState, SystemState};
use crate::optimizer::{solve_minmax_mean_delay, solve_sum_mean_delay, SumDelayProblem};

/// How capacity is chosen at the start of each epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Exact minimizer of the sum of mean delays.
    SumOptimal,
    /// Minimizer of the largest mean delay.
    MinMaxOptimal,
    EqualSplit,
    ProportionalToBacklog,
    ProportionalToIntensity,
    Static(Allocation),
}

/// Allocation chosen by a policy, and whether it had to fall back to the
/// equal split.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub allocation: Allocation,
    pub fallback: bool,
}

impl Policy {
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Decides on the observed state. Solver policies fall back to the equal
    /// split when their problem is infeasible or degenerate.
    pub fn decide(&self, state: &SystemState) -> Decision {
        let n = state.len();
        let solved = match self {
            Policy::SumOptimal => solve(state, solve_sum_mean_delay),
            Policy::MinMaxOptimal => solve(state, solve_minmax_mean_delay),
            Policy::EqualSplit => return ok(Allocation::equal(n)),
            Policy::ProportionalToBacklog => {
                return ok(proportional(state.pipes().iter().map(|p| p.b), n))
            }
            Policy::ProportionalToIntensity => {
                return ok(proportional(state.pipes().iter().map(|p| p.a), n))
            }
            Policy::Static(w) if w.len() == n => return ok(w.clone()),
            Policy::Static(_) => Err(domain("static allocation has the wrong dimension")),
        };
        match solved {
            Ok(allocation) => ok(allocation),
            Err(_) => Decision {
                allocation: Allocation::equal(n),
                fallback: true,
            },
        }
    }
}

fn ok(allocation: Allocation) -> Decision {
    Decision {
        allocation,
        fallback: false,
    }
}

fn solve(
    state: &SystemState,
    solver: fn(&SumDelayProblem) -> Result<crate::optimizer::SolveResult>,
) -> Result<Allocation> {
    let problem = SumDelayProblem::from_state(state)?;
    let result = solver(&problem)?;
    Allocation::new(result.w)
}

fn proportional(weights: impl Iterator<Item = f64>, n: usize) -> Allocation {
    let weights: Vec<f64> = weights.collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
        Allocation::new(w).unwrap_or_else(|_| Allocation::equal(n))
    } else {
        Allocation::equal(n)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::SumOptimal => f.write_str("sum-optimal"),
            Policy::MinMaxOptimal => f.write_str("minmax-optimal"),
            Policy::EqualSplit => f.write_str("equal-split"),
            Policy::ProportionalToBacklog => f.write_str("proportional-backlog"),
            Policy::ProportionalToIntensity => f.write_str("proportional-intensity"),
            Policy::Static(w) => {
                f.write_str("static:")?;
                for (i, x) in w.as_slice().iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sum-optimal" => Policy::SumOptimal,
            "minmax-optimal" => Policy::MinMaxOptimal,
            "equal-split" => Policy::EqualSplit,
            "proportional-backlog" => Policy::ProportionalToBacklog,
            "proportional-intensity" => Policy::ProportionalToIntensity,
            _ => {
                let Some(list) = s.strip_prefix("static:") else {
                    return Err(domain(format!("unknown policy '{s}'")));
                };
                let w = list
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| domain(format!("static allocation '{list}': {e}")))?;
                Policy::Static(Allocation::new(w)?)
            }
        })
    }
}

/// Frozen-intensity state used for a decision: estimates are clamped to the
/// model's `[0, 1]` intensity range.
pub(crate) fn observed_state(
    estimate: &[f64],
    backlog: &[f64],
    t_upd: f64,
    m: f64,
) -> Result<SystemState> {
    let pipes = estimate
        .iter()
        .zip(backlog)
        .map(|(&a, &b)| PipeState::new(a.clamp(0.0, 1.0), b.clamp(0.0, m)))
        .collect();
    SystemState::new(pipes, t_upd, m)
}
