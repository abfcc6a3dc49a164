//! Independent reference solvers used to check the exact solvers.
//!
//! Nothing here shares code with the face recursion or the level
//! bisection. The lattice modes work on lattices
//! `x_i = s_i + k_i h`, `sum(k_i) = K`, where each coordinate is anchored
//! at one face of its box: `s_i = lo_i`, or `s_i = hi_i - cap_i h` so that
//! the top lattice value is `hi_i` itself. The step `h` is the largest
//! value not above the requested resolution that makes the budget
//! reachable. Every lattice point is feasible, so a lattice optimum is an
//! upper bound on the continuous one.

use serde::{Deserialize, Serialize};

use super::projection::{projected_descent, raw_project};
use super::{check_budget, SolveResult, SumDelayProblem, FACE_SLACK};
use crate::error::{domain, Result};

/// One separable term of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Term {
    /// `c / x`.
    Reciprocal { c: f64 },
    /// `b^2 / (x (x - a))`, zero when `b = 0`.
    Nullification { a: f64, b: f64 },
}

impl Term {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Term::Reciprocal { c } => c / x,
            Term::Nullification { b: 0.0, .. } => 0.0,
            Term::Nullification { a, b } => {
                if x <= a {
                    f64::INFINITY
                } else {
                    b * b / (x * (x - a))
                }
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Term::Reciprocal { c } => -c / (x * x),
            Term::Nullification { b: 0.0, .. } => 0.0,
            Term::Nullification { a, b } => {
                let d = x * (x - a);
                -b * b * (2.0 * x - a) / (d * d)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Sum,
    Max,
}

/// `sum_i f_i(x_i)` or `max_i f_i(x_i)` with each `f_i` nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableObjective {
    pub terms: Vec<Term>,
    pub aggregate: Aggregate,
}

impl SeparableObjective {
    pub fn value(&self, x: &[f64]) -> f64 {
        let values = self.terms.iter().zip(x).map(|(t, &x)| t.value(x));
        match self.aggregate {
            Aggregate::Sum => values.sum(),
            Aggregate::Max => values.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn levels(&self, x: &[f64]) -> Vec<f64> {
        self.terms.iter().zip(x).map(|(t, &x)| t.value(x)).collect()
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((g, t), &x) in out.iter_mut().zip(&self.terms).zip(x) {
            *g = t.derivative(x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Exhaustive enumeration of the lattice; `N <= 6` and a bounded
    /// number of points.
    Grid { step: f64 },
    /// Exact lattice optimum by greedy unit allocation, which is optimal for
    /// separable objectives with nonincreasing convex terms (sum) or
    /// nonincreasing terms (max). Taken over every anchoring of the
    /// coordinates when `N <= 12`, so points on upper faces are reachable;
    /// lower anchoring only beyond that.
    Lattice { step: f64 },
    /// Coarse exhaustive grid, then repeated local enumeration around the
    /// incumbent with a halved step until `step` is reached.
    Refined { step: f64 },
    /// Projected gradient descent; smooth (sum) objectives only.
    Descent,
}

/// Largest `N` for which every lattice anchoring is tried.
const ANCHOR_MAX_DIM: usize = 12;

/// Points allowed in one exhaustive enumeration.
const GRID_POINT_LIMIT: f64 = 5e7;
const GRID_MAX_DIM: usize = 6;

/// Reference solution of a sum-of-delays problem.
pub fn oracle_solve(problem: &SumDelayProblem, mode: OracleMode) -> Result<SolveResult> {
    let objective = SeparableObjective {
        terms: problem
            .c()
            .iter()
            .map(|&c| Term::Reciprocal { c })
            .collect(),
        aggregate: Aggregate::Sum,
    };
    let b = problem.bounds();
    oracle_minimize(&objective, &b.lo, &b.hi, problem.budget(), mode)
}

/// Reference minimization of any separable objective over the box cut by
/// the budget hyperplane.
pub fn oracle_minimize(
    objective: &SeparableObjective,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
    mode: OracleMode,
) -> Result<SolveResult> {
    if objective.terms.len() != lo.len() || lo.len() != hi.len() || lo.is_empty() {
        return Err(domain("objective and bounds have inconsistent dimensions"));
    }
    check_budget(lo, hi, budget)?;
    let (x, evaluations) = match mode {
        OracleMode::Grid { step } => {
            check_step(step)?;
            let lattice = Lattice::new(lo, hi, budget, step)?;
            lattice.enumerate(objective)?
        }
        OracleMode::Lattice { step } => {
            check_step(step)?;
            best_anchored(objective, lo, hi, budget, step)?
        }
        OracleMode::Refined { step } => {
            check_step(step)?;
            refined(objective, lo, hi, budget, step)?
        }
        OracleMode::Descent => {
            if objective.aggregate != Aggregate::Sum {
                return Err(domain("descent oracle needs a smooth (sum) objective"));
            }
            descent(objective, lo, hi, budget)
        }
    };
    Ok(SolveResult {
        objective: objective.value(&x),
        fixed_faces: super::active_faces(&x, lo, hi, FACE_SLACK),
        w: x,
        nodes_visited: evaluations,
    })
}

fn check_step(step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(domain(format!(
            "oracle resolution must be positive, got {step}"
        )));
    }
    Ok(())
}

/// Best greedy lattice optimum over the anchorings of the coordinates.
fn best_anchored(
    objective: &SeparableObjective,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
    resolution: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = lo.len();
    let patterns: u64 = if n <= ANCHOR_MAX_DIM { 1 << n } else { 1 };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluations = 0;
    let mut upper = vec![false; n];
    for code in 0..patterns {
        for (i, u) in upper.iter_mut().enumerate() {
            *u = code >> i & 1 == 1;
        }
        let Ok(lattice) = Lattice::anchored(lo, hi, &upper, budget, resolution) else {
            continue;
        };
        let (x, used) = lattice.greedy(objective);
        evaluations += used;
        let value = objective.value(&x);
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, x));
        }
    }
    match best {
        Some((_, x)) => Ok((x, evaluations)),
        None => Err(domain(
            "lattice too coarse to meet the budget inside the box",
        )),
    }
}

struct Lattice<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
    start: Vec<f64>,
    step: f64,
    units: usize,
    caps: Vec<usize>,
}

impl<'a> Lattice<'a> {
    /// Lattice anchored at every lower face.
    fn new(lo: &'a [f64], hi: &'a [f64], budget: f64, resolution: f64) -> Result<Self> {
        Self::anchored(lo, hi, &vec![false; lo.len()], budget, resolution)
    }

    /// Coordinates with `upper[i]` set have `hi_i` as their top value.
    fn anchored(
        lo: &'a [f64],
        hi: &'a [f64],
        upper: &[bool],
        budget: f64,
        resolution: f64,
    ) -> Result<Self> {
        let faces: f64 = (0..lo.len())
            .map(|i| if upper[i] { hi[i] } else { lo[i] })
            .sum();
        let offset = budget - faces;
        let parts = (offset.abs() / resolution).ceil();
        let step = if parts == 0.0 {
            resolution
        } else {
            offset.abs() / parts
        };
        let caps: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| (((h - l) / step) + 1e-9).floor().max(0.0) as usize)
            .collect();
        let start: Vec<f64> = (0..lo.len())
            .map(|i| {
                if upper[i] {
                    (hi[i] - caps[i] as f64 * step).max(lo[i])
                } else {
                    lo[i]
                }
            })
            .collect();
        let units = ((budget - start.iter().sum::<f64>()) / step).round();
        if units < 0.0 || units > caps.iter().sum::<usize>() as f64 {
            return Err(domain(
                "lattice too coarse to meet the budget inside the box",
            ));
        }
        Ok(Lattice {
            lo,
            hi,
            start,
            step,
            units: units as usize,
            caps,
        })
    }

    fn value(&self, i: usize, k: usize) -> f64 {
        (self.start[i] + k as f64 * self.step).clamp(self.lo[i], self.hi[i])
    }

    fn point(&self, k: &[usize]) -> Vec<f64> {
        k.iter()
            .enumerate()
            .map(|(i, &k)| self.value(i, k))
            .collect()
    }

    fn enumerate(&self, objective: &SeparableObjective) -> Result<(Vec<f64>, usize)> {
        let n = self.lo.len();
        if n > GRID_MAX_DIM {
            return Err(domain(format!(
                "grid oracle supports at most {GRID_MAX_DIM} pipes"
            )));
        }
        let points: f64 = self.caps[..n - 1]
            .iter()
            .map(|&c| (c.min(self.units) + 1) as f64)
            .product();
        if points > GRID_POINT_LIMIT {
            return Err(domain(format!("grid of {points:.3e} points is too fine")));
        }
        let mut k = vec![0usize; n];
        let mut best = (f64::INFINITY, self.point(&k));
        let mut evaluations = 0;
        self.walk(
            0,
            self.units,
            &mut k,
            objective,
            &mut best,
            &mut evaluations,
        );
        Ok((best.1, evaluations))
    }

    fn walk(
        &self,
        i: usize,
        left: usize,
        k: &mut [usize],
        objective: &SeparableObjective,
        best: &mut (f64, Vec<f64>),
        evaluations: &mut usize,
    ) {
        let n = k.len();
        if i == n - 1 {
            if left > self.caps[i] {
                return;
            }
            k[i] = left;
            let x = self.point(k);
            let value = objective.value(&x);
            *evaluations += 1;
            if value < best.0 {
                *best = (value, x);
            }
            return;
        }
        for units in 0..=left.min(self.caps[i]) {
            k[i] = units;
            self.walk(i + 1, left - units, k, objective, best, evaluations);
        }
    }

    fn greedy(&self, objective: &SeparableObjective) -> (Vec<f64>, usize) {
        let n = self.lo.len();
        let mut k = vec![0usize; n];
        let mut x: Vec<f64> = self.start.clone();
        let mut evaluations = 0;
        for _ in 0..self.units {
            let mut pick = None;
            let mut best = f64::NEG_INFINITY;
            for i in 0..n {
                if k[i] >= self.caps[i] {
                    continue;
                }
                let now = objective.terms[i].value(x[i]);
                let score = match objective.aggregate {
                    // largest decrease; an infinite current value always wins
                    Aggregate::Sum => {
                        let next = objective.terms[i].value(self.value(i, k[i] + 1));
                        if now.is_infinite() {
                            f64::INFINITY
                        } else {
                            now - next
                        }
                    }
                    // feed the currently worst pipe
                    Aggregate::Max => now,
                };
                evaluations += 1;
                if score > best || pick.is_none() {
                    best = score;
                    pick = Some(i);
                }
            }
            let i = pick.expect("lattice has room for every unit");
            k[i] += 1;
            x[i] = self.value(i, k[i]);
        }
        (x, evaluations)
    }
}

/// Coarse-to-fine enumeration. The last coordinate with the widest range
/// absorbs the budget; the others move on a local window of the current
/// step around the incumbent.
fn refined(
    objective: &SeparableObjective,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
    final_step: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = lo.len();
    if n > GRID_MAX_DIM {
        return Err(domain(format!(
            "refined grid supports at most {GRID_MAX_DIM} pipes"
        )));
    }
    // coarse start: about 40 units along the free budget for small N
    let free = (budget - lo.iter().sum::<f64>()).max(0.0);
    let coarse_units = [0.0, 400.0, 200.0, 60.0, 24.0, 12.0, 8.0][n];
    let coarse = if free > 0.0 {
        free / coarse_units
    } else {
        final_step
    };
    let (mut best, mut evaluations) = match Lattice::new(lo, hi, budget, coarse.max(final_step)) {
        Ok(lattice) => lattice.enumerate(objective)?,
        Err(_) => {
            let mid: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
            (raw_project(&mid, lo, hi, budget), 0)
        }
    };
    let mut best_value = objective.value(&best);
    if n == 1 {
        return Ok((best, evaluations));
    }

    let pivot = (0..n)
        .max_by(|&i, &j| (hi[i] - lo[i]).total_cmp(&(hi[j] - lo[j])))
        .unwrap_or(n - 1);
    let movers: Vec<usize> = (0..n).filter(|&i| i != pivot).collect();
    const RADIUS: i64 = 3;
    let width = (2 * RADIUS + 1) as usize;
    let window = width.pow(movers.len() as u32);

    let mut step = coarse.max(final_step);
    loop {
        step = (step * 0.5).max(final_step);
        // repeat at this step until the incumbent is the window minimum
        loop {
            let mut improved = false;
            let center = best.clone();
            for code in 0..window {
                let mut x = center.clone();
                let mut rest = code;
                let mut shift = 0.0;
                for &i in &movers {
                    let offset = (rest % width) as i64 - RADIUS;
                    rest /= width;
                    x[i] = center[i] + offset as f64 * step;
                    shift += offset as f64 * step;
                }
                x[pivot] = center[pivot] - shift;
                if (0..n).any(|i| x[i] < lo[i] || x[i] > hi[i]) {
                    continue;
                }
                evaluations += 1;
                let value = objective.value(&x);
                if value < best_value {
                    best_value = value;
                    best = x;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if step <= final_step {
            break;
        }
    }
    Ok((best, evaluations))
}

fn descent(
    objective: &SeparableObjective,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
) -> (Vec<f64>, usize) {
    // strictly interior start: lo plus the free budget spread by box width
    let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    let total_width: f64 = widths.iter().sum();
    let free = budget - lo.iter().sum::<f64>();
    let x0: Vec<f64> = lo
        .iter()
        .zip(&widths)
        .map(|(l, w)| {
            if total_width > 0.0 {
                l + free * w / total_width
            } else {
                *l
            }
        })
        .collect();
    let out = projected_descent(
        |x| objective.value(x),
        |x, g| objective.gradient(x, g),
        x0,
        lo,
        hi,
        budget,
        0.0,
        1e-12,
        200_000,
    );
    (out.x, out.iterations)
}
