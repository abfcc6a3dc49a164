//! Exact minimization of `sum(c_i / x_i)` over a box cut by a hyperplane.
//!
//! The objective is strictly convex, so the minimizer is unique. If the
//! unconstrained minimizer `v` lies in the box it is the answer. Otherwise
//! the minimizer lies on one of the faces `x_i = bound` whose constraint `v`
//! violates. Each such face is the same problem in one dimension less with
//! the budget reduced by the fixed coordinate, so we recurse and keep the
//! best face.
//!
//! Different recursion orders reach the same face (the same set of fixed
//! coordinates), so subproblems are memoized by their fixed set.

use std::collections::HashMap;

use super::{
    check_budget, raw_simplex_minimum, BoundSide, Face, SolveResult, SumDelayProblem, FACE_SLACK,
};
use crate::error::{domain, Result};

pub fn solve_sum_mean_delay(problem: &SumDelayProblem) -> Result<SolveResult> {
    problem.check_nonempty()?;
    let mut search = FaceSearch {
        problem,
        memo: HashMap::new(),
        nodes: 0,
    };
    let node = search
        .solve(&[])
        .ok_or_else(|| domain("face search found no feasible face"))?;
    Ok(SolveResult {
        objective: problem.objective(&node.w),
        w: node.w,
        fixed_faces: node.faces,
        nodes_visited: search.nodes,
    })
}

#[derive(Clone)]
struct Node {
    w: Vec<f64>,
    objective: f64,
    faces: Vec<Face>,
}

struct FaceSearch<'a> {
    problem: &'a SumDelayProblem,
    memo: HashMap<Vec<Face>, Option<Node>>,
    nodes: usize,
}

impl FaceSearch<'_> {
    fn bound(&self, face: Face) -> f64 {
        let b = self.problem.bounds();
        match face.side {
            BoundSide::Lower => b.lo[face.pipe],
            BoundSide::Upper => b.hi[face.pipe],
        }
    }

    /// Minimum over the face where every coordinate in `fixed` (sorted by
    /// pipe) sits at its bound.
    fn solve(&mut self, fixed: &[Face]) -> Option<Node> {
        if let Some(hit) = self.memo.get(fixed) {
            return hit.clone();
        }
        let result = self.evaluate(fixed);
        self.memo.insert(fixed.to_vec(), result.clone());
        result
    }

    fn evaluate(&mut self, fixed: &[Face]) -> Option<Node> {
        let p = self.problem;
        let (lo, hi) = (&p.bounds().lo, &p.bounds().hi);
        let n = p.len();

        let mut w = vec![0.0; n];
        let mut is_fixed = vec![false; n];
        let mut budget = p.budget();
        for &face in fixed {
            let value = self.bound(face);
            w[face.pipe] = value;
            is_fixed[face.pipe] = true;
            budget -= value;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();

        match free.len() {
            0 => {
                return (budget.abs() <= FACE_SLACK).then(|| self.leaf(w, fixed));
            }
            1 => {
                // the remaining coordinate is forced
                let i = free[0];
                if budget < lo[i] - FACE_SLACK || budget > hi[i] + FACE_SLACK {
                    return None;
                }
                w[i] = budget;
                return Some(self.leaf(w, fixed));
            }
            _ => {}
        }

        self.nodes += 1;
        let v = raw_simplex_minimum(free.iter().map(|&i| p.c()[i]), budget);
        let mut violated = Vec::new();
        for (&i, &vi) in free.iter().zip(&v) {
            if vi < lo[i] - FACE_SLACK {
                violated.push(Face {
                    pipe: i,
                    side: BoundSide::Lower,
                });
            } else if vi > hi[i] + FACE_SLACK {
                violated.push(Face {
                    pipe: i,
                    side: BoundSide::Upper,
                });
            }
        }
        if violated.is_empty() {
            for (&i, &vi) in free.iter().zip(&v) {
                w[i] = vi;
            }
            return Some(self.leaf(w, fixed));
        }

        let mut best: Option<Node> = None;
        for face in violated {
            let value = self.bound(face);
            let rest = budget - value;
            // a zero coordinate, or one that takes the whole budget from the
            // others, gives an infinite objective
            if value <= 0.0 || rest <= 0.0 {
                continue;
            }
            let others = free.iter().copied().filter(|&j| j != face.pipe);
            let rest_lo: Vec<f64> = others.clone().map(|j| lo[j]).collect();
            let rest_hi: Vec<f64> = others.map(|j| hi[j]).collect();
            if check_budget(&rest_lo, &rest_hi, rest).is_err() {
                continue;
            }
            let mut child_key = fixed.to_vec();
            let pos = child_key.partition_point(|f| f.pipe < face.pipe);
            child_key.insert(pos, face);
            if let Some(node) = self.solve(&child_key) {
                if best.as_ref().is_none_or(|b| node.objective < b.objective) {
                    best = Some(node);
                }
            }
        }
        best
    }

    fn leaf(&self, w: Vec<f64>, fixed: &[Face]) -> Node {
        Node {
            objective: self.problem.objective(&w),
            w,
            faces: fixed.to_vec(),
        }
    }
}
