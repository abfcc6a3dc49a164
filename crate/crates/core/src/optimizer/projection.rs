//! Euclidean projection onto `{lo <= x <= hi, sum(x) = budget}` and a
//! projected-gradient descent driver built on it.

use super::check_budget;
use crate::error::Result;

/// Projects `y` onto the box cut by the budget hyperplane.
///
/// The projection is `x_i = clamp(y_i - tau, lo_i, hi_i)` for the shift
/// `tau` that meets the budget. `tau` is bracketed by bisection, then solved
/// exactly on the active set found there.
pub fn project_onto_box_budget(y: &[f64], lo: &[f64], hi: &[f64], budget: f64) -> Result<Vec<f64>> {
    check_budget(lo, hi, budget)?;
    Ok(raw_project(y, lo, hi, budget))
}

pub(crate) fn raw_project(y: &[f64], lo: &[f64], hi: &[f64], budget: f64) -> Vec<f64> {
    let n = y.len();
    let shifted = |tau: f64| -> f64 { (0..n).map(|i| (y[i] - tau).clamp(lo[i], hi[i])).sum() };
    // sum is nonincreasing in tau
    let mut t_lo = (0..n).map(|i| y[i] - hi[i]).fold(f64::INFINITY, f64::min);
    let mut t_hi = (0..n)
        .map(|i| y[i] - lo[i])
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (t_lo + t_hi);
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        if shifted(mid) > budget {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    let tau = 0.5 * (t_lo + t_hi);

    // exact solve with the active set at tau
    let mut free_sum = 0.0;
    let mut clamped = 0.0;
    let mut free = 0usize;
    for i in 0..n {
        let v = y[i] - tau;
        if v <= lo[i] {
            clamped += lo[i];
        } else if v >= hi[i] {
            clamped += hi[i];
        } else {
            free_sum += y[i];
            free += 1;
        }
    }
    let tau = if free > 0 {
        (free_sum + clamped - budget) / free as f64
    } else {
        tau
    };
    (0..n).map(|i| (y[i] - tau).clamp(lo[i], hi[i])).collect()
}

/// `|| P(x - grad) - x ||_2`, zero exactly at stationary points.
pub fn projected_gradient_norm(
    x: &[f64],
    grad: &[f64],
    lo: &[f64],
    hi: &[f64],
    budget: f64,
) -> f64 {
    let y: Vec<f64> = x.iter().zip(grad).map(|(x, g)| x - g).collect();
    let p = raw_project(&y, lo, hi, budget);
    p.iter()
        .zip(x)
        .map(|(p, x)| (p - x) * (p - x))
        .sum::<f64>()
        .sqrt()
}

pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    #[allow(dead_code)]
    pub value: f64,
    pub iterations: usize,
}

/// Projected gradient descent with Barzilai-Borwein steps and an Armijo
/// backtracking safeguard. `x0` must be feasible with a finite value.
///
/// Stops when the projected-gradient norm drops below `pg_tol`, when an
/// accepted step moves less than `step_tol`, or after `max_iter`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn projected_descent(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64], &mut [f64]),
    x0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
    pg_tol: f64,
    step_tol: f64,
    max_iter: usize,
) -> DescentOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = vec![0.0; n];
    grad(&x, &mut g);
    let mut step = 1.0 / g.iter().map(|v| v.abs()).fold(1e-12, f64::max);
    let mut iterations = 0;
    let mut g_new = vec![0.0; n];

    while iterations < max_iter {
        iterations += 1;
        if projected_gradient_norm(&x, &g, lo, hi, budget) < pg_tol {
            break;
        }
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..80 {
            let y: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x - trial_step * g).collect();
            let cand = raw_project(&y, lo, hi, budget);
            let fc = f(&cand);
            let decrease: f64 = g
                .iter()
                .zip(cand.iter().zip(&x))
                .map(|(g, (c, x))| g * (c - x))
                .sum();
            if fc.is_finite() && fc <= fx + 1e-4 * decrease {
                accepted = Some((cand, fc));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };

        let moved: f64 = cand
            .iter()
            .zip(&x)
            .map(|(c, x)| (c - x) * (c - x))
            .sum::<f64>()
            .sqrt();
        grad(&cand, &mut g_new);
        // Barzilai-Borwein step for the next iteration
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let s = cand[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 { ss / sy } else { trial_step * 2.0 };
        x = cand;
        fx = fc;
        std::mem::swap(&mut g, &mut g_new);
        if moved < step_tol {
            break;
        }
    }
    DescentOutcome {
        x,
        value: fx,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_identity_on_feasible_points() {
        let x = [0.2, 0.3, 0.5];
        let p = project_onto_box_budget(&x, &[0.0; 3], &[1.0; 3], 1.0).unwrap();
        for (a, b) in p.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_respects_bounds_and_budget() {
        let p = project_onto_box_budget(&[2.0, -1.0, 0.4], &[0.1, 0.1, 0.1], &[0.6, 0.6, 0.6], 1.0)
            .unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[0], 0.6);
        assert_eq!(p[1], 0.1);
        assert!((p[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn descent_finds_simplex_minimum() {
        let c = [1.0, 4.0];
        let out = projected_descent(
            |x| c.iter().zip(x).map(|(c, x)| c / x).sum(),
            |x, g| {
                for i in 0..2 {
                    g[i] = -c[i] / (x[i] * x[i]);
                }
            },
            vec![0.5, 0.5],
            &[0.0, 0.0],
            &[1.0, 1.0],
            1.0,
            1e-13,
            0.0,
            10_000,
        );
        assert!((out.x[0] - 1.0 / 3.0).abs() < 1e-10, "{:?}", out.x);
        assert!((out.value - 9.0).abs() < 1e-12);
    }
}
