//! Local fluid predictions for a single pipe.
//!
//! Over a horizon of length `t_upd` the arrival intensity `a` of a pipe is
//! frozen and the pipe is served at constant capacity `w`. The queue then
//! follows the line `s(t) = b + (a - w) t`, clamped to `[0, m]`, and the
//! delay follows `d(t) = ((a - w) / w) t + b / w`, clamped to `[0, m / w]`.
//!
//! Depending on `w` the trajectory falls into one of three cases:
//!
//! | case        | condition             | what happens                          |
//! |-------------|-----------------------|---------------------------------------|
//! | `Overfills` | `w < w_star`          | queue reaches `m` before `t_upd`, drops |
//! | `Confined`  | `w_star <= w <= w_prime` | queue stays inside `[0, m]`        |
//! | `Nullifies` | `w > w_prime`         | queue empties before `t_upd`          |
//!
//! with `w_star = a - (m - b) / t_upd` and `w_prime = a + b / t_upd`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Local parameters of one queue at decision time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeState {
    /// Arrival intensity, as a fraction of the unit processor.
    pub a: f64,
    /// Backlog at the start of the horizon.
    pub b: f64,
}

impl PipeState {
    pub fn new(a: f64, b: f64) -> Self {
        PipeState { a, b }
    }
}

/// N pipes sharing one unit-capacity processor, with a common horizon and
/// buffer size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pipes: Vec<PipeState>,
    t_upd: f64,
    m: f64,
}

impl SystemState {
    pub fn new(pipes: Vec<PipeState>, t_upd: f64, m: f64) -> Result<Self> {
        if pipes.is_empty() {
            return Err(domain("a system needs at least one pipe"));
        }
        check_horizon(t_upd, m)?;
        for (i, pipe) in pipes.iter().enumerate() {
            check_pipe(pipe, m).map_err(|e| match e {
                crate::Error::Domain(msg) => domain(format!("pipe {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(SystemState { pipes, t_upd, m })
    }

    pub fn pipes(&self) -> &[PipeState] {
        &self.pipes
    }

    pub fn len(&self) -> usize {
        self.pipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pipes.is_empty()
    }

    pub fn t_upd(&self) -> f64 {
        self.t_upd
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Total arrival intensity `A`.
    pub fn total_intensity(&self) -> f64 {
        self.pipes.iter().map(|p| p.a).sum()
    }

    /// Total backlog `B`.
    pub fn total_backlog(&self) -> f64 {
        self.pipes.iter().map(|p| p.b).sum()
    }
}

/// A capacity vector on the standard simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    w: Vec<f64>,
}

/// Tolerance on `sum(w) == 1` for [`Allocation`].
pub const SIMPLEX_TOL: f64 = 1e-9;

impl Allocation {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(domain("empty allocation"));
        }
        if let Some(i) = w.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(domain(format!("allocation component {i} is {}", w[i])));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(domain(format!("allocation sums to {total}, expected 1")));
        }
        Ok(Allocation { w })
    }

    /// The equal split `1/N` per pipe.
    pub fn equal(n: usize) -> Self {
        assert!(n > 0, "equal split of zero pipes");
        Allocation {
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Which of the three trajectory shapes a pipe follows under a given `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorCase {
    Overfills,
    Confined,
    Nullifies,
}

/// Everything the model predicts for one pipe under one capacity share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipePrediction {
    pub case: BehaviorCase,
    pub w_star: f64,
    pub w_prime: f64,
    pub mean_delay: f64,
    pub dropped: f64,
    /// Time where the queue hits `m` (`Overfills`) or `0` (`Nullifies`).
    pub crossing_time: Option<f64>,
}

fn check_horizon(t_upd: f64, m: f64) -> Result<()> {
    if !(t_upd.is_finite() && t_upd > 0.0) {
        return Err(domain(format!("t_upd must be positive, got {t_upd}")));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(domain(format!("buffer size must be positive, got {m}")));
    }
    Ok(())
}

fn check_pipe(pipe: &PipeState, m: f64) -> Result<()> {
    if !(pipe.a.is_finite() && (0.0..=1.0).contains(&pipe.a)) {
        return Err(domain(format!(
            "intensity must lie in [0, 1], got {}",
            pipe.a
        )));
    }
    if !(pipe.b.is_finite() && pipe.b >= 0.0 && pipe.b <= m) {
        return Err(domain(format!(
            "backlog must lie in [0, {m}], got {}",
            pipe.b
        )));
    }
    Ok(())
}

fn check_all(pipe: &PipeState, t_upd: f64, m: f64) -> Result<()> {
    check_horizon(t_upd, m)?;
    check_pipe(pipe, m)
}

fn check_share(w: f64) -> Result<()> {
    if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
        return Err(domain(format!(
            "capacity share must lie in [0, 1], got {w}"
        )));
    }
    Ok(())
}

/// Case thresholds `(w_star, w_prime)` of a pipe.
///
/// `w_star` may be negative, which marks a pipe that cannot overfill.
pub fn thresholds(pipe: &PipeState, t_upd: f64, m: f64) -> Result<(f64, f64)> {
    check_all(pipe, t_upd, m)?;
    Ok(raw_thresholds(pipe, t_upd, m))
}

pub(crate) fn raw_thresholds(pipe: &PipeState, t_upd: f64, m: f64) -> (f64, f64) {
    (pipe.a - (m - pipe.b) / t_upd, pipe.a + pipe.b / t_upd)
}

/// Both thresholds are inclusive on the `Confined` side.
pub fn classify(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> Result<BehaviorCase> {
    check_all(pipe, t_upd, m)?;
    check_share(w)?;
    Ok(raw_classify(pipe, w, t_upd, m))
}

fn raw_classify(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> BehaviorCase {
    let (w_star, w_prime) = raw_thresholds(pipe, t_upd, m);
    if w < w_star {
        BehaviorCase::Overfills
    } else if w > w_prime {
        BehaviorCase::Nullifies
    } else {
        BehaviorCase::Confined
    }
}

/// Forecast queue size `clamp(b + (a - w) t, 0, m)` at time `t`.
pub fn predicted_queue_size(pipe: &PipeState, w: f64, t: f64, t_upd: f64, m: f64) -> Result<f64> {
    check_all(pipe, t_upd, m)?;
    check_share(w)?;
    check_time(t, t_upd)?;
    Ok((pipe.b + (pipe.a - w) * t).clamp(0.0, m))
}

/// Forecast delay `D(t)`: the core line `d(t)` clamped to `[0, m / w]`.
///
/// Infinite for `w = 0` unless the queue is empty at `t`.
pub fn predicted_delay(pipe: &PipeState, w: f64, t: f64, t_upd: f64, m: f64) -> Result<f64> {
    let size = predicted_queue_size(pipe, w, t, t_upd, m)?;
    if size == 0.0 {
        return Ok(0.0);
    }
    if w == 0.0 {
        return Ok(f64::INFINITY);
    }
    let core = (pipe.a - w) / w * t + pipe.b / w;
    Ok(core.clamp(0.0, m / w))
}

fn check_time(t: f64, t_upd: f64) -> Result<()> {
    if !(t.is_finite() && (0.0..=t_upd).contains(&t)) {
        return Err(domain(format!("time {t} outside the horizon [0, {t_upd}]")));
    }
    Ok(())
}

/// Time-average of the forecast delay over `[0, t_upd]`.
///
/// Returns `f64::INFINITY` when `w = 0` and the pipe has work or arrivals;
/// an idle pipe (`a = b = 0`) has zero delay regardless of `w`.
pub fn mean_local_delay(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> Result<f64> {
    check_all(pipe, t_upd, m)?;
    check_share(w)?;
    Ok(raw_mean_delay(pipe, w, t_upd, m))
}

fn raw_mean_delay(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> f64 {
    let PipeState { a, b } = *pipe;
    if w == 0.0 {
        return if a == 0.0 && b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    match raw_classify(pipe, w, t_upd, m) {
        BehaviorCase::Overfills => m / w - (m - b).powi(2) / (2.0 * w * (a - w) * t_upd),
        BehaviorCase::Confined => ((a * t_upd / 2.0 + b) / w - t_upd / 2.0).max(0.0),
        BehaviorCase::Nullifies => b * b / (2.0 * w * (w - a) * t_upd),
    }
}

/// Dropped volume over the horizon, in the model's own accounting: the
/// time integral of the cumulative overflow `(a - w)(t - t_star)` after the
/// buffer saturates, i.e. `(a - w)(t_upd - t_star)^2 / 2`.
///
/// This is the factored form of
/// `t_upd^2 (a - w) / 2 + (m - b)^2 / (2 (a - w)) - (m - b) t_upd`;
/// the factored form avoids cancellation near `w = w_star`.
pub fn dropped_volume(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> Result<f64> {
    check_all(pipe, t_upd, m)?;
    check_share(w)?;
    Ok(raw_dropped(pipe, w, t_upd, m))
}

fn raw_dropped(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> f64 {
    match raw_classify(pipe, w, t_upd, m) {
        BehaviorCase::Overfills => {
            let rate = pipe.a - w;
            let window = t_upd - (m - pipe.b) / rate;
            rate * window * window / 2.0
        }
        _ => 0.0,
    }
}

/// Overflow volume at the constant excess rate `(a - w)` after saturation,
/// `(a - w)(t_upd - t_star)`. This is the volume that a conserving queue
/// actually loses; [`dropped_volume`] is the model's own figure.
pub fn dropped_volume_constant_rate(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> Result<f64> {
    check_all(pipe, t_upd, m)?;
    check_share(w)?;
    Ok(match raw_classify(pipe, w, t_upd, m) {
        BehaviorCase::Overfills => {
            let rate = pipe.a - w;
            rate * t_upd - (m - pipe.b)
        }
        _ => 0.0,
    })
}

/// Full prediction for one pipe under capacity `w`.
pub fn predict(pipe: &PipeState, w: f64, t_upd: f64, m: f64) -> Result<PipePrediction> {
    check_all(pipe, t_upd, m)?;
    check_share(w)?;
    let (w_star, w_prime) = raw_thresholds(pipe, t_upd, m);
    let case = raw_classify(pipe, w, t_upd, m);
    let crossing_time = match case {
        BehaviorCase::Overfills => Some((m - pipe.b) / (pipe.a - w)),
        BehaviorCase::Confined => None,
        BehaviorCase::Nullifies => Some(pipe.b / (w - pipe.a)),
    };
    Ok(PipePrediction {
        case,
        w_star,
        w_prime,
        mean_delay: raw_mean_delay(pipe, w, t_upd, m),
        dropped: raw_dropped(pipe, w, t_upd, m),
        crossing_time,
    })
}
