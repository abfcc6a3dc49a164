//! Epoch-based policy evaluation on arrival traces.
//!
//! Every `t_upd` the simulator estimates intensities, asks the policy for an
//! allocation, records what the fluid model predicts for the epoch, then
//! integrates the clamped queue dynamics over the trace. Rates are constant
//! within a trace step, so each step is integrated in closed form: the
//! queue is linear in time except where it hits `0` or `m` inside the step.

mod policy;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid_model::{dropped_volume_constant_rate, predict, PipeState, SystemState};

pub use policy::{Decision, Policy};
pub use trace::{generate_trace, Trace, TraceKind, TraceSpec};

/// One pipe over one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeEpoch {
    pub predicted_delay: f64,
    /// Model figure: time integral of the cumulative overflow.
    pub predicted_drops_model: f64,
    /// Overflow volume at the constant excess rate.
    pub predicted_drops_constant: f64,
    pub realized_delay: f64,
    /// Volume actually lost to overflow.
    pub realized_drops: f64,
    /// Realized counterpart of `predicted_drops_model`.
    pub realized_drops_model: f64,
    pub inflow: f64,
    pub served: f64,
    pub initial_backlog: f64,
    pub final_backlog: f64,
    /// Backlog at every step boundary of the epoch, both ends included.
    pub trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub allocation: Vec<f64>,
    pub fallback: bool,
    /// Intensities the decision and the predictions used.
    pub intensity_estimate: Vec<f64>,
    pub pipes: Vec<PipeEpoch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub policy: String,
    pub epochs: Vec<EpochReport>,
}

impl SimulationRun {
    /// Realized mean delays summed over pipes and epochs.
    pub fn sum_mean_delay(&self) -> f64 {
        self.epochs
            .iter()
            .flat_map(|e| e.pipes.iter().map(|p| p.realized_delay))
            .sum()
    }

    pub fn total_drops(&self) -> f64 {
        self.epochs
            .iter()
            .flat_map(|e| e.pipes.iter().map(|p| p.realized_drops))
            .sum()
    }

    /// Predicted sum of mean delays for the first epoch.
    pub fn first_predicted_sum(&self) -> f64 {
        self.epochs
            .first()
            .map_or(0.0, |e| e.pipes.iter().map(|p| p.predicted_delay).sum())
    }

    pub fn fallbacks(&self) -> usize {
        self.epochs.iter().filter(|e| e.fallback).count()
    }
}

/// Runs `epochs` update periods of `policy` starting from `initial`.
///
/// The first epoch uses the declared intensities of `initial`; later epochs
/// use the empirical mean rate of the previous epoch.
pub fn run_simulation(
    initial: &SystemState,
    trace: &Trace,
    policy: &Policy,
    epochs: usize,
) -> Result<SimulationRun> {
    let n = initial.len();
    let (t_upd, m) = (initial.t_upd(), initial.m());
    let dt = trace.resolution();
    if trace.pipes() != n {
        return Err(Error::Trace(format!(
            "trace has {} pipes, state has {n}",
            trace.pipes()
        )));
    }
    if dt > t_upd / 10.0 * (1.0 + 1e-12) {
        return Err(Error::Trace(format!(
            "resolution {dt} exceeds t_upd / 10 = {}",
            t_upd / 10.0
        )));
    }
    let ratio = t_upd / dt;
    let steps_per_epoch = ratio.round() as usize;
    if (ratio - steps_per_epoch as f64).abs() > 1e-9 * ratio {
        return Err(Error::Trace(format!(
            "t_upd {t_upd} is not a whole number of trace steps of {dt}"
        )));
    }
    if epochs * steps_per_epoch > trace.steps() {
        return Err(Error::Trace(format!(
            "{epochs} epochs need {} time units, trace covers {}",
            epochs as f64 * t_upd,
            trace.duration()
        )));
    }

    let mut backlog: Vec<f64> = initial.pipes().iter().map(|p| p.b).collect();
    let mut estimate: Vec<f64> = initial.pipes().iter().map(|p| p.a).collect();
    let mut reports = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let observed = policy::observed_state(&estimate, &backlog, t_upd, m)?;
        let Decision {
            allocation,
            fallback,
        } = policy.decide(&observed);
        let w = allocation.as_slice();

        let first_step = epoch * steps_per_epoch;
        let mut pipes = Vec::with_capacity(n);
        let mut next_estimate = Vec::with_capacity(n);
        for i in 0..n {
            let pipe = observed.pipes()[i];
            let prediction = predict(&pipe, w[i], t_upd, m)?;
            let mut acc = Accumulator::new(backlog[i], steps_per_epoch);
            for step in first_step..first_step + steps_per_epoch {
                acc.advance(trace.rate(step, i), w[i], dt, m);
            }
            next_estimate.push(acc.inflow / t_upd);
            backlog[i] = acc.queue;
            pipes.push(acc.finish(
                &pipe,
                w[i],
                t_upd,
                m,
                prediction.mean_delay,
                prediction.dropped,
            )?);
        }
        reports.push(EpochReport {
            epoch,
            allocation: w.to_vec(),
            fallback,
            intensity_estimate: observed.pipes().iter().map(|p| p.a).collect(),
            pipes,
        });
        estimate = next_estimate;
    }

    Ok(SimulationRun {
        policy: policy.name(),
        epochs: reports,
    })
}

/// Exact integrals of one pipe's fluid queue over one epoch.
struct Accumulator {
    initial: f64,
    queue: f64,
    inflow: f64,
    served: f64,
    dropped: f64,
    /// Integral of the queue over time.
    queue_area: f64,
    /// Integral of the cumulative dropped volume over time.
    dropped_area: f64,
    trajectory: Vec<f64>,
}

impl Accumulator {
    fn new(queue: f64, steps: usize) -> Self {
        let mut trajectory = Vec::with_capacity(steps + 1);
        trajectory.push(queue);
        Accumulator {
            initial: queue,
            queue,
            inflow: 0.0,
            served: 0.0,
            dropped: 0.0,
            queue_area: 0.0,
            dropped_area: 0.0,
            trajectory,
        }
    }

    /// One step of length `dt` at inflow `rate` and capacity `w`.
    fn advance(&mut self, rate: f64, w: f64, dt: f64, m: f64) {
        let q0 = self.queue;
        let net = rate - w;
        let (q1, area, served, dropped, saturated_for) = if net > 0.0 {
            let unclamped = q0 + net * dt;
            if unclamped <= m {
                (unclamped, 0.5 * (q0 + unclamped) * dt, w * dt, 0.0, 0.0)
            } else {
                let fill = ((m - q0) / net).clamp(0.0, dt);
                let rest = dt - fill;
                (
                    m,
                    0.5 * (q0 + m) * fill + m * rest,
                    w * dt,
                    net * rest,
                    rest,
                )
            }
        } else if net < 0.0 {
            let unclamped = q0 + net * dt;
            if unclamped >= 0.0 {
                (unclamped, 0.5 * (q0 + unclamped) * dt, w * dt, 0.0, 0.0)
            } else {
                let drain = (q0 / -net).clamp(0.0, dt);
                // once empty the server passes arrivals straight through
                (0.0, 0.5 * q0 * drain, q0 + rate * dt, 0.0, 0.0)
            }
        } else {
            (q0, q0 * dt, w * dt, 0.0, 0.0)
        };
        self.dropped_area += self.dropped * dt + 0.5 * net.max(0.0) * saturated_for * saturated_for;
        self.queue = q1;
        self.inflow += rate * dt;
        self.served += served;
        self.dropped += dropped;
        self.queue_area += area;
        self.trajectory.push(q1);
    }

    fn finish(
        self,
        pipe: &PipeState,
        w: f64,
        t_upd: f64,
        m: f64,
        predicted_delay: f64,
        predicted_drops_model: f64,
    ) -> Result<PipeEpoch> {
        let realized_delay = if self.queue_area == 0.0 {
            0.0
        } else if w == 0.0 {
            f64::INFINITY
        } else {
            self.queue_area / w / t_upd
        };
        Ok(PipeEpoch {
            predicted_delay,
            predicted_drops_model,
            predicted_drops_constant: dropped_volume_constant_rate(pipe, w, t_upd, m)?,
            realized_delay,
            realized_drops: self.dropped,
            realized_drops_model: self.dropped_area,
            inflow: self.inflow,
            served: self.served,
            initial_backlog: self.initial,
            final_backlog: self.queue,
            trajectory: self.trajectory,
        })
    }
}

/// Aggregates of one policy on a shared trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub sum_mean_delay: f64,
    pub total_drops: f64,
    pub first_predicted_sum: f64,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub summaries: Vec<PolicySummary>,
    pub runs: Vec<SimulationRun>,
}

/// Runs every policy on the same trace.
pub fn compare_policies(
    initial: &SystemState,
    trace: &Trace,
    policies: &[Policy],
    epochs: usize,
) -> Result<Comparison> {
    let runs = policies
        .iter()
        .map(|p| run_simulation(initial, trace, p, epochs))
        .collect::<Result<Vec<_>>>()?;
    let summaries = runs
        .iter()
        .map(|r| PolicySummary {
            policy: r.policy.clone(),
            sum_mean_delay: r.sum_mean_delay(),
            total_drops: r.total_drops(),
            first_predicted_sum: r.first_predicted_sum(),
            fallbacks: r.fallbacks(),
        })
        .collect();
    Ok(Comparison { summaries, runs })
}
