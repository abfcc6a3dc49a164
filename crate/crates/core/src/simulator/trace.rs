use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-pipe inflow rates evolve over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    /// One fixed rate per pipe.
    Constant { rates: Vec<f64> },
    /// `rates[k]` holds from `switch_times[k - 1]` (or 0) until
    /// `switch_times[k]` (or the end).
    PiecewiseConstant {
        switch_times: Vec<f64>,
        rates: Vec<Vec<f64>>,
    },
    /// Tasks of size `task_size` arrive as a Poisson process per bucket; the
    /// bucket rate is `count * task_size / resolution`.
    PoissonBucketed { rates: Vec<f64>, task_size: f64 },
    /// Alternates `high` for `on_time` and `low` for `off_time`, starting on.
    OnOff {
        high: Vec<f64>,
        low: Vec<f64>,
        on_time: f64,
        off_time: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    #[serde(flatten)]
    pub kind: TraceKind,
    #[serde(default)]
    pub seed: u64,
    pub duration: f64,
    pub resolution: f64,
}

/// Piecewise-constant inflow rates: `rate(step, pipe)` holds on
/// `[step * resolution, (step + 1) * resolution)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    resolution: f64,
    pipes: usize,
    rates: Vec<f64>,
}

impl Trace {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn pipes(&self) -> usize {
        self.pipes
    }

    pub fn steps(&self) -> usize {
        self.rates.len() / self.pipes
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.resolution
    }

    pub fn rate(&self, step: usize, pipe: usize) -> f64 {
        self.rates[step * self.pipes + pipe]
    }

    /// Rates of all pipes during `step`.
    pub fn row(&self, step: usize) -> &[f64] {
        &self.rates[step * self.pipes..(step + 1) * self.pipes]
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Trace(msg.into())
}

fn check_rates(rates: &[f64], what: &str) -> Result<()> {
    if rates.is_empty() {
        return Err(bad(format!("{what}: no pipes")));
    }
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(bad(format!("{what}: rate {r} must be nonnegative")));
    }
    Ok(())
}

impl TraceSpec {
    pub fn pipes(&self) -> usize {
        match &self.kind {
            TraceKind::Constant { rates } | TraceKind::PoissonBucketed { rates, .. } => rates.len(),
            TraceKind::PiecewiseConstant { rates, .. } => rates.first().map_or(0, Vec::len),
            TraceKind::OnOff { high, .. } => high.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(bad(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.resolution.is_finite()
            && self.resolution > 0.0
            && self.resolution <= self.duration)
        {
            return Err(bad(format!(
                "resolution must lie in (0, duration], got {}",
                self.resolution
            )));
        }
        match &self.kind {
            TraceKind::Constant { rates } => check_rates(rates, "constant"),
            TraceKind::PiecewiseConstant {
                switch_times,
                rates,
            } => {
                if rates.len() != switch_times.len() + 1 {
                    return Err(bad("piecewise: need one more rate row than switch times"));
                }
                let n = rates[0].len();
                for row in rates {
                    check_rates(row, "piecewise")?;
                    if row.len() != n {
                        return Err(bad("piecewise: rate rows of different length"));
                    }
                }
                if switch_times.windows(2).any(|w| w[0] >= w[1])
                    || switch_times.iter().any(|t| !(t.is_finite() && *t > 0.0))
                {
                    return Err(bad(
                        "piecewise: switch times must be positive and increasing",
                    ));
                }
                Ok(())
            }
            TraceKind::PoissonBucketed { rates, task_size } => {
                check_rates(rates, "poisson")?;
                if !(task_size.is_finite() && *task_size > 0.0) {
                    return Err(bad(format!(
                        "poisson: task size must be positive, got {task_size}"
                    )));
                }
                Ok(())
            }
            TraceKind::OnOff {
                high,
                low,
                on_time,
                off_time,
            } => {
                check_rates(high, "on-off high")?;
                check_rates(low, "on-off low")?;
                if high.len() != low.len() {
                    return Err(bad("on-off: high and low of different length"));
                }
                if !(on_time.is_finite()
                    && *on_time > 0.0
                    && off_time.is_finite()
                    && *off_time > 0.0)
                {
                    return Err(bad("on-off: on and off times must be positive"));
                }
                Ok(())
            }
        }
    }

    fn step_count(&self) -> usize {
        let ratio = self.duration / self.resolution;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// Same spec and seed always give the same table.
pub fn generate_trace(spec: &TraceSpec) -> Result<Trace> {
    spec.validate()?;
    let steps = spec.step_count();
    let pipes = spec.pipes();
    let dt = spec.resolution;
    // bucket start time, nudged so that k * dt lands on the right side of a switch
    let start = |k: usize| k as f64 * dt + 1e-9 * dt;
    let mut rates = Vec::with_capacity(steps * pipes);
    match &spec.kind {
        TraceKind::Constant { rates: r } => {
            for _ in 0..steps {
                rates.extend_from_slice(r);
            }
        }
        TraceKind::PiecewiseConstant {
            switch_times,
            rates: rows,
        } => {
            for k in 0..steps {
                let segment = switch_times.partition_point(|&s| s <= start(k));
                rates.extend_from_slice(&rows[segment]);
            }
        }
        TraceKind::PoissonBucketed {
            rates: r,
            task_size,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let draws: Vec<Option<Poisson<f64>>> = r
                .iter()
                .map(|&rate| {
                    let mean = rate * dt / task_size;
                    (mean > 0.0).then(|| Poisson::new(mean).expect("positive finite mean"))
                })
                .collect();
            for _ in 0..steps {
                for draw in &draws {
                    let count = draw.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                    rates.push(count * task_size / dt);
                }
            }
        }
        TraceKind::OnOff {
            high,
            low,
            on_time,
            off_time,
        } => {
            let period = on_time + off_time;
            for k in 0..steps {
                let phase = start(k) % period;
                rates.extend_from_slice(if phase < *on_time { high } else { low });
            }
        }
    }
    Ok(Trace {
        resolution: dt,
        pipes,
        rates,
    })
}
