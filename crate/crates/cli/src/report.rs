//! Report documents. JSON layouts are described by the schemas under
//! `schemas/`; bump [`SCHEMA_VERSION`] when a field changes meaning.

use std::io::Write;

use fluidsched::optimizer::{BoundSide, Face, KktReport, SolveResult};
use fluidsched::simulator::{PolicySummary, SimulationRun};
use fluidsched::{FeasibleBox, StateClass};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub schema_version: u32,
    pub total_intensity: f64,
    pub total_backlog: f64,
    /// `A + B / t_upd`.
    pub nullifying_total: f64,
    pub criteria: Criteria,
    pub steady: bool,
    pub nodrop_pipes: Vec<usize>,
    pub feasible_box: BoxReport,
    /// Whether the box meets the unit budget.
    pub polytope_nonempty: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Criteria {
    pub decomposable: bool,
    pub avoidable: bool,
    pub nonincreasable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxReport {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ClassifyReport {
    pub fn new(class: &StateClass, bounds: &FeasibleBox, t_upd: f64) -> Self {
        ClassifyReport {
            schema_version: SCHEMA_VERSION,
            total_intensity: class.total_intensity,
            total_backlog: class.total_backlog,
            nullifying_total: class.total_intensity + class.total_backlog / t_upd,
            criteria: Criteria {
                decomposable: class.decomposable,
                avoidable: class.avoidable,
                nonincreasable: class.nonincreasable,
            },
            steady: class.steady,
            nodrop_pipes: class.nodrop_pipes.clone(),
            feasible_box: BoxReport {
                lo: bounds.lo.clone(),
                hi: bounds.hi.clone(),
            },
            polytope_nonempty: bounds.meets_budget(1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub problem: String,
    pub w: Vec<f64>,
    pub objective: f64,
    pub active_faces: Vec<FaceReport>,
    pub nodes_visited: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaceReport {
    pub pipe: usize,
    pub side: &'static str,
}

impl From<&Face> for FaceReport {
    fn from(f: &Face) -> Self {
        FaceReport {
            pipe: f.pipe,
            side: match f.side {
                BoundSide::Lower => "lower",
                BoundSide::Upper => "upper",
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub oracle: String,
    pub oracle_objective: f64,
    /// Oracle objective minus solver objective.
    pub objective_delta: f64,
    /// Largest coordinate difference between the two allocations.
    pub max_w_delta: f64,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// `kkt`, `level_equalization` or `stationarity`.
    pub kind: &'static str,
    pub satisfied: bool,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    /// Projected-gradient norm, for the stationarity certificate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl Certificate {
    pub fn from_kkt(kind: &'static str, report: KktReport, tolerance: f64) -> Self {
        Certificate {
            kind,
            satisfied: report.satisfied,
            tolerance,
            multiplier: report.multiplier,
            residual: None,
            diagnostic: report.diagnostic,
        }
    }
}

impl SolveReport {
    pub fn new(problem: &str, result: &SolveResult) -> Self {
        SolveReport {
            schema_version: SCHEMA_VERSION,
            problem: problem.to_string(),
            w: result.w.clone(),
            objective: result.objective,
            active_faces: result.fixed_faces.iter().map(FaceReport::from).collect(),
            nodes_visited: result.nodes_visited,
            verify: None,
        }
    }
}

/// One row of an epoch report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub pipe: usize,
    pub policy: String,
    pub w: f64,
    pub predicted_delay: f64,
    pub realized_delay: f64,
    /// The model's own drop figure, see `fluid_model::dropped_volume`.
    pub predicted_drops_paper: f64,
    /// Volume actually lost at the buffer limit.
    pub realized_drops: f64,
    pub fallback_flag: u8,
}

pub fn epoch_rows(run: &SimulationRun) -> Vec<EpochRow> {
    let mut rows = Vec::new();
    for e in &run.epochs {
        for (i, p) in e.pipes.iter().enumerate() {
            rows.push(EpochRow {
                epoch: e.epoch,
                pipe: i,
                policy: run.policy.clone(),
                w: e.allocation[i],
                predicted_delay: p.predicted_delay,
                realized_delay: p.realized_delay,
                predicted_drops_paper: p.predicted_drops_model,
                realized_drops: p.realized_drops,
                fallback_flag: e.fallback as u8,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub epochs: usize,
    pub seed: u64,
    pub summaries: Vec<PolicySummary>,
    pub rows: Vec<EpochRow>,
}

pub fn write_csv<W: Write>(rows: &[EpochRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summaries: &[PolicySummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
