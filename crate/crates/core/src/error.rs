use std::fmt;

/// Errors raised by the model, the solvers and the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain violation: {0}")]
    Domain(String),

    /// The constraint set of an allocation problem is empty.
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),

    /// A trace specification or a simulation request is malformed.
    #[error("invalid trace: {0}")]
    Trace(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Names the aggregate that makes an allocation problem infeasible.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// Sum of lower bounds exceeds the capacity budget.
    LowerBoundsExceedBudget { sum_lo: f64, budget: f64 },
    /// Sum of upper bounds falls short of the capacity budget.
    UpperBoundsBelowBudget { sum_hi: f64, budget: f64 },
    /// Common decomposability fails: `A + B/t_upd > 1`, so no allocation
    /// can nullify every queue within the horizon.
    NotDecomposable { nullifying_total: f64 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::LowerBoundsExceedBudget { sum_lo, budget } => write!(
                f,
                "sum of lower bounds {sum_lo} exceeds budget {budget} (overfill avoidability violated)"
            ),
            Infeasibility::UpperBoundsBelowBudget { sum_hi, budget } => {
                write!(f, "sum of upper bounds {sum_hi} is below budget {budget}")
            }
            Infeasibility::NotDecomposable { nullifying_total } => write!(
                f,
                "common decomposability violated: A + B/t_upd = {nullifying_total} > 1"
            ),
        }
    }
}
