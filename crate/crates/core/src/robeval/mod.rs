//! Accuracy, macro-F1 and the in-domain / out-of-domain / adversarial
//! robustness protocol.

mod metrics;
mod protocol;
mod report;

pub use metrics::{accuracy, evaluate, macro_f1, Metrics, CLASSES};
pub use protocol::{
    delta, run_plan, run_protocol, Cell, ProtocolData, ProtocolError, ProtocolPlan, RobustnessReport,
    RunRecord, Scenario, ScenarioSpec, SeedMetrics,
};
pub use report::{format_delta, render_csv, render_markdown};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot score an empty prediction list")]
    Empty,
    #[error("{predictions} predictions for {golds} gold labels")]
    Length { predictions: usize, golds: usize },
    #[error("class index {0} is not one of 0, 1, 2")]
    Class(usize),
}
