//! Many-objective optimal power flow: AC power flow, a knee-point driven
//! evolutionary search over the control space, and a clustering plus grey
//! relational projection step for picking compromise operating points.

pub mod decision;
pub mod error;
pub mod knea;
pub mod metrics;
pub mod moea;
pub mod network;
pub mod objectives;
pub mod powerflow;

pub use error::{Error, Result};
pub use network::{load_case, parse_case, save_case, CaseFile, ControlSettings, PowerNetwork};
pub use objectives::{evaluate_individual, ConstraintReport, ObjectiveVector, OpfProblem};
pub use powerflow::{solve_power_flow, OperatingPoint, PowerFlowOptions, PowerFlowResult};
