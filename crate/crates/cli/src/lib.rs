//! Library side of the `maopf` command-line tool: file formats and the
//! bodies of the `run`, `decide`, `metrics` and `pf` subcommands.

pub mod archive;
pub mod commands;

pub use archive::{load_network, ArchiveFile, CoefficientFile, RunEcho, SolutionRecord};
pub use commands::{cmd_decide, cmd_metrics, cmd_pf, cmd_run, DecisionFile, PfReport, RunRequest};
