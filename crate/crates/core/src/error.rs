use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed case file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("tap ratio {ratio} on branch {from}-{to} is outside [{t_min}, {t_max}]")]
    TapOutOfBounds {
        from: usize,
        to: usize,
        ratio: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("control settings do not match the network: {0}")]
    Controls(String),

    #[error("load admittance block is singular; isolated load island at buses {buses:?}")]
    SingularLoadBlock { buses: Vec<usize> },

    #[error("decision analysis: {0}")]
    Decision(String),

    #[error("front metrics: {0}")]
    Metrics(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
