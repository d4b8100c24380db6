use std::path::PathBuf;

use raqsim_core::allocate::AllocateError;
use raqsim_core::entropy::EntropyError;
use raqsim_core::fuse::FuseError;
use raqsim_core::phy::PhyError;
use raqsim_core::quantize::QuantizeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Allocate(#[from] AllocateError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Fuse(#[from] FuseError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse {
            what,
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
