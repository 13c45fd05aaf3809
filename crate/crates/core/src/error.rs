use thiserror::Error;

use crate::basis::BasisError;
use crate::dataset::DataError;
use crate::diagnostics::DiagError;
use crate::io::IoError;
use crate::linalg::LinalgError;
use crate::simgen::SimError;
use crate::tree::TreeError;

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Argument,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum SlimError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Diagnostics(#[from] DiagError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn linalg_category(e: &LinalgError) -> ErrorCategory {
    match e {
        LinalgError::NegativeLambda(_) => ErrorCategory::Argument,
        _ => ErrorCategory::Numerical,
    }
}

fn tree_category(e: &TreeError) -> ErrorCategory {
    match e {
        TreeError::Linalg(e) => linalg_category(e),
        TreeError::Config(_) => ErrorCategory::Argument,
        _ => ErrorCategory::Data,
    }
}

impl SlimError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            SlimError::Linalg(e) => linalg_category(e),
            SlimError::Tree(e) => tree_category(e),
            SlimError::Diagnostics(DiagError::Tree(e)) => tree_category(e),
            SlimError::Simulation(SimError::Data(_)) => ErrorCategory::Data,
            SlimError::Simulation(_) => ErrorCategory::Argument,
            SlimError::Io(IoError::Tree(e)) => tree_category(e),
            SlimError::Io(IoError::Setting { .. } | IoError::Config { .. }) => {
                ErrorCategory::Argument
            }
            SlimError::Data(DataError::BadFraction(_)) => ErrorCategory::Argument,
            _ => ErrorCategory::Data,
        }
    }
}
