//! Surrogate locally-interpretable models: regression trees whose nodes
//! carry additive spline models, fitted to the predictions of another model.

// `!(x >= 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod basis;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod simgen;
pub mod tree;

pub use basis::{BasisOptions, ContinuousBasis, DesignSpec};
pub use dataset::{Column, FeatureInfo, FeatureKind, Partition, SurrogateDataset, Value};
pub use diagnostics::{Accuracy, Fidelity, Task};
pub use error::{ErrorCategory, SlimError};
pub use io::{ModelMeta, RunConfig, Schema, Transform};
pub use linalg::{GramStats, NodeModel};
pub use simgen::{SimKind, Simulation};
pub use tree::{GrowConfig, LossKind, Split, SplitRule, Tree, TreeNode};
