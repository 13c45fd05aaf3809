//! Model-based regression tree: every node carries a ridge-fitted
//! main-effects model over the shared design; splits are found by sweeping
//! cumulative per-bin gram statistics.

mod edges;
mod grow;
mod lasso;
mod prune;
mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, Binding, DesignSpec};
use crate::dataset::{SurrogateDataset, Value};
use crate::linalg::{LinalgError, NodeModel};

pub use edges::{bin_index, candidate_edges, FeatureBins};
pub use grow::{grow, grow_with_stats, GrowStats};
pub use lasso::{lasso_coordinate_descent, refit_l1, LassoFit, L1Refit};
pub use prune::prune;
pub use split::{
    best_feature_split, best_split, bin_grams, BinnedFeature, ChildFit, NodeFit, PassCounter,
    SplitOutcome,
};

/// Above this many present levels, categorical splits scan levels ordered
/// by node-mean response instead of enumerating every partition.
pub const MAX_EXHAUSTIVE_LEVELS: usize = 12;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("cannot grow a tree on an empty dataset")]
    EmptyDataset,
    #[error("design width {width} is not below the {count} training rows")]
    TooFewRows { width: usize, count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("node {0} is a leaf")]
    NotInternal(usize),
    #[error("malformed tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Sse,
    #[default]
    Gcv,
}

/// Tree growth settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowConfig {
    pub max_depth: usize,
    /// `None` resolves to `max(2·m, 30)` for design width `m`.
    pub min_samples_leaf: Option<usize>,
    /// Ridge weight on the standardized scale (diagonal = node row count).
    pub lambda: f64,
    /// When nonempty, each node picks the GCV-best weight from this grid.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    pub num_bins: usize,
    pub loss: LossKind,
    pub min_gain: f64,
}

impl Default for GrowConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_samples_leaf: None,
            lambda: 1.0,
            lambda_grid: Vec::new(),
            num_bins: 50,
            loss: LossKind::Gcv,
            min_gain: 0.0,
        }
    }
}

impl GrowConfig {
    pub fn resolved_min_leaf(&self, width: usize) -> usize {
        self.min_samples_leaf.unwrap_or((2 * width).max(30))
    }

    pub fn validate(&self, width: usize) -> Result<(), TreeError> {
        if self.num_bins < 2 {
            return Err(TreeError::Config(format!(
                "num_bins must be at least 2, got {}",
                self.num_bins
            )));
        }
        if !(self.lambda >= 0.0) || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(TreeError::Config("ridge weights must be non-negative".into()));
        }
        if !(self.min_gain >= 0.0) {
            return Err(TreeError::Config("min_gain must be non-negative".into()));
        }
        let leaf = self.resolved_min_leaf(width);
        if leaf < width {
            return Err(TreeError::Config(format!(
                "min_samples_leaf {leaf} is below the design width {width}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitRule {
    /// Left iff `x <= threshold`.
    Threshold { threshold: f64 },
    /// Right iff the level is in `right`; everything else, including levels
    /// never seen at this node, goes left.
    Categories { left: Vec<String>, right: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Index into [`DesignSpec::features`].
    pub feature: usize,
    pub rule: SplitRule,
}

impl Split {
    pub fn goes_left(&self, value: Value<'_>) -> bool {
        match (&self.rule, value) {
            (SplitRule::Threshold { threshold }, Value::Num(x)) => x <= *threshold,
            (SplitRule::Categories { right, .. }, Value::Cat(s)) => {
                !right.iter().any(|r| r == s)
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub depth: usize,
    pub count: usize,
    pub model: NodeModel,
    /// Design-column means over the node's training rows.
    pub column_means: Vec<f64>,
    /// Node loss under the growth loss kind.
    pub loss: f64,
    pub split: Option<Split>,
    pub children: Option<(usize, usize)>,
    /// Loss reduction achieved by this node's split; 0 for leaves.
    pub dsse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<L1Refit>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn r2(&self) -> f64 {
        self.model.r2
    }
}

/// A grown (and possibly pruned) tree together with its design.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub spec: DesignSpec,
    pub config: GrowConfig,
    pub nodes: BTreeMap<usize, TreeNode>,
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[&0]
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode, TreeError> {
        self.nodes.get(&id).ok_or(TreeError::UnknownNode(id))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values().filter(|n| n.is_leaf())
    }

    pub fn internal(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values().filter(|n| !n.is_leaf())
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.values().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Node ids from the root down to the leaf that `value_of` routes to.
    pub fn route_path<'v>(&self, value_of: impl Fn(usize) -> Value<'v>) -> Vec<usize> {
        let mut path = vec![0];
        let mut node = self.root();
        while let (Some(split), Some((l, r))) = (&node.split, node.children) {
            let next = if split.goes_left(value_of(split.feature)) { l } else { r };
            path.push(next);
            node = &self.nodes[&next];
        }
        path
    }

    pub fn route<'v>(&self, value_of: impl Fn(usize) -> Value<'v>) -> usize {
        *self.route_path(value_of).last().expect("path starts at the root")
    }

    /// Prediction for a record aligned with the design's feature list.
    pub fn predict_record(&self, record: &[Value<'_>]) -> Result<f64, TreeError> {
        let row = self.spec.record_row(record)?;
        let leaf = &self.nodes[&self.route(|f| record[f])];
        Ok(row.iter().zip(&leaf.model.coefficients).map(|(x, b)| x * b).sum())
    }

    pub fn bind(&self, dataset: &SurrogateDataset) -> Result<Binding, TreeError> {
        Ok(self.spec.bind(dataset)?)
    }

    /// Leaf id for every dataset row.
    pub fn route_dataset(&self, dataset: &SurrogateDataset) -> Result<Vec<usize>, TreeError> {
        let binding = self.bind(dataset)?;
        Ok((0..dataset.len())
            .map(|r| self.route(|f| dataset.value(r, binding.columns[f])))
            .collect())
    }

    pub fn predict(&self, dataset: &SurrogateDataset) -> Result<Vec<f64>, TreeError> {
        let design = self.spec.design_matrix(dataset)?;
        let leaves = self.route_dataset(dataset)?;
        Ok(leaves
            .iter()
            .enumerate()
            .map(|(r, leaf)| design.dot(r, &self.nodes[leaf].model.coefficients))
            .collect())
    }

    /// Sum of leaf training losses.
    pub fn leaf_loss(&self) -> f64 {
        self.leaves().map(|n| n.loss).sum()
    }

    /// Checks the structural invariants a loaded or hand-built tree must hold.
    pub fn validate(&self) -> Result<(), TreeError> {
        let m = self.spec.width;
        let root = self
            .nodes
            .get(&0)
            .ok_or_else(|| TreeError::Malformed("no root node 0".into()))?;
        if root.depth != 0 {
            return Err(TreeError::Malformed("root depth is not 0".into()));
        }
        let mut reached = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            reached += 1;
            let node = &self.nodes[&id];
            if node.id != id {
                return Err(TreeError::Malformed(format!("node keyed {id} has id {}", node.id)));
            }
            if node.model.coefficients.len() != m || node.column_means.len() != m {
                return Err(TreeError::Malformed(format!(
                    "node {id} has a model of the wrong width"
                )));
            }
            match (&node.split, node.children) {
                (None, None) => {}
                (Some(split), Some((l, r))) => {
                    if split.feature >= self.spec.features.len() {
                        return Err(TreeError::Malformed(format!(
                            "node {id} splits on unknown feature {}",
                            split.feature
                        )));
                    }
                    let (ln, rn) = match (self.nodes.get(&l), self.nodes.get(&r)) {
                        (Some(a), Some(b)) => (a, b),
                        _ => {
                            return Err(TreeError::Malformed(format!(
                                "node {id} references missing children"
                            )))
                        }
                    };
                    if ln.count + rn.count != node.count {
                        return Err(TreeError::Malformed(format!(
                            "children of node {id} hold {} + {} rows, parent holds {}",
                            ln.count, rn.count, node.count
                        )));
                    }
                    if ln.depth != node.depth + 1 || rn.depth != node.depth + 1 {
                        return Err(TreeError::Malformed(format!(
                            "children of node {id} have inconsistent depth"
                        )));
                    }
                    stack.push(l);
                    stack.push(r);
                }
                _ => {
                    return Err(TreeError::Malformed(format!(
                        "node {id} has a split without children or vice versa"
                    )))
                }
            }
            if reached > self.nodes.len() {
                return Err(TreeError::Malformed("node graph has a cycle".into()));
            }
        }
        if reached != self.nodes.len() {
            return Err(TreeError::Malformed(format!(
                "{} nodes are unreachable from the root",
                self.nodes.len() - reached
            )));
        }
        Ok(())
    }
}
