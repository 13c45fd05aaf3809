//! Effect curves, leaf importance, split contributions and fit metrics.
//!
//! Variances use denominator n throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{spline_entries, BasisBlock, BasisKind, DesignSpec};
use crate::dataset::{SurrogateDataset, Value};
use crate::tree::{Tree, TreeError};

pub const DEFAULT_GRID_POINTS: usize = 100;
/// Below this total, a split is reported as having no interaction.
pub const CONTRIBUTION_FLOOR: f64 = 1e-12;
const PROBABILITY_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("feature index {0} is out of range")]
    UnknownFeature(usize),
    #[error("feature '{0}' is not part of the model")]
    NotInModel(String),
    #[error("value kind does not match feature '{0}'")]
    KindMismatch(String),
    #[error("length mismatch: {left} predictions vs {right} responses")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("binary label at row {row} is {value}, expected 0 or 1")]
    NonBinaryLabel { row: usize, value: f64 },
}

fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Maps design columns to the design feature owning them (`None` for the
/// intercept).
fn column_owners(spec: &DesignSpec) -> Vec<Option<usize>> {
    let mut owners = vec![None; spec.width];
    for block in &spec.blocks {
        for c in block.columns.clone() {
            owners[c] = Some(block.feature);
        }
    }
    owners
}

fn model_block(spec: &DesignSpec, feature: usize) -> Result<&BasisBlock, DiagError> {
    let info = spec
        .features
        .get(feature)
        .ok_or(DiagError::UnknownFeature(feature))?;
    spec.block_of(feature)
        .ok_or_else(|| DiagError::NotInModel(info.name.clone()))
}

/// `h_j(x)` without centering: the feature block's basis row dotted with
/// its coefficients.
pub fn block_effect(
    spec: &DesignSpec,
    coefficients: &[f64],
    feature: usize,
    value: Value<'_>,
) -> Result<f64, DiagError> {
    let block = model_block(spec, feature)?;
    let start = block.columns.start;
    let mismatch = || DiagError::KindMismatch(spec.features[feature].name.clone());
    Ok(match (&block.kind, value) {
        (BasisKind::Spline { knots }, Value::Num(x)) => {
            let (entries, used) = spline_entries(x, knots.knots());
            entries[..used]
                .iter()
                .map(|&(k, v)| v * coefficients[start + k])
                .sum()
        }
        (BasisKind::Linear { .. }, Value::Num(x)) => x * coefficients[start],
        (BasisKind::OneHot { levels }, Value::Cat(s)) => {
            match levels.binary_search_by(|l| l.as_str().cmp(s)) {
                Ok(k) if k > 0 => coefficients[start + k - 1],
                _ => 0.0,
            }
        }
        _ => return Err(mismatch()),
    })
}

/// Node-sample mean of `h_j` at `node`, from the stored column means.
fn effect_offset(tree: &Tree, node: usize, feature: usize) -> Result<f64, DiagError> {
    let block = model_block(&tree.spec, feature)?;
    let n = tree.node(node)?;
    Ok(block
        .columns
        .clone()
        .map(|c| n.model.coefficients[c] * n.column_means[c])
        .sum())
}

/// `h_jk(x)` centered to mean 0 over node `node`'s training rows.
pub fn effect_eval(
    tree: &Tree,
    node: usize,
    feature: usize,
    value: Value<'_>,
) -> Result<f64, DiagError> {
    let n = tree.node(node)?;
    let raw = block_effect(&tree.spec, &n.model.coefficients, feature, value)?;
    Ok(raw - effect_offset(tree, node, feature)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "lowercase")]
pub enum EffectGrid {
    Continuous(Vec<f64>),
    Levels(Vec<String>),
}

impl EffectGrid {
    pub fn len(&self) -> usize {
        match self {
            EffectGrid::Continuous(v) => v.len(),
            EffectGrid::Levels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub node: usize,
    pub feature: usize,
    pub grid: EffectGrid,
    pub values: Vec<f64>,
}

fn grid_for(block: &BasisBlock, points: usize) -> EffectGrid {
    let span = |lo: f64, hi: f64| {
        if points < 2 {
            return vec![lo];
        }
        let step = (hi - lo) / (points - 1) as f64;
        (0..points)
            .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
            .collect()
    };
    match &block.kind {
        BasisKind::Spline { knots } => {
            let k = knots.knots();
            EffectGrid::Continuous(span(k[0], k[k.len() - 1]))
        }
        BasisKind::Linear { min, max } => EffectGrid::Continuous(span(*min, *max)),
        BasisKind::OneHot { levels } => EffectGrid::Levels(levels.clone()),
    }
}

/// Centered effect curves for every leaf and every model feature, on
/// `points` evenly spaced values over the training range (one value per
/// level for categorical features).
pub fn effect_curves(tree: &Tree, points: usize) -> Result<Vec<EffectCurve>, DiagError> {
    let mut out = Vec::new();
    for leaf in tree.leaves() {
        let mut blocks: Vec<&BasisBlock> = tree.spec.blocks.iter().collect();
        blocks.sort_by_key(|b| b.feature);
        for block in blocks {
            let grid = grid_for(block, points);
            let values = match &grid {
                EffectGrid::Continuous(xs) => xs
                    .iter()
                    .map(|&x| effect_eval(tree, leaf.id, block.feature, Value::Num(x)))
                    .collect::<Result<_, _>>()?,
                EffectGrid::Levels(ls) => ls
                    .iter()
                    .map(|l| effect_eval(tree, leaf.id, block.feature, Value::Cat(l)))
                    .collect::<Result<_, _>>()?,
            };
            out.push(EffectCurve {
                node: leaf.id,
                feature: block.feature,
                grid,
                values,
            });
        }
    }
    Ok(out)
}

/// Per-row uncentered effects of every design feature under `coefficients`.
fn row_effects(
    cols: &[u32],
    vals: &[f64],
    coefficients: &[f64],
    owners: &[Option<usize>],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&c, &v) in cols.iter().zip(vals) {
        if let Some(f) = owners[c as usize] {
            out[f] += v * coefficients[c as usize];
        }
    }
}

/// `v_jk` for every leaf `k` and design feature `j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImportanceTable {
    /// `(leaf id, feature) → v`.
    pub entries: BTreeMap<(usize, usize), f64>,
    /// Leaves with fewer than 2 member rows; their importances are 0.
    pub small_leaves: Vec<usize>,
}

impl ImportanceTable {
    pub fn get(&self, leaf: usize, feature: usize) -> Option<f64> {
        self.entries.get(&(leaf, feature)).copied()
    }

    pub fn leaf(&self, leaf: usize) -> Vec<(usize, f64)> {
        self.entries
            .range((leaf, 0)..(leaf + 1, 0))
            .map(|(&(_, f), &v)| (f, v))
            .collect()
    }
}

/// Variance of each feature's effect over the leaf members in `dataset`.
/// Features outside the model (constant on training data) get 0.
pub fn leaf_importance(tree: &Tree, dataset: &SurrogateDataset) -> Result<ImportanceTable, DiagError> {
    let p = tree.spec.features.len();
    let owners = column_owners(&tree.spec);
    let design = tree.spec.design_matrix(dataset).map_err(TreeError::from)?;
    let leaf_of = tree.route_dataset(dataset)?;
    let mut members: BTreeMap<usize, Vec<usize>> = tree.leaves().map(|l| (l.id, Vec::new())).collect();
    for (r, leaf) in leaf_of.iter().enumerate() {
        members.get_mut(leaf).expect("routing ends at a leaf").push(r);
    }
    let mut table = ImportanceTable::default();
    let mut effects = vec![0.0; p];
    for (leaf, rows) in members {
        if rows.len() < 2 {
            table.small_leaves.push(leaf);
            for f in 0..p {
                table.entries.insert((leaf, f), 0.0);
            }
            continue;
        }
        let coefs = &tree.nodes[&leaf].model.coefficients;
        let mut per_feature = vec![Vec::with_capacity(rows.len()); p];
        for &r in &rows {
            let (c, v) = design.row(r);
            row_effects(c, v, coefs, &owners, &mut effects);
            for f in 0..p {
                per_feature[f].push(effects[f]);
            }
        }
        for (f, vals) in per_feature.iter().enumerate() {
            table.entries.insert((leaf, f), population_variance(vals));
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitContribution {
    pub node: usize,
    /// The feature the node splits on.
    pub split_feature: usize,
    /// Per design feature: variance of the parent-minus-child effect.
    pub c: Vec<f64>,
    /// `c / Σc` over the features other than the split feature, whose own
    /// entry is 0. All zeros when flagged.
    pub p: Vec<f64>,
    /// Set when that `Σc` is below [`CONTRIBUTION_FLOOR`].
    pub no_interaction: bool,
    pub members: usize,
}

/// How much each non-split feature's effect changes across the split at
/// every internal node.
pub fn split_contributions(
    tree: &Tree,
    dataset: &SurrogateDataset,
) -> Result<Vec<SplitContribution>, DiagError> {
    let p = tree.spec.features.len();
    let owners = column_owners(&tree.spec);
    let design = tree.spec.design_matrix(dataset).map_err(TreeError::from)?;
    let binding = tree.bind(dataset)?;
    // node → (row, child) pairs
    let mut visits: BTreeMap<usize, Vec<(usize, usize)>> =
        tree.internal().map(|n| (n.id, Vec::new())).collect();
    for r in 0..dataset.len() {
        let path = tree.route_path(|f| dataset.value(r, binding.columns[f]));
        for w in path.windows(2) {
            visits.get_mut(&w[0]).expect("path nodes exist").push((r, w[1]));
        }
    }
    let mut out = Vec::with_capacity(visits.len());
    let mut parent_fx = vec![0.0; p];
    let mut child_fx = vec![0.0; p];
    for (node, rows) in visits {
        let split_feature = tree.nodes[&node]
            .split
            .as_ref()
            .expect("internal nodes carry a split")
            .feature;
        let parent = &tree.nodes[&node].model.coefficients;
        let mut d = vec![Vec::with_capacity(rows.len()); p];
        for &(r, child) in &rows {
            let (c, v) = design.row(r);
            row_effects(c, v, parent, &owners, &mut parent_fx);
            row_effects(c, v, &tree.nodes[&child].model.coefficients, &owners, &mut child_fx);
            for f in 0..p {
                d[f].push(parent_fx[f] - child_fx[f]);
            }
        }
        let c: Vec<f64> = d.iter().map(|v| population_variance(v)).collect();
        let total: f64 = c
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != split_feature)
            .map(|(_, x)| x)
            .sum();
        let no_interaction = total < CONTRIBUTION_FLOOR;
        let pj = if no_interaction {
            vec![0.0; p]
        } else {
            c.iter()
                .enumerate()
                .map(|(f, x)| if f == split_feature { 0.0 } else { x / total })
                .collect()
        };
        out.push(SplitContribution {
            node,
            split_feature,
            c,
            p: pj,
            no_interaction,
            members: rows.len(),
        });
    }
    Ok(out)
}

pub fn split_contribution(
    tree: &Tree,
    node: usize,
    dataset: &SurrogateDataset,
) -> Result<SplitContribution, DiagError> {
    if tree.node(node)?.is_leaf() {
        return Err(TreeError::NotInternal(node).into());
    }
    Ok(split_contributions(tree, dataset)?
        .into_iter()
        .find(|s| s.node == node)
        .expect("internal nodes are reported"))
}

/// Mean squared error and squared correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub mse: f64,
    /// `None` when either side has zero variance.
    pub r2: Option<f64>,
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), DiagError> {
    if a.len() != b.len() {
        return Err(DiagError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(DiagError::TooShort(a.len()));
    }
    Ok(())
}

pub fn fidelity(predictions: &[f64], responses: &[f64]) -> Result<Fidelity, DiagError> {
    check_lengths(predictions, responses)?;
    let n = predictions.len() as f64;
    let mse = predictions
        .iter()
        .zip(responses)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n;
    let mp = predictions.iter().sum::<f64>() / n;
    let my = responses.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, y) in predictions.iter().zip(responses) {
        let (a, b) = (p - mp, y - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let r2 = (sxx > 0.0 && syy > 0.0).then(|| (sxy * sxy) / (sxx * syy));
    Ok(Fidelity { mse, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Continuous,
    /// Labels in {0, 1}; `logit_scale` predictions pass through the logistic
    /// function first.
    Binary { logit_scale: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Accuracy {
    Continuous { mse: f64, r2: Option<f64> },
    /// `auc` is `None` when only one class is present.
    Binary { auc: Option<f64>, log_loss: f64 },
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Area under the ROC curve via the rank-sum statistic with midranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n1 = labels.iter().filter(|&&l| l).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (n1, n0) = (n1 as f64, n0 as f64);
    Some((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0))
}

pub fn accuracy(predictions: &[f64], original: &[f64], task: Task) -> Result<Accuracy, DiagError> {
    check_lengths(predictions, original)?;
    match task {
        Task::Continuous => {
            let f = fidelity(predictions, original)?;
            Ok(Accuracy::Continuous { mse: f.mse, r2: f.r2 })
        }
        Task::Binary { logit_scale } => {
            let labels = original
                .iter()
                .enumerate()
                .map(|(row, &v)| match v {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(DiagError::NonBinaryLabel { row, value: v }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let probs: Vec<f64> = predictions
                .iter()
                .map(|&s| if logit_scale { logistic(s) } else { s })
                .collect();
            let log_loss = probs
                .iter()
                .zip(&labels)
                .map(|(&p, &l)| {
                    let p = p.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
                    if l {
                        -p.ln()
                    } else {
                        -(1.0 - p).ln()
                    }
                })
                .sum::<f64>()
                / probs.len() as f64;
            Ok(Accuracy::Binary {
                auc: auc(&probs, &labels),
                log_loss,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fidelity() {
        let y = [1.0, 2.0, 4.0];
        let f = fidelity(&y, &y).unwrap();
        assert_eq!(f.mse, 0.0);
        assert!((f.r2.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_predictions_have_no_r2() {
        assert_eq!(fidelity(&[1.0, 1.0], &[0.0, 2.0]).unwrap().r2, None);
    }

    #[test]
    fn separated_pair_auc() {
        assert_eq!(auc(&[0.9, 0.1], &[true, false]), Some(1.0));
        assert_eq!(auc(&[0.5, 0.5], &[true, false]), Some(0.5));
        assert_eq!(auc(&[0.5, 0.7], &[true, true]), None);
    }

    #[test]
    fn log_loss_clamps() {
        let acc = accuracy(&[1.0, 0.0], &[0.0, 1.0], Task::Binary { logit_scale: false }).unwrap();
        let Accuracy::Binary { log_loss, .. } = acc else {
            panic!()
        };
        // both terms hit the clamp: p = 1e-12 and 1 − p = 1 − (1 − 1e-12)
        let lo = 1e-12f64;
        let hi = 1.0 - lo;
        let expected = -(lo.ln() + (1.0 - hi).ln()) / 2.0;
        assert!((log_loss - expected).abs() < 1e-12);
    }

    #[test]
    fn labels_must_be_binary() {
        assert!(accuracy(&[0.2, 0.3], &[0.0, 2.0], Task::Binary { logit_scale: false }).is_err());
    }

    #[test]
    fn logistic_is_symmetric() {
        for z in [-30.0, -1.0, 0.0, 2.5] {
            assert!((logistic(z) + logistic(-z) - 1.0).abs() < 1e-15);
        }
    }
}
