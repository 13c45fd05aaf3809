use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;

use super::edges::FeatureBins;
use super::{GrowConfig, LossKind, Split, SplitRule, TreeError, MAX_EXHAUSTIVE_LEVELS};
use crate::basis::DesignMatrix;
use crate::linalg::{fit_ridge, fit_ridge_gcv, gcv_loss, GramStats, LinalgError, NodeModel};

/// Gains below this fraction of the node's total sum of squares are
/// treated as round-off.
const GAIN_RTOL: f64 = 1e-10;

/// Counts full passes over node rows.
#[derive(Debug, Default)]
pub struct PassCounter(AtomicUsize);

impl PassCounter {
    pub fn get(&self) -> usize {
        self.0.load(AtomicOrdering::Relaxed)
    }

    fn bump(&self) {
        self.0.fetch_add(1, AtomicOrdering::Relaxed);
    }
}

/// Per-bin gram statistics of the node rows over the full design row.
/// One pass over `rows`.
pub fn bin_grams(
    design: &DesignMatrix,
    response: &[f64],
    rows: &[u32],
    bin_of: &[u16],
    num_bins: usize,
    counter: Option<&PassCounter>,
) -> Vec<GramStats> {
    if let Some(c) = counter {
        c.bump();
    }
    let mut grams = vec![GramStats::zeros(design.width()); num_bins];
    for &r in rows {
        let r = r as usize;
        let (cols, vals) = design.row(r);
        grams[bin_of[r] as usize].add_sparse(cols, vals, response[r]);
    }
    grams
}

/// A node's statistics, fitted model and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub gram: GramStats,
    pub model: NodeModel,
    pub loss: f64,
}

pub type ChildFit = NodeFit;

impl NodeFit {
    /// Fits the node model. `None` when the gram is empty or the model would
    /// be saturated under GCV.
    pub fn fit(gram: GramStats, config: &GrowConfig) -> Result<Option<NodeFit>, LinalgError> {
        if gram.count() == 0 {
            return Ok(None);
        }
        let model = if config.lambda_grid.is_empty() {
            fit_ridge(&gram, config.lambda)?
        } else {
            match fit_ridge_gcv(&gram, &config.lambda_grid) {
                Ok(m) => m,
                Err(LinalgError::Saturated { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        };
        let loss = match config.loss {
            LossKind::Sse => model.sse,
            LossKind::Gcv => match gcv_loss(model.sse, model.count, model.effective_df) {
                Ok(g) => g * model.count as f64,
                Err(LinalgError::Saturated { .. }) => return Ok(None),
                Err(e) => return Err(e),
            },
        };
        Ok(Some(NodeFit { gram, model, loss }))
    }

    fn total_sum_of_squares(&self) -> f64 {
        let n = self.gram.count() as f64;
        let mean = self.gram.xty()[0] / n;
        (self.gram.yty() - n * mean * mean).max(0.0)
    }

    /// Smallest gain a split of this node must exceed.
    pub fn gain_floor(&self, min_gain: f64) -> f64 {
        min_gain.max(GAIN_RTOL * self.total_sum_of_squares())
    }
}

/// The best split of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub split: Split,
    pub gain: f64,
    pub left: ChildFit,
    pub right: ChildFit,
    /// `left_bins[b]` is true when bin `b` of the split feature goes left.
    pub left_bins: Vec<bool>,
    /// Canonical order key within the feature: threshold index, or the
    /// sorted level indices of the left subset.
    order_key: Vec<usize>,
}

impl SplitOutcome {
    /// True when `self` should replace `other` under the selection order:
    /// larger gain, then lower feature, then lower threshold / smaller
    /// canonical left subset.
    fn beats(&self, other: &SplitOutcome) -> bool {
        match self.gain.total_cmp(&other.gain) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let a = (self.split.feature, self.order_key.len(), &self.order_key);
                let b = (other.split.feature, other.order_key.len(), &other.order_key);
                a < b
            }
        }
    }
}

/// One feature's bins at a node.
#[derive(Debug, Clone)]
pub struct BinnedFeature<'a> {
    pub bins: &'a FeatureBins,
    pub grams: Vec<GramStats>,
}

fn evaluate(
    node: &NodeFit,
    left: GramStats,
    config: &GrowConfig,
    min_leaf: usize,
) -> Result<Option<(ChildFit, ChildFit, f64)>, TreeError> {
    let right = node.gram.subtract(&left)?;
    if left.count() < min_leaf || right.count() < min_leaf {
        return Ok(None);
    }
    let Some(lf) = NodeFit::fit(left, config)? else {
        return Ok(None);
    };
    let Some(rf) = NodeFit::fit(right, config)? else {
        return Ok(None);
    };
    let gain = node.loss - (lf.loss + rf.loss);
    Ok(Some((lf, rf, gain)))
}

/// Best split of `node` on a single feature, sweeping cumulative bin grams.
pub fn best_feature_split(
    node: &NodeFit,
    binned: &BinnedFeature<'_>,
    config: &GrowConfig,
    min_leaf: usize,
) -> Result<Option<SplitOutcome>, TreeError> {
    let mut best: Option<SplitOutcome> = None;
    let consider = |best: &mut Option<SplitOutcome>, cand: SplitOutcome| {
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            *best = Some(cand);
        }
    };
    let grams = &binned.grams;
    match binned.bins {
        FeatureBins::Continuous {
            feature,
            thresholds,
            ..
        } => {
            let mut left = GramStats::zeros(node.gram.width());
            for (b, &threshold) in thresholds.iter().enumerate() {
                if grams[b].count() == 0 {
                    // Same partition as the previous threshold.
                    continue;
                }
                left.merge_in_place(&grams[b])?;
                if left.count() < min_leaf {
                    continue;
                }
                if node.gram.count() - left.count() < min_leaf {
                    break;
                }
                if let Some((lf, rf, gain)) = evaluate(node, left.clone(), config, min_leaf)? {
                    let mut left_bins = vec![false; grams.len()];
                    left_bins[..=b].iter_mut().for_each(|x| *x = true);
                    consider(
                        &mut best,
                        SplitOutcome {
                            split: Split {
                                feature: *feature,
                                rule: SplitRule::Threshold { threshold },
                            },
                            gain,
                            left: lf,
                            right: rf,
                            left_bins,
                            order_key: vec![b],
                        },
                    );
                }
            }
        }
        FeatureBins::Categorical {
            feature, levels, ..
        } => {
            let present: Vec<usize> = (0..levels.len()).filter(|&l| grams[l].count() > 0).collect();
            let c = present.len();
            if c < 2 {
                return Ok(None);
            }
            let mut subsets: Vec<Vec<usize>> = Vec::new();
            if c <= MAX_EXHAUSTIVE_LEVELS {
                for mask in 0u32..(1u32 << (c - 1)) - 1 {
                    let mut left = vec![present[0]];
                    for (i, &lvl) in present[1..].iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            left.push(lvl);
                        }
                    }
                    subsets.push(left);
                }
            } else {
                let mut order = present.clone();
                let mean = |l: usize| grams[l].xty()[0] / grams[l].count() as f64;
                order.sort_by(|&a, &b| mean(a).total_cmp(&mean(b)).then(a.cmp(&b)));
                for cut in 1..c {
                    let mut left = order[..cut].to_vec();
                    if !left.contains(&present[0]) {
                        left = order[cut..].to_vec();
                    }
                    left.sort_unstable();
                    subsets.push(left);
                }
            }
            for left_levels in subsets {
                let mut left = GramStats::zeros(node.gram.width());
                for &l in &left_levels {
                    left.merge_in_place(&grams[l])?;
                }
                if let Some((lf, rf, gain)) = evaluate(node, left, config, min_leaf)? {
                    let mut left_bins = vec![false; levels.len()];
                    for &l in &left_levels {
                        left_bins[l] = true;
                    }
                    let names = |sel: &dyn Fn(usize) -> bool| -> Vec<String> {
                        present
                            .iter()
                            .filter(|&&l| sel(l))
                            .map(|&l| levels[l].clone())
                            .collect()
                    };
                    let rule = SplitRule::Categories {
                        left: names(&|l| left_bins[l]),
                        right: names(&|l| !left_bins[l]),
                    };
                    consider(
                        &mut best,
                        SplitOutcome {
                            split: Split {
                                feature: *feature,
                                rule,
                            },
                            gain,
                            left: lf,
                            right: rf,
                            left_bins,
                            order_key: left_levels,
                        },
                    );
                }
            }
        }
    }
    Ok(best)
}

fn pick(
    node: &NodeFit,
    per_feature: Vec<Option<SplitOutcome>>,
    config: &GrowConfig,
) -> Option<SplitOutcome> {
    let mut best: Option<SplitOutcome> = None;
    for cand in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best.filter(|b| b.gain > node.gain_floor(config.min_gain))
}

/// Best split over every binned feature, or `None` when no candidate is
/// feasible or none clears the gain floor.
pub fn best_split(
    node: &NodeFit,
    features: &[BinnedFeature<'_>],
    config: &GrowConfig,
    min_leaf: usize,
) -> Result<Option<SplitOutcome>, TreeError> {
    let per_feature = features
        .par_iter()
        .map(|bf| best_feature_split(node, bf, config, min_leaf))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(pick(node, per_feature, config))
}

/// Split search at one node: one binning pass per feature, then the
/// cumulative sweep. Returns the outcome and the pass count per feature.
pub(crate) fn search_node(
    design: &DesignMatrix,
    response: &[f64],
    rows: &[u32],
    node: &NodeFit,
    features: &[FeatureBins],
    config: &GrowConfig,
    min_leaf: usize,
) -> Result<(Option<SplitOutcome>, Vec<usize>), TreeError> {
    let results = features
        .par_iter()
        .map(|fb| {
            let counter = PassCounter::default();
            let grams = bin_grams(design, response, rows, fb.bin_of(), fb.num_bins(), Some(&counter));
            let binned = BinnedFeature { bins: fb, grams };
            best_feature_split(node, &binned, config, min_leaf).map(|o| (o, counter.get()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let passes = results.iter().map(|(_, p)| *p).collect();
    let outcome = pick(node, results.into_iter().map(|(o, _)| o).collect(), config);
    Ok((outcome, passes))
}
