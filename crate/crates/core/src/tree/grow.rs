use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use super::edges::FeatureBins;
use super::split::{search_node, NodeFit};
use super::{GrowConfig, Tree, TreeError, TreeNode};
use crate::basis::DesignSpec;
use crate::dataset::SurrogateDataset;
use crate::linalg::GramStats;

/// Instrumentation collected while growing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowStats {
    /// Design features that have at least one candidate split, in search order.
    pub split_features: Vec<usize>,
    /// Full passes over node rows, per searched node and per split feature.
    pub node_passes: BTreeMap<usize, Vec<usize>>,
    /// Passes used to build the root gram.
    pub root_passes: usize,
    /// Wall time spent in split search, seconds.
    pub search_seconds: f64,
}

pub fn grow(
    dataset: &SurrogateDataset,
    spec: &DesignSpec,
    config: &GrowConfig,
) -> Result<Tree, TreeError> {
    grow_with_stats(dataset, spec, config).map(|(tree, _)| tree)
}

struct Pending {
    id: usize,
    depth: usize,
    rows: Vec<u32>,
    fit: NodeFit,
}

fn column_means(gram: &GramStats) -> Vec<f64> {
    let n = gram.count() as f64;
    (0..gram.width()).map(|j| gram.xtx_at(0, j) / n).collect()
}

/// Grows a tree breadth-first; node ids follow creation order from 0.
pub fn grow_with_stats(
    dataset: &SurrogateDataset,
    spec: &DesignSpec,
    config: &GrowConfig,
) -> Result<(Tree, GrowStats), TreeError> {
    let n = dataset.len();
    if n == 0 {
        return Err(TreeError::EmptyDataset);
    }
    let m = spec.width;
    if m >= n {
        return Err(TreeError::TooFewRows { width: m, count: n });
    }
    if n > u32::MAX as usize {
        return Err(TreeError::Config("too many rows".into()));
    }
    config.validate(m)?;
    let min_leaf = config.resolved_min_leaf(m);
    let binding = spec.bind(dataset)?;
    let design = spec.design_matrix(dataset)?;
    let response = dataset.response();
    let features = FeatureBins::build_all(spec, dataset, &binding.columns, config.num_bins);

    let mut stats = GrowStats {
        split_features: features.iter().map(FeatureBins::feature).collect(),
        ..GrowStats::default()
    };

    let mut root_gram = GramStats::zeros(m);
    for r in 0..n {
        let (cols, vals) = design.row(r);
        root_gram.add_sparse(cols, vals, response[r]);
    }
    stats.root_passes = 1;
    let root_fit = NodeFit::fit(root_gram, config)?
        .ok_or(TreeError::TooFewRows { width: m, count: n })?;

    let mut nodes = BTreeMap::new();
    let mut queue = VecDeque::from([Pending {
        id: 0,
        depth: 0,
        rows: (0..n as u32).collect(),
        fit: root_fit,
    }]);
    let mut next_id = 1;

    while let Some(p) = queue.pop_front() {
        let mut node = TreeNode {
            id: p.id,
            depth: p.depth,
            count: p.fit.gram.count(),
            column_means: column_means(&p.fit.gram),
            model: p.fit.model.clone(),
            loss: p.fit.loss,
            split: None,
            children: None,
            dsse: 0.0,
            l1: None,
        };
        if p.depth < config.max_depth && p.rows.len() >= 2 * min_leaf {
            let started = Instant::now();
            let (outcome, passes) =
                search_node(&design, response, &p.rows, &p.fit, &features, config, min_leaf)?;
            stats.search_seconds += started.elapsed().as_secs_f64();
            stats.node_passes.insert(p.id, passes);

            if let Some(outcome) = outcome {
                let bins = features
                    .iter()
                    .find(|fb| fb.feature() == outcome.split.feature)
                    .expect("split feature has bins");
                let bin_of = bins.bin_of();
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = p
                    .rows
                    .iter()
                    .partition(|&&r| outcome.left_bins[bin_of[r as usize] as usize]);
                debug_assert_eq!(left_rows.len(), outcome.left.gram.count());
                debug_assert_eq!(right_rows.len(), outcome.right.gram.count());
                let (l, r) = (next_id, next_id + 1);
                next_id += 2;
                node.split = Some(outcome.split);
                node.children = Some((l, r));
                node.dsse = outcome.gain;
                queue.push_back(Pending {
                    id: l,
                    depth: p.depth + 1,
                    rows: left_rows,
                    fit: outcome.left,
                });
                queue.push_back(Pending {
                    id: r,
                    depth: p.depth + 1,
                    rows: right_rows,
                    fit: outcome.right,
                });
            }
        }
        nodes.insert(node.id, node);
    }

    let tree = Tree {
        spec: spec.clone(),
        config: config.clone(),
        nodes,
    };
    Ok((tree, stats))
}
