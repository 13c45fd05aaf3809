use crate::basis::{quantile_midpoint, sorted_copy, BasisKind, DesignSpec};
use crate::dataset::{FeatureKind, SurrogateDataset, Value};

/// Candidate thresholds for a continuous feature: the interior quantiles at
/// levels `k/num_bins`, deduplicated so that no two thresholds induce the
/// same partition of `values`. A threshold falling on a data value moves to
/// the midpoint between that value and the next larger one.
pub fn candidate_edges(values: &[f64], num_bins: usize) -> Vec<f64> {
    if values.is_empty() || num_bins < 2 {
        return Vec::new();
    }
    let sorted = sorted_copy(values);
    let max = sorted[sorted.len() - 1];
    if sorted[0] == max {
        return Vec::new();
    }
    let mut out: Vec<f64> = Vec::with_capacity(num_bins - 1);
    for k in 1..num_bins {
        let q = quantile_midpoint(&sorted, k as f64 / num_bins as f64);
        if q >= max {
            continue;
        }
        // a = largest value <= q, b = smallest value > q
        let above = sorted.partition_point(|&v| v <= q);
        let (a, b) = (sorted[above - 1], sorted[above]);
        let mut t = if q == a { 0.5 * (a + b) } else { q };
        if t >= b {
            t = a;
        }
        out.push(t);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Bin of `x` given sorted thresholds: the number of thresholds below `x`.
/// Bin `b` holds `thresholds[b-1] < x <= thresholds[b]`.
pub fn bin_index(x: f64, thresholds: &[f64]) -> usize {
    thresholds.partition_point(|&t| t < x)
}

/// Root-level binning of one splittable feature.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBins {
    Continuous {
        feature: usize,
        thresholds: Vec<f64>,
        bin_of: Vec<u16>,
    },
    Categorical {
        feature: usize,
        levels: Vec<String>,
        bin_of: Vec<u16>,
    },
}

impl FeatureBins {
    pub fn feature(&self) -> usize {
        match self {
            FeatureBins::Continuous { feature, .. } | FeatureBins::Categorical { feature, .. } => {
                *feature
            }
        }
    }

    pub fn num_bins(&self) -> usize {
        match self {
            FeatureBins::Continuous { thresholds, .. } => thresholds.len() + 1,
            FeatureBins::Categorical { levels, .. } => levels.len(),
        }
    }

    pub fn bin_of(&self) -> &[u16] {
        match self {
            FeatureBins::Continuous { bin_of, .. } | FeatureBins::Categorical { bin_of, .. } => {
                bin_of
            }
        }
    }

    /// Bins every splittable design feature over all dataset rows.
    /// `columns` maps design features to dataset columns.
    pub fn build_all(
        spec: &DesignSpec,
        dataset: &SurrogateDataset,
        columns: &[usize],
        num_bins: usize,
    ) -> Vec<FeatureBins> {
        let mut out = Vec::new();
        for block in &spec.blocks {
            let f = block.feature;
            let col = columns[f];
            match spec.features[f].kind {
                FeatureKind::Continuous => {
                    let values: Vec<f64> = (0..dataset.len())
                        .map(|r| match dataset.value(r, col) {
                            Value::Num(x) => x,
                            Value::Cat(_) => unreachable!(),
                        })
                        .collect();
                    let thresholds = candidate_edges(&values, num_bins);
                    if thresholds.is_empty() {
                        continue;
                    }
                    assert!(thresholds.len() < u16::MAX as usize, "too many bins");
                    let bin_of = values
                        .iter()
                        .map(|&x| bin_index(x, &thresholds) as u16)
                        .collect();
                    out.push(FeatureBins::Continuous {
                        feature: f,
                        thresholds,
                        bin_of,
                    });
                }
                FeatureKind::Categorical => {
                    let levels = match &block.kind {
                        BasisKind::OneHot { levels } => levels.clone(),
                        _ => unreachable!("categorical features use one-hot blocks"),
                    };
                    assert!(levels.len() < u16::MAX as usize, "too many levels");
                    let bin_of = (0..dataset.len())
                        .map(|r| match dataset.value(r, col) {
                            Value::Cat(s) => levels
                                .binary_search_by(|l| l.as_str().cmp(s))
                                .expect("training levels cover training rows")
                                as u16,
                            Value::Num(_) => unreachable!(),
                        })
                        .collect();
                    out.push(FeatureBins::Categorical {
                        feature: f,
                        levels,
                        bin_of,
                    });
                }
            }
        }
        out
    }
}
