//! Main-effects design: quantile-knot linear B-splines for continuous
//! features, dropped-reference one-hot encodings for categorical ones.
//!
//! A [`DesignSpec`] is built once from the root training rows and shared by
//! every tree node, so parent and child effect functions live on the same
//! basis. Column 0 of every design row is the intercept.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureInfo, FeatureKind, SurrogateDataset, Value};

pub const DEFAULT_KNOTS: usize = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("feature `{0}` is constant on the training rows")]
    ConstantFeature(String),
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("no values to place knots on")]
    NoValues,
    #[error("dataset has no feature `{0}` required by the design")]
    MissingFeature(String),
    #[error("feature `{name}` is {found:?} in the dataset but {expected:?} in the design")]
    KindMismatch {
        name: String,
        expected: FeatureKind,
        found: FeatureKind,
    },
    #[error("record has {found} values, design expects {expected}")]
    RecordWidth { expected: usize, found: usize },
}

/// Midpoint-interpolated quantile of sorted data: the average of the order
/// statistics at `floor` and `ceil` of `q·(n−1)`.
pub fn quantile_midpoint(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    0.5 * (sorted[lo] + sorted[hi])
}

pub(crate) fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    pub feature: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Wraps an explicit knot list, sorting and dropping duplicates.
    pub fn new(feature: usize, mut knots: Vec<f64>) -> Result<Self, BasisError> {
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        if knots.len() < 2 {
            return Err(BasisError::TooFewKnots(knots.len()));
        }
        Ok(Self { feature, knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

/// Knots at levels `0, 1/(K−1), …, 1`; exact duplicates are collapsed.
pub fn quantile_knots(
    feature: usize,
    values: &[f64],
    num_knots: usize,
) -> Result<KnotVector, BasisError> {
    if num_knots < 2 {
        return Err(BasisError::TooFewKnots(num_knots));
    }
    if values.is_empty() {
        return Err(BasisError::NoValues);
    }
    let sorted = sorted_copy(values);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(BasisError::ConstantFeature(format!("#{feature}")));
    }
    let denom = (num_knots - 1) as f64;
    let mut knots: Vec<f64> = (0..num_knots)
        .map(|k| quantile_midpoint(&sorted, k as f64 / denom))
        .collect();
    knots.dedup();
    Ok(KnotVector { feature, knots })
}

/// Nonzero entries of the degree-1 B-spline basis at `x`: `(position, value)`.
/// Outside the knot range the boundary basis function is held at 1.
pub fn spline_entries(x: f64, knots: &[f64]) -> ([(usize, f64); 2], usize) {
    let last = knots.len() - 1;
    if x.is_nan() {
        return ([(0, 0.0); 2], 0);
    }
    if x <= knots[0] {
        return ([(0, 1.0), (0, 0.0)], 1);
    }
    if x >= knots[last] {
        return ([(last, 1.0), (0, 0.0)], 1);
    }
    // knots[k] <= x < knots[k + 1]
    let k = knots.partition_point(|&t| t <= x) - 1;
    let w = (x - knots[k]) / (knots[k + 1] - knots[k]);
    if w == 0.0 {
        ([(k, 1.0), (0, 0.0)], 1)
    } else {
        ([(k, 1.0 - w), (k + 1, w)], 2)
    }
}

/// Dense degree-1 B-spline (hat function) values, one per knot.
pub fn spline_row(x: f64, knots: &KnotVector) -> Vec<f64> {
    let mut out = vec![0.0; knots.len()];
    let (entries, used) = spline_entries(x, knots.knots());
    for &(k, v) in &entries[..used] {
        out[k] = v;
    }
    out
}

/// One-hot row against training levels with the first level dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotRow {
    pub values: Vec<f64>,
    /// The value was not among the training levels; the row is all zeros.
    pub unseen: bool,
}

fn onehot_position(value: &str, levels: &[String]) -> Option<usize> {
    levels.binary_search_by(|l| l.as_str().cmp(value)).ok()
}

pub fn onehot_row(value: &str, levels: &[String]) -> OneHotRow {
    let mut values = vec![0.0; levels.len().saturating_sub(1)];
    match onehot_position(value, levels) {
        Some(0) => OneHotRow {
            values,
            unseen: false,
        },
        Some(k) => {
            values[k - 1] = 1.0;
            OneHotRow {
                values,
                unseen: false,
            }
        }
        None => OneHotRow {
            values,
            unseen: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisKind {
    Spline { knots: KnotVector },
    /// Sorted training levels; `levels[0]` is the dropped reference.
    OneHot { levels: Vec<String> },
    /// The raw value; `min`/`max` record the training range.
    Linear { min: f64, max: f64 },
}

impl BasisKind {
    pub fn width(&self) -> usize {
        match self {
            BasisKind::Spline { knots } => knots.len(),
            BasisKind::OneHot { levels } => levels.len() - 1,
            BasisKind::Linear { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisBlock {
    /// Index into [`DesignSpec::features`].
    pub feature: usize,
    pub kind: BasisKind,
    pub columns: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContinuousBasis {
    #[default]
    Spline,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisOptions {
    pub num_knots: usize,
    pub knots_per_feature: BTreeMap<String, usize>,
    pub continuous: ContinuousBasis,
    /// Continuous features that use the raw value regardless of `continuous`.
    pub linear_features: BTreeSet<String>,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            num_knots: DEFAULT_KNOTS,
            knots_per_feature: BTreeMap::new(),
            continuous: ContinuousBasis::Spline,
            linear_features: BTreeSet::new(),
        }
    }
}

/// Maps each model feature to a contiguous block of design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub features: Vec<FeatureInfo>,
    pub blocks: Vec<BasisBlock>,
    /// Features left out because they are constant on the training rows.
    pub excluded: Vec<usize>,
    pub width: usize,
}

impl DesignSpec {
    /// Builds the design from `rows` of `dataset`, using every feature.
    pub fn fit(
        dataset: &SurrogateDataset,
        rows: &[usize],
        options: &BasisOptions,
    ) -> Result<DesignSpec, BasisError> {
        if rows.is_empty() {
            return Err(BasisError::NoValues);
        }
        let features = dataset.features().to_vec();
        let mut blocks = Vec::new();
        let mut excluded = Vec::new();
        let mut next = 1;
        for (f, info) in features.iter().enumerate() {
            let kind = match info.kind {
                FeatureKind::Continuous => {
                    let values: Vec<f64> = rows
                        .iter()
                        .map(|&r| match dataset.value(r, f) {
                            Value::Num(x) => x,
                            Value::Cat(_) => unreachable!("kind checked by dataset"),
                        })
                        .collect();
                    let linear = options.continuous == ContinuousBasis::Linear
                        || options.linear_features.contains(&info.name);
                    if linear {
                        let sorted = sorted_copy(&values);
                        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
                        if min == max {
                            None
                        } else {
                            Some(BasisKind::Linear { min, max })
                        }
                    } else {
                        let k = options
                            .knots_per_feature
                            .get(&info.name)
                            .copied()
                            .unwrap_or(options.num_knots);
                        match quantile_knots(f, &values, k) {
                            Ok(knots) => Some(BasisKind::Spline { knots }),
                            Err(BasisError::ConstantFeature(_)) => None,
                            Err(e) => return Err(e),
                        }
                    }
                }
                FeatureKind::Categorical => {
                    let levels = dataset.levels(f, rows);
                    (levels.len() >= 2).then_some(BasisKind::OneHot { levels })
                }
            };
            match kind {
                Some(kind) => {
                    let w = kind.width();
                    blocks.push(BasisBlock {
                        feature: f,
                        kind,
                        columns: next..next + w,
                    });
                    next += w;
                }
                None => {
                    log::warn!("feature `{}` is constant and left out of the model", info.name);
                    excluded.push(f);
                }
            }
        }
        Ok(DesignSpec {
            features,
            blocks,
            excluded,
            width: next,
        })
    }

    pub fn block_of(&self, feature: usize) -> Option<&BasisBlock> {
        self.blocks.iter().find(|b| b.feature == feature)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Resolves design features to dataset columns by name and kind.
    pub fn bind(&self, dataset: &SurrogateDataset) -> Result<Binding, BasisError> {
        let columns = self
            .features
            .iter()
            .map(|info| {
                let idx = dataset
                    .feature_index(&info.name)
                    .ok_or_else(|| BasisError::MissingFeature(info.name.clone()))?;
                let found = dataset.features()[idx].kind;
                if found != info.kind {
                    return Err(BasisError::KindMismatch {
                        name: info.name.clone(),
                        expected: info.kind,
                        found,
                    });
                }
                Ok(idx)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Binding { columns })
    }

    /// Appends the nonzero entries of one design row (intercept first) and
    /// returns how many one-hot values were unseen levels.
    pub fn row_entries<'v>(
        &self,
        value_of: impl Fn(usize) -> Value<'v>,
        cols: &mut Vec<u32>,
        vals: &mut Vec<f64>,
    ) -> usize {
        cols.push(0);
        vals.push(1.0);
        let mut unseen = 0;
        for block in &self.blocks {
            let start = block.columns.start;
            match (&block.kind, value_of(block.feature)) {
                (BasisKind::Spline { knots }, Value::Num(x)) => {
                    let (entries, used) = spline_entries(x, knots.knots());
                    for &(k, v) in &entries[..used] {
                        cols.push((start + k) as u32);
                        vals.push(v);
                    }
                }
                (BasisKind::Linear { .. }, Value::Num(x)) => {
                    if x != 0.0 {
                        cols.push(start as u32);
                        vals.push(x);
                    }
                }
                (BasisKind::OneHot { levels }, Value::Cat(s)) => match onehot_position(s, levels) {
                    Some(0) => {}
                    Some(k) => {
                        cols.push((start + k - 1) as u32);
                        vals.push(1.0);
                    }
                    None => unseen += 1,
                },
                _ => unreachable!("binding guarantees matching kinds"),
            }
        }
        unseen
    }

    /// Dense design row for a record aligned with [`DesignSpec::features`].
    pub fn record_row(&self, record: &[Value<'_>]) -> Result<Vec<f64>, BasisError> {
        if record.len() != self.features.len() {
            return Err(BasisError::RecordWidth {
                expected: self.features.len(),
                found: record.len(),
            });
        }
        for (info, v) in self.features.iter().zip(record) {
            let found = match v {
                Value::Num(_) => FeatureKind::Continuous,
                Value::Cat(_) => FeatureKind::Categorical,
            };
            if found != info.kind {
                return Err(BasisError::KindMismatch {
                    name: info.name.clone(),
                    expected: info.kind,
                    found,
                });
            }
        }
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        self.row_entries(|f| record[f], &mut cols, &mut vals);
        let mut row = vec![0.0; self.width];
        for (c, v) in cols.into_iter().zip(vals) {
            row[c as usize] = v;
        }
        Ok(row)
    }

    /// Streams dense design rows in dataset order.
    pub fn rows<'a>(
        &'a self,
        dataset: &'a SurrogateDataset,
    ) -> Result<impl Iterator<Item = Vec<f64>> + 'a, BasisError> {
        let binding = self.bind(dataset)?;
        Ok((0..dataset.len()).map(move |r| {
            let (mut cols, mut vals) = (Vec::new(), Vec::new());
            self.row_entries(|f| dataset.value(r, binding.columns[f]), &mut cols, &mut vals);
            let mut row = vec![0.0; self.width];
            for (c, v) in cols.into_iter().zip(vals) {
                row[c as usize] = v;
            }
            row
        }))
    }

    /// Materializes the sparse design for every dataset row.
    pub fn design_matrix(&self, dataset: &SurrogateDataset) -> Result<DesignMatrix, BasisError> {
        let binding = self.bind(dataset)?;
        let mut m = DesignMatrix {
            width: self.width,
            offsets: Vec::with_capacity(dataset.len() + 1),
            cols: Vec::new(),
            vals: Vec::new(),
            unseen_values: 0,
        };
        m.offsets.push(0);
        for r in 0..dataset.len() {
            m.unseen_values += self.row_entries(
                |f| dataset.value(r, binding.columns[f]),
                &mut m.cols,
                &mut m.vals,
            );
            m.offsets.push(m.cols.len());
        }
        if m.unseen_values > 0 {
            log::warn!(
                "{} categorical values were not among the training levels; encoded as reference",
                m.unseen_values
            );
        }
        Ok(m)
    }
}

/// Dataset column index for each design feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub columns: Vec<usize>,
}

/// Sparse row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    width: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    unseen_values: usize,
}

impl DesignMatrix {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn unseen_values(&self) -> usize {
        self.unseen_values
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        let (c, v) = self.row(i);
        for (&c, &v) in c.iter().zip(v) {
            out[c as usize] = v;
        }
        out
    }

    pub fn dot(&self, i: usize, coefficients: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&c, &v)| v * coefficients[c as usize]).sum()
    }
}
