//! In-memory surrogate datasets.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("column `{name}` has {found} rows, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("column `{name}` is declared {declared:?} but holds {held:?} values")]
    KindMismatch {
        name: String,
        declared: FeatureKind,
        held: FeatureKind,
    },
    #[error("surrogate response is not finite at row {row}")]
    NonFiniteResponse { row: usize },
    #[error("continuous feature `{name}` is not finite at row {row}")]
    NonFiniteFeature { name: String, row: usize },
    #[error("dataset has no rows")]
    Empty,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("train fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureInfo {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Column::Continuous(_) => FeatureKind::Continuous,
            Column::Categorical(_) => FeatureKind::Categorical,
        }
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match self {
            Column::Continuous(v) => Value::Num(v[row]),
            Column::Categorical(v) => Value::Cat(&v[row]),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => {
                Column::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

/// A single feature value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Num(f64),
    Cat(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

/// Feature columns plus the surrogate response `y^S` and, optionally, the
/// original response and train/test tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateDataset {
    features: Vec<FeatureInfo>,
    columns: Vec<Column>,
    response: Vec<f64>,
    original: Option<Vec<f64>>,
    tags: Option<Vec<Partition>>,
}

impl SurrogateDataset {
    pub fn new(
        features: Vec<FeatureInfo>,
        columns: Vec<Column>,
        response: Vec<f64>,
    ) -> Result<Self, DataError> {
        let n = response.len();
        if features.len() != columns.len() {
            return Err(DataError::LengthMismatch {
                name: "<feature list>".into(),
                expected: features.len(),
                found: columns.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for (info, col) in features.iter().zip(&columns) {
            if !seen.insert(info.name.as_str()) {
                return Err(DataError::DuplicateFeature(info.name.clone()));
            }
            if col.len() != n {
                return Err(DataError::LengthMismatch {
                    name: info.name.clone(),
                    expected: n,
                    found: col.len(),
                });
            }
            if col.kind() != info.kind {
                return Err(DataError::KindMismatch {
                    name: info.name.clone(),
                    declared: info.kind,
                    held: col.kind(),
                });
            }
            if let Column::Continuous(v) = col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(DataError::NonFiniteFeature {
                        name: info.name.clone(),
                        row,
                    });
                }
            }
        }
        if let Some(row) = response.iter().position(|y| !y.is_finite()) {
            return Err(DataError::NonFiniteResponse { row });
        }
        Ok(Self {
            features,
            columns,
            response,
            original: None,
            tags: None,
        })
    }

    pub fn with_original(mut self, original: Vec<f64>) -> Result<Self, DataError> {
        if original.len() != self.len() {
            return Err(DataError::LengthMismatch {
                name: "<original response>".into(),
                expected: self.len(),
                found: original.len(),
            });
        }
        self.original = Some(original);
        Ok(self)
    }

    pub fn with_tags(mut self, tags: Vec<Partition>) -> Result<Self, DataError> {
        if tags.len() != self.len() {
            return Err(DataError::LengthMismatch {
                name: "<partition tags>".into(),
                expected: self.len(),
                found: tags.len(),
            });
        }
        self.tags = Some(tags);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn features(&self) -> &[FeatureInfo] {
        &self.features
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn column(&self, feature: usize) -> &Column {
        &self.columns[feature]
    }

    pub fn value(&self, row: usize, feature: usize) -> Value<'_> {
        self.columns[feature].value(row)
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn original(&self) -> Option<&[f64]> {
        self.original.as_deref()
    }

    pub fn tags(&self) -> Option<&[Partition]> {
        self.tags.as_deref()
    }

    /// Rows in the given order, carrying every column along.
    pub fn subset(&self, rows: &[usize]) -> SurrogateDataset {
        SurrogateDataset {
            features: self.features.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            response: rows.iter().map(|&r| self.response[r]).collect(),
            original: self
                .original
                .as_ref()
                .map(|o| rows.iter().map(|&r| o[r]).collect()),
            tags: self
                .tags
                .as_ref()
                .map(|t| rows.iter().map(|&r| t[r]).collect()),
        }
    }

    /// Sorted distinct levels of a categorical feature over `rows`.
    pub fn levels(&self, feature: usize, rows: &[usize]) -> Vec<String> {
        match &self.columns[feature] {
            Column::Categorical(v) => rows
                .iter()
                .map(|&r| v[r].as_str())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(str::to_owned)
                .collect(),
            Column::Continuous(_) => Vec::new(),
        }
    }

    /// Train/test row indices from the tag column.
    pub fn tagged_split(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let tags = self.tags.as_ref()?;
        let train = (0..self.len()).filter(|&i| tags[i] == Partition::Train).collect();
        let test = (0..self.len()).filter(|&i| tags[i] == Partition::Test).collect();
        Some((train, test))
    }
}

/// Seeded random split of `0..n`. Both index lists come back sorted.
pub fn train_test_split(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    perm.shuffle(&mut rng);
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
