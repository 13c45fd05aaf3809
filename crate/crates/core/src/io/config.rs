use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{IoError, Schema};
use crate::basis::{BasisOptions, ContinuousBasis, DEFAULT_KNOTS};
use crate::diagnostics::Task;
use crate::tree::{GrowConfig, LossKind};

const LOGIT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Identity,
    /// `p → log(p / (1 − p))` with `p` clamped to `[1e-12, 1 − 1e-12]`.
    Logit,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Logit => {
                let p = v.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
                (p / (1.0 - p)).ln()
            }
        }
    }
}

/// Every setting of a fit run. Read from a flat `key = value` file; the
/// command line overrides individual keys through [`RunConfig::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub features: Option<Vec<String>>,
    pub categorical: BTreeSet<String>,
    pub response: String,
    pub original: Option<String>,
    pub tag: Option<String>,
    pub transform: Transform,
    pub knots: usize,
    pub knots_per_feature: BTreeMap<String, usize>,
    pub basis: ContinuousBasis,
    pub linear: BTreeSet<String>,
    pub num_bins: usize,
    pub max_depth: usize,
    pub min_samples_leaf: Option<usize>,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub loss: LossKind,
    pub min_gain: f64,
    pub prune: bool,
    pub r2_threshold: f64,
    pub dsse_fraction: f64,
    pub lambda1: Option<f64>,
    pub seed: u64,
    pub train_fraction: f64,
    pub binary: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grow = GrowConfig::default();
        Self {
            features: None,
            categorical: BTreeSet::new(),
            response: "f".into(),
            original: None,
            tag: None,
            transform: Transform::Identity,
            knots: DEFAULT_KNOTS,
            knots_per_feature: BTreeMap::new(),
            basis: ContinuousBasis::Spline,
            linear: BTreeSet::new(),
            num_bins: grow.num_bins,
            max_depth: grow.max_depth,
            min_samples_leaf: None,
            lambda: grow.lambda,
            lambda_grid: Vec::new(),
            loss: grow.loss,
            min_gain: grow.min_gain,
            prune: true,
            r2_threshold: 0.99,
            dsse_fraction: 0.02,
            lambda1: None,
            seed: 0,
            train_fraction: 2.0 / 3.0,
            binary: false,
            threads: None,
        }
    }
}

/// Keys accepted by [`RunConfig::set`], besides `knots.<feature>`.
pub const KEYS: &[&str] = &[
    "features",
    "categorical",
    "response",
    "original",
    "tag",
    "transform",
    "knots",
    "basis",
    "linear",
    "num_bins",
    "max_depth",
    "min_samples_leaf",
    "lambda",
    "lambda_grid",
    "loss",
    "min_gain",
    "prune",
    "r2_threshold",
    "dsse_fraction",
    "lambda1",
    "seed",
    "train_fraction",
    "task",
    "threads",
];

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" => None,
        v => Some(v),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| IoError::Config {
                line: i + 1,
                message: format!("expected key = value, found '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| IoError::Config {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), IoError> {
        let err = |message: String| IoError::Setting {
            key: key.to_owned(),
            message,
        };
        fn num<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse '{v}'"))
        }
        if let Some(feature) = key.strip_prefix("knots.") {
            self.knots_per_feature
                .insert(feature.to_owned(), num(value).map_err(err)?);
            return Ok(());
        }
        match key {
            "features" => self.features = optional(value).map(list),
            "categorical" => self.categorical = list(value).into_iter().collect(),
            "response" => self.response = value.to_owned(),
            "original" => self.original = optional(value).map(str::to_owned),
            "tag" => self.tag = optional(value).map(str::to_owned),
            "transform" => {
                self.transform = match value {
                    "identity" => Transform::Identity,
                    "logit" => Transform::Logit,
                    _ => return Err(err("expected identity or logit".into())),
                }
            }
            "knots" => self.knots = num(value).map_err(err)?,
            "basis" => {
                self.basis = match value {
                    "spline" => ContinuousBasis::Spline,
                    "linear" => ContinuousBasis::Linear,
                    _ => return Err(err("expected spline or linear".into())),
                }
            }
            "linear" => self.linear = list(value).into_iter().collect(),
            "num_bins" => self.num_bins = num(value).map_err(err)?,
            "max_depth" => self.max_depth = num(value).map_err(err)?,
            "min_samples_leaf" => {
                self.min_samples_leaf = optional(value).map(num).transpose().map_err(err)?
            }
            "lambda" => self.lambda = num(value).map_err(err)?,
            "lambda_grid" => {
                self.lambda_grid = list(value)
                    .iter()
                    .map(|v| num(v))
                    .collect::<Result<_, _>>()
                    .map_err(err)?
            }
            "loss" => {
                self.loss = match value {
                    "sse" => LossKind::Sse,
                    "gcv" => LossKind::Gcv,
                    _ => return Err(err("expected sse or gcv".into())),
                }
            }
            "min_gain" => self.min_gain = num(value).map_err(err)?,
            "prune" => self.prune = num(value).map_err(err)?,
            "r2_threshold" => self.r2_threshold = num(value).map_err(err)?,
            "dsse_fraction" => self.dsse_fraction = num(value).map_err(err)?,
            "lambda1" => self.lambda1 = optional(value).map(num).transpose().map_err(err)?,
            "seed" => self.seed = num(value).map_err(err)?,
            "train_fraction" => self.train_fraction = num(value).map_err(err)?,
            "task" => {
                self.binary = match value {
                    "continuous" => false,
                    "binary" => true,
                    _ => return Err(err("expected continuous or binary".into())),
                }
            }
            "threads" => self.threads = optional(value).map(num).transpose().map_err(err)?,
            _ => return Err(err("unknown key".into())),
        }
        Ok(())
    }

    /// Range checks that do not depend on the data.
    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |key: &str, message: &str| {
            Err(IoError::Setting {
                key: key.to_owned(),
                message: message.to_owned(),
            })
        };
        if self.knots < 2 || self.knots_per_feature.values().any(|&k| k < 2) {
            return bad("knots", "at least 2 knots are required");
        }
        if self.num_bins < 2 {
            return bad("num_bins", "must be at least 2");
        }
        if !(self.lambda >= 0.0) || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return bad("lambda", "must be non-negative");
        }
        if !(self.min_gain >= 0.0) {
            return bad("min_gain", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.r2_threshold) {
            return bad("r2_threshold", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.dsse_fraction) {
            return bad("dsse_fraction", "must lie in [0, 1]");
        }
        if self.lambda1.is_some_and(|l| !(l >= 0.0)) {
            return bad("lambda1", "must be non-negative");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction", "must lie in (0, 1]");
        }
        if self.threads == Some(0) {
            return bad("threads", "must be at least 1");
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema {
            response: self.response.clone(),
            original: self.original.clone(),
            tag: self.tag.clone(),
            features: self.features.clone(),
            categorical: self.categorical.clone(),
            transform: self.transform,
            response_optional: false,
        }
    }

    pub fn basis_options(&self) -> BasisOptions {
        BasisOptions {
            num_knots: self.knots,
            knots_per_feature: self.knots_per_feature.clone(),
            continuous: self.basis,
            linear_features: self.linear.clone(),
        }
    }

    pub fn grow_config(&self) -> GrowConfig {
        GrowConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            lambda: self.lambda,
            lambda_grid: self.lambda_grid.clone(),
            num_bins: self.num_bins,
            loss: self.loss,
            min_gain: self.min_gain,
        }
    }

    pub fn task(&self) -> Task {
        if self.binary {
            Task::Binary {
                logit_scale: self.transform == Transform::Logit,
            }
        } else {
            Task::Continuous
        }
    }
}
