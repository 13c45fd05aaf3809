//! Seeded generators for the two benchmark response surfaces on
//! `U(−1, 1)^10`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    train_test_split, Column, DataError, FeatureInfo, Partition, SurrogateDataset,
};

pub const NUM_PREDICTORS: usize = 10;
pub const TRAIN_FRACTION: f64 = 2.0 / 3.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("noise level must be finite and non-negative, got {0}")]
    BadSigma(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    F1,
    F2,
}

impl std::str::FromStr for SimKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(SimKind::F1),
            "f2" => Ok(SimKind::F2),
            other => Err(format!("unknown simulator '{other}' (expected f1 or f2)")),
        }
    }
}

/// `x·log|x|`, continuously extended by 0 at the origin.
fn x_log_abs(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln()
    }
}

pub fn f1(x: &[f64; NUM_PREDICTORS]) -> f64 {
    3.0 * x[0] + x[1].powi(3) - PI * x[2]
        + (-2.0 * x[3] * x[3]).exp()
        + 1.0 / (2.0 + x[4].abs())
        + x_log_abs(x[5])
        + (2.0 * x[6].abs()).sqrt()
        + x[6].max(0.0)
        + x[7].powi(4)
        + 2.0 * (PI * x[7]).cos()
}

pub fn f2(x: &[f64; NUM_PREDICTORS]) -> f64 {
    let ind = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
    let power = if x[4] > 0.0 {
        4.0 * x[4].powf(x[5].abs())
    } else {
        0.0
    };
    f1(x) + 2.0 * ind(x[0]) * ind(x[1]) * x[2] + 2.0 * ind(x[0]) * x[3] + power + (x[6] + x[7]).abs()
}

impl SimKind {
    pub fn eval(self, x: &[f64; NUM_PREDICTORS]) -> f64 {
        match self {
            SimKind::F1 => f1(x),
            SimKind::F2 => f2(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub x: [f64; NUM_PREDICTORS],
    pub f: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub kind: SimKind,
    pub samples: Vec<SimSample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn predictor_names() -> Vec<String> {
    (1..=NUM_PREDICTORS).map(|j| format!("x{j}")).collect()
}

/// Draws `n` samples with `y = f + N(0, sigma²)` and a 2/3 train split.
pub fn simulate(kind: SimKind, n: usize, sigma: f64, seed: u64) -> Result<Simulation, SimError> {
    if n == 0 {
        return Err(SimError::EmptySample);
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SimError::BadSigma(sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|_| SimError::BadSigma(sigma))?;
    let samples = (0..n)
        .map(|_| {
            let mut x = [0.0; NUM_PREDICTORS];
            for v in &mut x {
                *v = rng.random_range(-1.0..=1.0);
            }
            let f = kind.eval(&x);
            let y = if sigma == 0.0 { f } else { f + noise.sample(&mut rng) };
            SimSample { x, f, y }
        })
        .collect();
    let (train, test) = train_test_split(n, TRAIN_FRACTION, seed)?;
    Ok(Simulation {
        kind,
        samples,
        train,
        test,
    })
}

impl Simulation {
    /// Dataset with the noiseless `f` as surrogate response and `y` as the
    /// original response.
    pub fn dataset(&self) -> SurrogateDataset {
        let features = predictor_names()
            .into_iter()
            .map(FeatureInfo::continuous)
            .collect();
        let columns = (0..NUM_PREDICTORS)
            .map(|j| Column::Continuous(self.samples.iter().map(|s| s.x[j]).collect()))
            .collect();
        let f = self.samples.iter().map(|s| s.f).collect();
        let y = self.samples.iter().map(|s| s.y).collect();
        let mut tags = vec![Partition::Test; self.samples.len()];
        for &r in &self.train {
            tags[r] = Partition::Train;
        }
        SurrogateDataset::new(features, columns, f)
            .and_then(|d| d.with_original(y))
            .and_then(|d| d.with_tags(tags))
            .expect("simulated columns are finite and aligned")
    }
}
