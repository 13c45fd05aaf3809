//! Independent reference implementations shared by the integration tests.
//! Everything here works on dense rows and refits from scratch.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slim_core::basis::DesignSpec;
use slim_core::tree::candidate_edges;
use slim_core::{Column, FeatureInfo, LossKind, SurrogateDataset, Value};

/// Variance cut below which a design column counts as constant.
const CONSTANT_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RidgeOracle {
    pub coefficients: Vec<f64>,
    pub sse: f64,
    pub df: f64,
}

/// Ridge with an unpenalized intercept on standardized columns, solved by
/// Cholesky on `ZᵀZ + λI` and with residuals formed explicitly.
pub fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> RidgeOracle {
    let n = rows.len();
    let m = rows[0].len();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut active = Vec::new();
    let mut means = vec![0.0; m];
    let mut scales = vec![0.0; m];
    for j in 1..m {
        let mu = rows.iter().map(|r| r[j]).sum::<f64>() / nf;
        let second = rows.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf;
        let var = rows.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / nf;
        means[j] = mu;
        if second > 0.0 && var > CONSTANT_RTOL * second {
            scales[j] = var.sqrt();
            active.push(j);
        }
    }
    let k = active.len();
    let z = DMatrix::from_fn(n, k, |i, a| {
        let j = active[a];
        (rows[i][j] - means[j]) / scales[j]
    });
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let ztz = z.transpose() * &z;
    let a = &ztz + DMatrix::identity(k, k) * lambda;
    let inv = a.clone().try_inverse().expect("ridge system is invertible");
    let gamma = &inv * (z.transpose() * &yc);
    let df = 1.0 + (&inv * &ztz).trace();
    let mut beta = vec![0.0; m];
    let mut intercept = y_mean;
    for (a, &j) in active.iter().enumerate() {
        beta[j] = gamma[a] / scales[j];
        intercept -= means[j] * beta[j];
    }
    beta[0] = intercept;
    let sse = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| (yi - dot(r, &beta)).powi(2))
        .sum();
    RidgeOracle {
        coefficients: beta,
        sse,
        df,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Node loss as the tree defines it; `None` when GCV is saturated.
pub fn oracle_loss(fit: &RidgeOracle, n: usize, loss: LossKind) -> Option<f64> {
    match loss {
        LossKind::Sse => Some(fit.sse),
        LossKind::Gcv => {
            let nf = n as f64;
            if fit.df >= nf {
                return None;
            }
            Some(fit.sse / (1.0 - fit.df / nf).powi(2))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveSplit {
    pub feature: usize,
    pub threshold_index: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Refits both children for every candidate threshold of every continuous
/// feature. Ties keep the earliest (feature, threshold) pair.
pub fn naive_best_split(
    spec: &DesignSpec,
    dataset: &SurrogateDataset,
    num_bins: usize,
    lambda: f64,
    loss: LossKind,
    min_leaf: usize,
) -> Option<NaiveSplit> {
    let design = spec.design_matrix(dataset).unwrap();
    let rows: Vec<Vec<f64>> = (0..dataset.len()).map(|r| design.dense_row(r)).collect();
    let y = dataset.response();
    let n = rows.len();
    let parent = oracle_loss(&ridge_oracle(&rows, y, lambda), n, loss)?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let mut best: Option<NaiveSplit> = None;
    for f in 0..spec.features.len() {
        let values: Vec<f64> = (0..n)
            .map(|r| match dataset.value(r, f) {
                Value::Num(x) => x,
                Value::Cat(_) => unreachable!(),
            })
            .collect();
        for (t, &threshold) in candidate_edges(&values, num_bins).iter().enumerate() {
            let (mut lr, mut ly, mut rr, mut ry) = (vec![], vec![], vec![], vec![]);
            for i in 0..n {
                if values[i] <= threshold {
                    lr.push(rows[i].clone());
                    ly.push(y[i]);
                } else {
                    rr.push(rows[i].clone());
                    ry.push(y[i]);
                }
            }
            if lr.len() < min_leaf || rr.len() < min_leaf {
                continue;
            }
            let Some(l) = oracle_loss(&ridge_oracle(&lr, &ly, lambda), lr.len(), loss) else {
                continue;
            };
            let Some(r) = oracle_loss(&ridge_oracle(&rr, &ry, lambda), rr.len(), loss) else {
                continue;
            };
            let gain = parent - l - r;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(NaiveSplit {
                    feature: f,
                    threshold_index: t,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 1e-10 * sst)
}

/// O(n²) AUC: the share of (positive, negative) pairs ranked correctly,
/// ties counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut pairs = 0.0;
    let mut wins = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// Lasso by proximal gradient (ISTA) on the standardized problem, with the
/// same objective as the coordinate-descent solver:
/// `‖y − ȳ − Zγ‖² / (2n) + λ₁·Σ|γ|`. Returns the objective.
pub fn ista_objective(rows: &[Vec<f64>], y: &[f64], lambda1: f64, iterations: usize) -> f64 {
    let n = rows.len();
    let m = rows[0].len();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut active = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 1..m {
        let mu = rows.iter().map(|r| r[j]).sum::<f64>() / nf;
        let second = rows.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf;
        let var = rows.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / nf;
        if second > 0.0 && var > CONSTANT_RTOL * second {
            active.push(j);
            cols.push(rows.iter().map(|r| (r[j] - mu) / var.sqrt()).collect());
        }
    }
    let k = active.len();
    let z = DMatrix::from_fn(n, k, |i, a| cols[a][i]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let hess = z.transpose() * &z / nf;
    let lipschitz = hess.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;
    let zty = z.transpose() * &yc / nf;
    let mut g = DVector::zeros(k);
    for _ in 0..iterations {
        let grad = &hess * &g - &zty;
        let w = &g - grad * step;
        g = w.map(|v: f64| v.signum() * (v.abs() - step * lambda1).max(0.0));
    }
    let r = &yc - &z * &g;
    r.norm_squared() / (2.0 * nf) + lambda1 * g.iter().map(|v| v.abs()).sum::<f64>()
}

/// Uniform continuous features on `[-1, 1]` and a response built from them.
pub fn uniform_dataset(
    n: usize,
    p: usize,
    seed: u64,
    response: impl Fn(&[f64]) -> f64,
) -> SurrogateDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let y = xs.iter().map(|x| response(x)).collect();
    let features = (1..=p).map(|j| FeatureInfo::continuous(format!("x{j}"))).collect();
    let columns = (0..p)
        .map(|j| Column::Continuous(xs.iter().map(|x| x[j]).collect()))
        .collect();
    SurrogateDataset::new(features, columns, y).unwrap()
}

pub fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}
