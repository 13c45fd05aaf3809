use serde::{Deserialize, Serialize};

use super::{Tree, TreeError};
use crate::dataset::SurrogateDataset;
use crate::linalg::{sse_from_gram, standardize, GramStats, LinalgError};

const TOLERANCE: f64 = 1e-7;
const PASSES_PER_COLUMN: usize = 1000;

/// Outcome of an L1 refit at one leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Refit {
    pub lambda1: f64,
    pub converged: bool,
    pub passes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Original-scale coefficients, intercept first.
    pub coefficients: Vec<f64>,
    /// `sse / (2n) + lambda1 · Σ|γ|` with γ the standardized slopes.
    pub objective: f64,
    pub converged: bool,
    pub passes: usize,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for the lasso on the standardized columns of
/// `gram`, with an unpenalized intercept. Works on the covariance form, so
/// each update costs O(m).
pub fn lasso_coordinate_descent(gram: &GramStats, lambda1: f64) -> Result<LassoFit, LinalgError> {
    if !(lambda1 >= 0.0) {
        return Err(LinalgError::NegativeLambda(lambda1));
    }
    let std = standardize(gram)?;
    let k = std.active.len();
    let n = gram.count() as f64;
    let max_passes = PASSES_PER_COLUMN * gram.width();
    let mut gamma = vec![0.0; k];
    // residual correlations rhs − Sγ
    let mut resid = std.rhs.clone();
    let threshold = n * lambda1;
    let mut passes = 0;
    let mut converged = k == 0;
    while !converged && passes < max_passes {
        passes += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..k {
            let diag = std.matrix[j * k + j];
            let old = gamma[j];
            let new = soft_threshold(resid[j] + diag * old, threshold) / diag;
            let delta = new - old;
            if delta != 0.0 {
                gamma[j] = new;
                let col = &std.matrix[j * k..(j + 1) * k];
                for (r, s) in resid.iter_mut().zip(col) {
                    *r -= s * delta;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        converged = max_change < TOLERANCE;
    }
    let mut beta = vec![0.0; gram.width()];
    let mut intercept = std.y_mean;
    for (a, &j) in std.active.iter().enumerate() {
        beta[j] = gamma[a] / std.scales[j];
        intercept -= std.means[j] * beta[j];
    }
    beta[0] = intercept;
    let sse = sse_from_gram(gram, &beta)?;
    let objective = sse / (2.0 * n) + lambda1 * gamma.iter().map(|g| g.abs()).sum::<f64>();
    Ok(LassoFit {
        coefficients: beta,
        objective,
        converged,
        passes,
    })
}

/// Replaces leaf coefficients with lasso fits on the leaf rows of
/// `dataset`. Leaves that fail to converge (or hold no rows) keep their
/// ridge coefficients and are flagged.
pub fn refit_l1(tree: &Tree, dataset: &SurrogateDataset, lambda1: f64) -> Result<Tree, TreeError> {
    if !(lambda1 >= 0.0) {
        return Err(LinalgError::NegativeLambda(lambda1).into());
    }
    let design = tree.spec.design_matrix(dataset)?;
    let leaf_of = tree.route_dataset(dataset)?;
    let response = dataset.response();
    let mut grams: std::collections::BTreeMap<usize, GramStats> = tree
        .leaves()
        .map(|n| (n.id, GramStats::zeros(tree.spec.width)))
        .collect();
    for (r, leaf) in leaf_of.iter().enumerate() {
        let (cols, vals) = design.row(r);
        grams
            .get_mut(leaf)
            .expect("routing ends at a leaf")
            .add_sparse(cols, vals, response[r]);
    }
    let mut out = tree.clone();
    for (id, gram) in grams {
        let node = out.nodes.get_mut(&id).expect("leaf exists");
        if gram.count() == 0 {
            node.l1 = Some(L1Refit {
                lambda1,
                converged: false,
                passes: 0,
            });
            continue;
        }
        let fit = lasso_coordinate_descent(&gram, lambda1)?;
        if fit.converged {
            let n = gram.count() as f64;
            let mean = gram.xty()[0] / n;
            let sst = (gram.yty() - n * mean * mean).max(0.0);
            let sse = sse_from_gram(&gram, &fit.coefficients)?;
            node.model.r2 = if sst > 0.0 {
                (1.0 - sse / sst).clamp(0.0, 1.0)
            } else {
                1.0
            };
            node.model.sse = sse;
            node.model.effective_df = fit.coefficients.iter().filter(|b| **b != 0.0).count().max(1) as f64;
            node.model.coefficients = fit.coefficients;
        } else {
            log::warn!("L1 refit of leaf {id} did not converge; keeping ridge coefficients");
        }
        node.l1 = Some(L1Refit {
            lambda1,
            converged: fit.converged,
            passes: fit.passes,
        });
    }
    Ok(out)
}
