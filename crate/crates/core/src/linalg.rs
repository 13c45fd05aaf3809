//! Gram-statistic accumulation and penalized least squares.
//!
//! Every node model in the tree is fitted from a [`GramStats`] alone: the
//! cross-products `XᵀX`, `Xᵀy`, `yᵀy` and the row count. Column 0 of every
//! design is the intercept, so column means and variances can be read off the
//! intercept row of `XᵀX`. Ridge fits standardize the non-intercept columns
//! from those moments, eigendecompose the standardized block once, and reuse
//! the factor for any ridge weight.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalues below this fraction of the largest are null directions.
pub const NULL_EIGEN_RTOL: f64 = 1e-10;

/// Columns whose node variance falls below this fraction of their raw second
/// moment are treated as constant and dropped from the fit.
const CONSTANT_COLUMN_RTOL: f64 = 1e-10;
/// Relative size below which a subtracted diagonal entry is taken as zero.
const CANCELLATION_RTOL: f64 = 1e-12;

const MAX_QL_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot remove {part} rows from statistics over {parent} rows")]
    CountUnderflow { parent: usize, part: usize },
    #[error(
        "symmetric eigensolver did not converge after {iterations} iterations \
         (dimension {dim}, max |a_ij| {max_abs:e}, diagonal in [{min_diag:e}, {max_diag:e}])"
    )]
    NoConvergence {
        dim: usize,
        iterations: usize,
        max_abs: f64,
        min_diag: f64,
        max_diag: f64,
    },
    #[error("ridge weight must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("effective degrees of freedom {df} not below row count {count}")]
    Saturated { df: f64, count: usize },
    #[error("statistics aggregate zero rows")]
    Empty,
}

/// Sufficient statistics for a least-squares fit over a set of design rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramStats {
    width: usize,
    /// Row-major `width × width`.
    xtx: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    count: usize,
}

impl GramStats {
    pub fn zeros(width: usize) -> Self {
        Self {
            width,
            xtx: vec![0.0; width * width],
            xty: vec![0.0; width],
            yty: 0.0,
            count: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn xtx(&self) -> &[f64] {
        &self.xtx
    }

    pub fn xtx_at(&self, i: usize, j: usize) -> f64 {
        self.xtx[i * self.width + j]
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// Adds one dense design row.
    pub fn add_row(&mut self, row: &[f64], y: f64) -> Result<(), LinalgError> {
        if row.len() != self.width {
            return Err(LinalgError::DimensionMismatch {
                expected: self.width,
                found: row.len(),
            });
        }
        let m = self.width;
        for (a, &xa) in row.iter().enumerate() {
            if xa == 0.0 {
                continue;
            }
            let dst = &mut self.xtx[a * m..(a + 1) * m];
            for (d, &xb) in dst.iter_mut().zip(row) {
                *d += xa * xb;
            }
            self.xty[a] += xa * y;
        }
        self.yty += y * y;
        self.count += 1;
        Ok(())
    }

    /// Adds one row given by its nonzero entries. Column indices must be
    /// distinct and below `width`.
    pub fn add_sparse(&mut self, cols: &[u32], vals: &[f64], y: f64) {
        debug_assert_eq!(cols.len(), vals.len());
        let m = self.width;
        for (&ca, &va) in cols.iter().zip(vals) {
            let base = ca as usize * m;
            for (&cb, &vb) in cols.iter().zip(vals) {
                self.xtx[base + cb as usize] += va * vb;
            }
            self.xty[ca as usize] += va * y;
        }
        self.yty += y * y;
        self.count += 1;
    }

    fn check_width(&self, other: &GramStats) -> Result<(), LinalgError> {
        if self.width != other.width {
            return Err(LinalgError::DimensionMismatch {
                expected: self.width,
                found: other.width,
            });
        }
        Ok(())
    }

    /// Adds `other` into `self`.
    pub fn merge_in_place(&mut self, other: &GramStats) -> Result<(), LinalgError> {
        self.check_width(other)?;
        for (a, b) in self.xtx.iter_mut().zip(&other.xtx) {
            *a += b;
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            *a += b;
        }
        self.yty += other.yty;
        self.count += other.count;
        Ok(())
    }

    pub fn merge(&self, other: &GramStats) -> Result<GramStats, LinalgError> {
        let mut out = self.clone();
        out.merge_in_place(other)?;
        Ok(out)
    }

    /// Statistics of `self` with the rows of `part` removed. Columns that
    /// cancel to round-off are reset to exact zeros.
    pub fn subtract(&self, part: &GramStats) -> Result<GramStats, LinalgError> {
        self.check_width(part)?;
        if part.count > self.count {
            return Err(LinalgError::CountUnderflow {
                parent: self.count,
                part: part.count,
            });
        }
        let count = self.count - part.count;
        if count == 0 {
            return Ok(GramStats::zeros(self.width));
        }
        let m = self.width;
        let xtx: Vec<f64> = self.xtx.iter().zip(&part.xtx).map(|(a, b)| a - b).collect();
        let xty = self.xty.iter().zip(&part.xty).map(|(a, b)| a - b).collect();
        let mut out = GramStats {
            width: m,
            xtx,
            xty,
            yty: (self.yty - part.yty).max(0.0),
            count,
        };
        // A column whose remaining sum of squares is round-off is zero on
        // every remaining row, so its whole row and column of cross
        // products are zero too.
        for i in 0..m {
            let d = out.xtx[i * m + i];
            if d <= CANCELLATION_RTOL * self.xtx[i * m + i] {
                for j in 0..m {
                    out.xtx[i * m + j] = 0.0;
                    out.xtx[j * m + i] = 0.0;
                }
                out.xty[i] = 0.0;
            }
        }
        Ok(out)
    }
}

/// Accumulates dense design rows and their responses.
pub fn gram_accumulate<R: AsRef<[f64]>>(
    width: usize,
    rows: &[R],
    responses: &[f64],
) -> Result<GramStats, LinalgError> {
    if rows.len() != responses.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: rows.len(),
            found: responses.len(),
        });
    }
    let mut g = GramStats::zeros(width);
    for (row, &y) in rows.iter().zip(responses) {
        g.add_row(row.as_ref(), y)?;
    }
    Ok(g)
}

pub fn gram_merge(a: &GramStats, b: &GramStats) -> Result<GramStats, LinalgError> {
    a.merge(b)
}

pub fn gram_subtract(parent: &GramStats, part: &GramStats) -> Result<GramStats, LinalgError> {
    parent.subtract(part)
}

/// Spectral factor `A = Uᵀ·diag(d)·U`. Row `i` of `rotation` is the
/// eigenvector for `spectrum[i]`; the spectrum is sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFactor {
    dim: usize,
    rotation: Vec<f64>,
    spectrum: Vec<f64>,
    null_below: f64,
}

impl EigenFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.rotation[i * self.dim..(i + 1) * self.dim]
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn is_null(&self, i: usize) -> bool {
        self.spectrum[i] <= self.null_below
    }

    /// Number of eigenvalues above the null threshold.
    pub fn rank(&self) -> usize {
        (0..self.dim).filter(|&i| !self.is_null(i)).count()
    }

    /// Rebuilds `Uᵀ·diag(d)·U`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let u = self.eigenvector(k);
            let d = self.spectrum[k];
            for i in 0..n {
                let s = d * u[i];
                for j in 0..n {
                    out[i * n + j] += s * u[j];
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric `dim × dim` row-major matrix by
/// Householder tridiagonalization and implicit QL iteration.
pub fn sym_eig(dim: usize, a: &[f64]) -> Result<EigenFactor, LinalgError> {
    if a.len() != dim * dim {
        return Err(LinalgError::DimensionMismatch {
            expected: dim * dim,
            found: a.len(),
        });
    }
    if dim == 0 {
        return Ok(EigenFactor {
            dim,
            rotation: Vec::new(),
            spectrum: Vec::new(),
            null_below: 0.0,
        });
    }
    let n = dim;
    // v holds the symmetrized input; tred2 overwrites it with the orthogonal
    // transform, stored as columns.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    // tql2 rotates columns of v; work on the transpose so each rotation
    // touches two contiguous rows.
    let mut w = transpose(n, &v);
    if let Err(iterations) = tql2(n, &mut w, &mut d, &mut e) {
        let max_abs = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diag = (0..n).map(|i| a[i * n + i]);
        let min_diag = diag.clone().fold(f64::INFINITY, f64::min);
        let max_diag = diag.fold(f64::NEG_INFINITY, f64::max);
        return Err(LinalgError::NoConvergence {
            dim: n,
            iterations,
            max_abs,
            min_diag,
            max_diag,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let mut rotation = Vec::with_capacity(n * n);
    let mut spectrum = Vec::with_capacity(n);
    for &k in &order {
        rotation.extend_from_slice(&w[k * n..(k + 1) * n]);
        spectrum.push(d[k]);
    }
    let top = spectrum[0].max(0.0);
    Ok(EigenFactor {
        dim: n,
        rotation,
        spectrum,
        null_below: NULL_EIGEN_RTOL * top,
    })
}

fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

// Householder reduction to tridiagonal form (EISPACK tred2 lineage).
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    let vkj = v[idx(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). `w` holds eigenvectors as rows.
fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<(), usize> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(iter);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Moments of a gram's non-intercept columns and the standardized block.
///
/// Active columns have positive variance. The standardized cross-product
/// matrix has `count` on its diagonal.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub active: Vec<usize>,
    /// Column means indexed by design column (entry 0 unused).
    pub means: Vec<f64>,
    /// Column standard deviations indexed by design column; 0 for inactive.
    pub scales: Vec<f64>,
    /// Row-major `active.len()²`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub y_mean: f64,
}

pub fn standardize(gram: &GramStats) -> Result<Standardized, LinalgError> {
    if gram.count == 0 {
        return Err(LinalgError::Empty);
    }
    let m = gram.width;
    let n = gram.count as f64;
    let y_mean = gram.xty[0] / n;
    let mut means = vec![0.0; m];
    let mut scales = vec![0.0; m];
    let mut active = Vec::new();
    for j in 1..m {
        let mu = gram.xtx_at(0, j) / n;
        let second = gram.xtx_at(j, j) / n;
        let var = second - mu * mu;
        means[j] = mu;
        if second > 0.0 && var > CONSTANT_COLUMN_RTOL * second {
            scales[j] = var.sqrt();
            active.push(j);
        }
    }
    let k = active.len();
    let mut matrix = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (a, &ja) in active.iter().enumerate() {
        for (b, &jb) in active.iter().enumerate().skip(a) {
            let cov = gram.xtx_at(ja, jb) - n * means[ja] * means[jb];
            let s = cov / (scales[ja] * scales[jb]);
            matrix[a * k + b] = s;
            matrix[b * k + a] = s;
        }
        rhs[a] = (gram.xty[ja] - n * means[ja] * y_mean) / scales[ja];
    }
    Ok(Standardized {
        active,
        means,
        scales,
        matrix,
        rhs,
        y_mean,
    })
}

/// A fitted main-effects model for one node, on the original design scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    pub coefficients: Vec<f64>,
    pub sse: f64,
    pub r2: f64,
    pub effective_df: f64,
    pub lambda: f64,
    pub count: usize,
}

/// Ridge fit with an unpenalized intercept. `factor` must decompose the
/// standardized block of `gram` (see [`standardize`]).
pub fn ridge_solve(
    gram: &GramStats,
    factor: &EigenFactor,
    lambda: f64,
) -> Result<NodeModel, LinalgError> {
    let std = standardize(gram)?;
    ridge_solve_standardized(gram, &std, factor, lambda)
}

pub fn ridge_solve_standardized(
    gram: &GramStats,
    std: &Standardized,
    factor: &EigenFactor,
    lambda: f64,
) -> Result<NodeModel, LinalgError> {
    if !(lambda >= 0.0) {
        return Err(LinalgError::NegativeLambda(lambda));
    }
    let k = std.active.len();
    if factor.dim() != k {
        return Err(LinalgError::DimensionMismatch {
            expected: k,
            found: factor.dim(),
        });
    }
    let mut gamma = vec![0.0; k];
    let mut df = 1.0;
    for i in 0..k {
        if factor.is_null(i) {
            continue;
        }
        let u = factor.eigenvector(i);
        let d = factor.spectrum()[i];
        let proj: f64 = u.iter().zip(&std.rhs).map(|(a, b)| a * b).sum();
        let w = proj / (d + lambda);
        for (g, &ui) in gamma.iter_mut().zip(u) {
            *g += w * ui;
        }
        df += d / (d + lambda);
    }
    let mut beta = vec![0.0; gram.width];
    let mut intercept = std.y_mean;
    for (a, &j) in std.active.iter().enumerate() {
        beta[j] = gamma[a] / std.scales[j];
        intercept -= std.means[j] * beta[j];
    }
    beta[0] = intercept;
    let sse = sse_from_gram(gram, &beta)?;
    let n = gram.count as f64;
    let sst = (gram.yty - n * std.y_mean * std.y_mean).max(0.0);
    let r2 = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(NodeModel {
        coefficients: beta,
        sse,
        r2,
        effective_df: df,
        lambda,
        count: gram.count,
    })
}

/// Standardizes, factors and solves in one step.
pub fn fit_ridge(gram: &GramStats, lambda: f64) -> Result<NodeModel, LinalgError> {
    let std = standardize(gram)?;
    let factor = sym_eig(std.active.len(), &std.matrix)?;
    ridge_solve_standardized(gram, &std, &factor, lambda)
}

/// Fits every weight in `grid` from a single factorization and keeps the one
/// with the smallest GCV loss. Saturated weights are skipped.
pub fn fit_ridge_gcv(gram: &GramStats, grid: &[f64]) -> Result<NodeModel, LinalgError> {
    let std = standardize(gram)?;
    let factor = sym_eig(std.active.len(), &std.matrix)?;
    let mut best: Option<(f64, NodeModel)> = None;
    let mut last_err = LinalgError::Empty;
    for &lambda in grid {
        let model = ridge_solve_standardized(gram, &std, &factor, lambda)?;
        match gcv_loss(model.sse, model.count, model.effective_df) {
            Ok(loss) => {
                if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                    best = Some((loss, model));
                }
            }
            Err(e) => last_err = e,
        }
    }
    best.map(|(_, m)| m).ok_or(last_err)
}

/// `max(0, yᵀy − 2βᵀXᵀy + βᵀXᵀXβ)`.
pub fn sse_from_gram(gram: &GramStats, beta: &[f64]) -> Result<f64, LinalgError> {
    let m = gram.width;
    if beta.len() != m {
        return Err(LinalgError::DimensionMismatch {
            expected: m,
            found: beta.len(),
        });
    }
    let mut quad = 0.0;
    let mut lin = 0.0;
    for i in 0..m {
        if beta[i] == 0.0 {
            continue;
        }
        let row = &gram.xtx[i * m..(i + 1) * m];
        let r: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        quad += beta[i] * r;
        lin += beta[i] * gram.xty[i];
    }
    Ok((gram.yty - 2.0 * lin + quad).max(0.0))
}

/// Generalized cross-validation loss `sse / (n·(1 − df/n)²)`.
pub fn gcv_loss(sse: f64, count: usize, effective_df: f64) -> Result<f64, LinalgError> {
    let n = count as f64;
    if count == 0 || effective_df >= n {
        return Err(LinalgError::Saturated {
            df: effective_df,
            count,
        });
    }
    let shrink = 1.0 - effective_df / n;
    Ok(sse / (n * shrink * shrink))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = (0..n)
            .map(|_| {
                let mut r: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                r[0] = 1.0;
                r
            })
            .collect();
        let y = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
        (rows, y)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn single_row_outer_product() {
        let g = gram_accumulate(2, &[vec![1.0, 2.0]], &[3.0]).unwrap();
        assert_eq!(g.xtx(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(g.xty(), &[3.0, 6.0]);
        assert_eq!(g.yty(), 9.0);
        assert_eq!(g.count(), 1);
    }

    #[test]
    fn empty_accumulation_is_zero() {
        let rows: Vec<Vec<f64>> = Vec::new();
        let g = gram_accumulate(3, &rows, &[]).unwrap();
        assert_eq!(g, GramStats::zeros(3));
    }

    #[test]
    fn accumulate_rejects_misaligned_inputs() {
        let err = gram_accumulate(2, &[vec![1.0, 2.0]], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { .. }));
        let err = gram_accumulate(2, &[vec![1.0, 2.0, 3.0]], &[1.0]).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { .. }));
    }

    #[test]
    fn accumulate_matches_dense_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (rows, y) = random_rows(&mut rng, 10, 3);
        let g = gram_accumulate(3, &rows, &y).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct: f64 = rows.iter().map(|r| r[i] * r[j]).sum();
                assert!((g.xtx_at(i, j) - direct).abs() < 1e-12);
            }
            let direct: f64 = rows.iter().zip(&y).map(|(r, v)| r[i] * v).sum();
            assert!((g.xty()[i] - direct).abs() < 1e-12);
        }
        let direct: f64 = y.iter().map(|v| v * v).sum();
        assert!((g.yty() - direct).abs() < 1e-12);
    }

    #[test]
    fn sparse_and_dense_rows_agree() {
        let mut dense = GramStats::zeros(4);
        let mut sparse = GramStats::zeros(4);
        dense.add_row(&[1.0, 0.0, 0.25, 0.75], 2.0).unwrap();
        sparse.add_sparse(&[0, 2, 3], &[1.0, 0.25, 0.75], 2.0);
        assert_eq!(dense, sparse);
    }

    #[test]
    fn merge_identity_and_additivity() {
        let a = gram_accumulate(2, &[vec![1.0, 2.0]], &[3.0]).unwrap();
        let b = gram_accumulate(2, &[vec![1.0, -1.0]], &[0.5]).unwrap();
        assert_eq!(gram_merge(&a, &GramStats::zeros(2)).unwrap(), a);
        let both = gram_accumulate(2, &[vec![1.0, 2.0], vec![1.0, -1.0]], &[3.0, 0.5]).unwrap();
        assert_eq!(gram_merge(&a, &b).unwrap(), both);
        assert!(gram_merge(&a, &GramStats::zeros(3)).is_err());
    }

    #[test]
    fn merge_of_bins_matches_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut all_rows = Vec::new();
        let mut all_y = Vec::new();
        let mut merged = GramStats::zeros(4);
        for _ in 0..7 {
            let n = rng.random_range(0..9);
            let (rows, y) = random_rows(&mut rng, n, 4);
            merged = gram_merge(&merged, &gram_accumulate(4, &rows, &y).unwrap()).unwrap();
            all_rows.extend(rows);
            all_y.extend(y);
        }
        let direct = gram_accumulate(4, &all_rows, &all_y).unwrap();
        assert_eq!(merged.count(), direct.count());
        for (a, b) in merged.xtx().iter().zip(direct.xtx()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((merged.yty() - direct.yty()).abs() < 1e-12);
    }

    #[test]
    fn subtract_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rows, y) = random_rows(&mut rng, 20, 3);
        let parent = gram_accumulate(3, &rows, &y).unwrap();
        assert_eq!(gram_subtract(&parent, &parent).unwrap(), GramStats::zeros(3));
        assert_eq!(gram_subtract(&parent, &GramStats::zeros(3)).unwrap(), parent);
        let left = gram_accumulate(3, &rows[..8], &y[..8]).unwrap();
        let right = gram_accumulate(3, &rows[8..], &y[8..]).unwrap();
        let diff = gram_subtract(&parent, &left).unwrap();
        assert_eq!(diff.count(), 12);
        for (a, b) in diff.xtx().iter().zip(right.xtx()) {
            assert!(rel_close(*a, *b, 1e-9));
        }
        assert!(rel_close(diff.yty(), right.yty(), 1e-9));
        let err = gram_subtract(&left, &parent).unwrap_err();
        assert_eq!(err, LinalgError::CountUnderflow { parent: 8, part: 20 });
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let f = sym_eig(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        for &d in f.spectrum() {
            assert!((d - 1.0).abs() < 1e-14);
        }
        let f = sym_eig(2, &[1.0, 0.0, 0.0, 4.0]).unwrap();
        assert!((f.spectrum()[0] - 4.0).abs() < 1e-14);
        assert!((f.spectrum()[1] - 1.0).abs() < 1e-14);
        // Leading eigenvector is ±e₂.
        assert!(f.eigenvector(0)[0].abs() < 1e-14);
        assert!((f.eigenvector(0)[1].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 6;
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum();
            }
        }
        let f = sym_eig(n, &a).unwrap();
        let back = f.reconstruct();
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() <= 1e-8 * scale);
        }
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = f
                    .eigenvector(i)
                    .iter()
                    .zip(f.eigenvector(j))
                    .map(|(p, q)| p * q)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
        assert!(f.spectrum().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_flags_rank_deficiency() {
        // Rank one: v vᵀ.
        let v = [1.0, 2.0, -1.0];
        let a: Vec<f64> = (0..9).map(|k| v[k / 3] * v[k % 3]).collect();
        let f = sym_eig(3, &a).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.spectrum()[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_interpolates_exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let g = gram_accumulate(2, &rows, &y).unwrap();
        let m = fit_ridge(&g, 0.0).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(m.sse < 1e-12);
        assert!((m.effective_df - 2.0).abs() < 1e-12);
        assert!((m.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_infinite_shrinkage_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (rows, y) = random_rows(&mut rng, 40, 4);
        let g = gram_accumulate(4, &rows, &y).unwrap();
        let m = fit_ridge(&g, 1e12).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.coefficients[0] - mean).abs() < 1e-6);
        assert!(m.coefficients[1..].iter().all(|b| b.abs() <= 1e-6));
    }

    #[test]
    fn ridge_rejects_negative_lambda() {
        let g = gram_accumulate(2, &[vec![1.0, 0.0], vec![1.0, 1.0]], &[0.0, 1.0]).unwrap();
        assert!(matches!(fit_ridge(&g, -1.0), Err(LinalgError::NegativeLambda(_))));
    }

    #[test]
    fn ridge_handles_collinear_columns() {
        // Columns 1 and 2 sum to the intercept, like a two-knot spline block.
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let t = i as f64 / 5.0;
                vec![1.0, 1.0 - t, t]
            })
            .collect();
        let y: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let g = gram_accumulate(3, &rows, &y).unwrap();
        let m = fit_ridge(&g, 0.0).unwrap();
        assert!(m.sse < 1e-10);
        assert!((m.effective_df - 2.0).abs() < 1e-9);
        for (r, v) in rows.iter().zip(&y) {
            let fit: f64 = r.iter().zip(&m.coefficients).map(|(a, b)| a * b).sum();
            assert!((fit - v).abs() < 1e-9);
        }
    }

    #[test]
    fn effective_df_decreases_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, y) = random_rows(&mut rng, 30, 5);
        let g = gram_accumulate(5, &rows, &y).unwrap();
        let dfs: Vec<f64> = [0.0, 0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| fit_ridge(&g, l).unwrap().effective_df)
            .collect();
        assert!((dfs[0] - 5.0).abs() < 1e-12);
        assert!(dfs.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn gcv_grid_picks_a_grid_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (rows, y) = random_rows(&mut rng, 30, 5);
        let g = gram_accumulate(5, &rows, &y).unwrap();
        let grid = [0.0, 1.0, 10.0];
        let best = fit_ridge_gcv(&g, &grid).unwrap();
        assert!(grid.contains(&best.lambda));
        let best_loss = gcv_loss(best.sse, best.count, best.effective_df).unwrap();
        for &l in &grid {
            let m = fit_ridge(&g, l).unwrap();
            assert!(best_loss <= gcv_loss(m.sse, m.count, m.effective_df).unwrap());
        }
    }

    #[test]
    fn sse_from_gram_special_cases() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..4).map(|i| 1.0 - 0.5 * i as f64).collect();
        let g = gram_accumulate(2, &rows, &y).unwrap();
        assert!(sse_from_gram(&g, &[1.0, -0.5]).unwrap() < 1e-12);
        assert_eq!(sse_from_gram(&g, &[0.0, 0.0]).unwrap(), g.yty());
        assert!(sse_from_gram(&g, &[0.0]).is_err());
    }

    #[test]
    fn gcv_values() {
        let v = gcv_loss(10.0, 100, 5.0).unwrap();
        assert!((v - 10.0 / (100.0 * 0.95 * 0.95)).abs() < 1e-15);
        assert!((v - 0.110803).abs() < 1e-6);
        assert_eq!(gcv_loss(7.0, 10, 0.0).unwrap(), 0.7);
        assert_eq!(gcv_loss(0.0, 10, 3.0).unwrap(), 0.0);
        assert!(matches!(
            gcv_loss(1.0, 5, 5.0),
            Err(LinalgError::Saturated { .. })
        ));
    }
}
