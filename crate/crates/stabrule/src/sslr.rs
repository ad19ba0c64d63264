//! Stabilized sparse logistic regression.
//!
//! Minimizes
//!   L = L0 + lambda * sum_i ( alpha*|w_i| + (1-alpha)/2 * (w_i - (S w)_i)^2 )
//! where L0 is the logistic negative log-likelihood and S is a row-normalized
//! feature-similarity matrix. alpha = 1 recovers the plain l1 objective. The
//! solver is proximal gradient descent with backtracking line search on the
//! smooth part and a soft-threshold step for the l1 part.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// Penalty and solver settings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SslrConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub penalize_intercept: bool,
}

impl Default for SslrConfig {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            alpha: 0.5,
            max_iterations: 10_000,
            tolerance: 1e-8,
            penalize_intercept: false,
        }
    }
}

impl SslrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("alpha must be in [0,1]".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.tolerance <= 0.0 || self.tolerance.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Intercept plus one real coefficient per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl ModelWeights {
    pub fn zeros(p: usize) -> Self {
        Self {
            intercept: 0.0,
            coefficients: vec![0.0; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }
}

/// On-disk model format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelWeightsFile {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ModelWeightsFile {
    pub fn new(m: &ModelWeights, feature_names: &[String]) -> Self {
        Self {
            intercept: m.intercept,
            coefficients: m.coefficients.clone(),
            feature_names: feature_names.to_vec(),
            config: None,
        }
    }

    pub fn weights(&self) -> ModelWeights {
        ModelWeights {
            intercept: self.intercept,
            coefficients: self.coefficients.clone(),
        }
    }
}

/// Largest f64 strictly below 1.
fn one_minus_ulp() -> f64 {
    f64::from_bits(1.0f64.to_bits() - 1)
}

/// Logistic sigmoid, overflow-free, output clamped strictly inside (0,1).
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, one_minus_ulp())
}

/// ln(1 + e^x) without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// w0 + sum_i w_i x_i.
pub fn linear_score(m: &ModelWeights, x: &[f64]) -> Result<f64> {
    if x.len() != m.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: m.coefficients.len(),
            actual: x.len(),
        });
    }
    Ok(m.intercept + m.coefficients.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
}

/// P(y=1 | x) under the logistic model.
pub fn predict_proba(m: &ModelWeights, x: &[f64]) -> Result<f64> {
    Ok(sigmoid(linear_score(m, x)?))
}

/// Proximal operator of t*|.|: sign(v) * max(|v| - t, 0).
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if v.abs() <= t {
        0.0
    } else {
        v.signum() * (v.abs() - t)
    }
}

fn scores_into(ds: &Dataset, m: &ModelWeights, out: &mut Vec<f64>) {
    out.clear();
    for d in 0..ds.n_rows() {
        let row = ds.row(d);
        let f = m.intercept
            + m.coefficients
                .iter()
                .zip(row)
                .map(|(w, xi)| w * xi)
                .sum::<f64>();
        out.push(f);
    }
}

/// Negative log-likelihood: sum_d [ln(1+e^{f_d}) - y_d f_d].
fn neg_log_likelihood(scores: &[f64], labels: &[u8]) -> f64 {
    scores
        .iter()
        .zip(labels)
        .map(|(&f, &y)| log1p_exp(f) - (y as f64) * f)
        .sum()
}

/// Smoothness residual w - S w.
fn smoothness_residual(w: &[f64], s_mat: &SimilarityMatrix) -> Vec<f64> {
    let sw = s_mat.mul_vec(w);
    w.iter().zip(&sw).map(|(wi, si)| wi - si).collect()
}

/// The differentiable part of the objective: L0 plus the quadratic
/// smoothness penalty (the l1 term is excluded).
pub fn smooth_objective(
    m: &ModelWeights,
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    cfg: &SslrConfig,
) -> f64 {
    assert_eq!(m.dim(), ds.n_features(), "weights/dataset dimension mismatch");
    assert_eq!(s_mat.dim(), ds.n_features(), "similarity dimension mismatch");
    let mut scores = Vec::new();
    scores_into(ds, m, &mut scores);
    let mut value = neg_log_likelihood(&scores, ds.labels());
    let quad_coef = cfg.lambda * (1.0 - cfg.alpha);
    if quad_coef != 0.0 {
        let r = smoothness_residual(&m.coefficients, s_mat);
        value += 0.5 * quad_coef * r.iter().map(|v| v * v).sum::<f64>();
        if cfg.penalize_intercept {
            value += 0.5 * quad_coef * m.intercept * m.intercept;
        }
    }
    value
}

fn l1_norm(m: &ModelWeights, penalize_intercept: bool) -> f64 {
    let mut s: f64 = m.coefficients.iter().map(|w| w.abs()).sum();
    if penalize_intercept {
        s += m.intercept.abs();
    }
    s
}

/// Full penalized objective.
pub fn objective(
    m: &ModelWeights,
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    cfg: &SslrConfig,
) -> f64 {
    smooth_objective(m, ds, s_mat, cfg) + cfg.lambda * cfg.alpha * l1_norm(m, cfg.penalize_intercept)
}

/// The plain l1-penalized objective, kept as an explicit separate path so the
/// alpha = 1 reduction can be asserted against it.
pub fn lasso_objective(m: &ModelWeights, ds: &Dataset, lambda: f64, penalize_intercept: bool) -> f64 {
    let mut scores = Vec::new();
    scores_into(ds, m, &mut scores);
    neg_log_likelihood(&scores, ds.labels()) + lambda * l1_norm(m, penalize_intercept)
}

/// Gradient of [`smooth_objective`] over (intercept, coefficients).
pub fn smooth_gradient(
    m: &ModelWeights,
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    cfg: &SslrConfig,
) -> (f64, Vec<f64>) {
    assert_eq!(m.dim(), ds.n_features(), "weights/dataset dimension mismatch");
    let p = ds.n_features();
    let mut scores = Vec::new();
    scores_into(ds, m, &mut scores);

    let mut grad0 = 0.0;
    let mut grad = vec![0.0; p];
    for (d, &score) in scores.iter().enumerate() {
        let r = sigmoid(score) - ds.label(d) as f64;
        grad0 += r;
        for (g, x) in grad.iter_mut().zip(ds.row(d)) {
            *g += r * x;
        }
    }

    let quad_coef = cfg.lambda * (1.0 - cfg.alpha);
    if quad_coef != 0.0 {
        // (I-S)^T (I-S) w = u - S^T u with u = w - S w.
        let u = smoothness_residual(&m.coefficients, s_mat);
        let stu = s_mat.mul_vec_transposed(&u);
        for i in 0..p {
            grad[i] += quad_coef * (u[i] - stu[i]);
        }
        if cfg.penalize_intercept {
            grad0 += quad_coef * m.intercept;
        }
    }
    (grad0, grad)
}

/// Worst-case subgradient-condition violation at `m`:
/// max over coordinates of
///   |g_i + lambda*alpha*sign(w_i)|          for w_i != 0,
///   max(0, |g_i| - lambda*alpha)            for w_i  = 0,
/// with the intercept treated as unpenalized unless configured otherwise.
pub fn stationarity_residual(
    m: &ModelWeights,
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    cfg: &SslrConfig,
) -> f64 {
    let (grad0, grad) = smooth_gradient(m, ds, s_mat, cfg);
    let t = cfg.lambda * cfg.alpha;
    let coord = |w: f64, g: f64, penalized: bool| -> f64 {
        if !penalized || t == 0.0 {
            g.abs()
        } else if w != 0.0 {
            (g + t * w.signum()).abs()
        } else {
            (g.abs() - t).max(0.0)
        }
    };
    let mut worst = coord(m.intercept, grad0, cfg.penalize_intercept);
    for (w, g) in m.coefficients.iter().zip(&grad) {
        worst = worst.max(coord(*w, *g, true));
    }
    worst
}

/// Spectral-norm estimate of the smooth-part curvature bound
/// X'X/4 + lambda*(1-alpha)*(I-S)'(I-S) (intercept column included),
/// via power iteration.
fn lipschitz_estimate(ds: &Dataset, s_mat: &SimilarityMatrix, cfg: &SslrConfig) -> f64 {
    let p = ds.n_features();
    let n = ds.n_rows();
    let dim = p + 1;
    let quad_coef = cfg.lambda * (1.0 - cfg.alpha);

    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut hv = vec![0.0; dim];
    let mut estimate = 0.0;
    for _ in 0..60 {
        hv.iter_mut().for_each(|x| *x = 0.0);
        for d in 0..n {
            let row = ds.row(d);
            let t = v[0] + row.iter().zip(&v[1..]).map(|(x, vi)| x * vi).sum::<f64>();
            let t4 = 0.25 * t;
            hv[0] += t4;
            for i in 0..p {
                hv[i + 1] += t4 * row[i];
            }
        }
        if quad_coef != 0.0 {
            let u = smoothness_residual(&v[1..], s_mat);
            let stu = s_mat.mul_vec_transposed(&u);
            for i in 0..p {
                hv[i + 1] += quad_coef * (u[i] - stu[i]);
            }
            if cfg.penalize_intercept {
                hv[0] += quad_coef * v[0];
            }
        }
        let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return 1.0;
        }
        estimate = norm;
        for (vi, hvi) in v.iter_mut().zip(&hv) {
            *vi = hvi / norm;
        }
    }
    if estimate > 0.0 {
        estimate
    } else {
        1.0
    }
}

/// Fit by proximal gradient descent with backtracking.
///
/// Starts from `init` (or zero), uses a power-iteration curvature estimate
/// for the initial step size, and stops once the relative objective decrease
/// drops below `cfg.tolerance` with the subgradient optimality conditions
/// satisfied, or at `cfg.max_iterations`.
pub fn fit_sslr(
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    cfg: &SslrConfig,
    init: Option<&ModelWeights>,
) -> Result<ModelWeights> {
    cfg.validate()?;
    if ds.n_rows() == 0 {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    }
    let p = ds.n_features();
    if s_mat.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: s_mat.dim(),
        });
    }
    let mut m = match init {
        Some(w) => {
            if w.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: w.dim(),
                });
            }
            w.clone()
        }
        None => ModelWeights::zeros(p),
    };

    let l1_weight = cfg.lambda * cfg.alpha;
    let lipschitz = lipschitz_estimate(ds, s_mat, cfg);
    let mut step = 1.0 / lipschitz.max(1e-12);

    let mut obj = objective(&m, ds, s_mat, cfg);
    if !obj.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut rel_decrease = f64::INFINITY;

    let mut candidate = ModelWeights::zeros(p);
    for _ in 0..cfg.max_iterations {
        let (grad0, grad) = smooth_gradient(&m, ds, s_mat, cfg);

        if rel_decrease < cfg.tolerance {
            let grad_inf = grad
                .iter()
                .fold(grad0.abs(), |acc, g| acc.max(g.abs()));
            let target = 0.5e-6 * (1.0 + grad_inf);
            if subgradient_residual(&m, grad0, &grad, l1_weight, cfg.penalize_intercept) <= target {
                break;
            }
        }

        let g_here = smooth_objective(&m, ds, s_mat, cfg);
        // Try growing the step; backtracking pulls it down when too large.
        step *= 1.25;
        let mut accepted = false;
        for _ in 0..200 {
            prox_step(&m, grad0, &grad, step, l1_weight, cfg.penalize_intercept, &mut candidate);
            let g_new = smooth_objective(&candidate, ds, s_mat, cfg);
            let dw0 = candidate.intercept - m.intercept;
            let mut inner = grad0 * dw0;
            let mut sq = dw0 * dw0;
            for ((new, old), g) in candidate.coefficients.iter().zip(&m.coefficients).zip(&grad) {
                let dwi = new - old;
                inner += g * dwi;
                sq += dwi * dwi;
            }
            if g_new <= g_here + inner + sq / (2.0 * step) + 1e-12 * g_here.abs().max(1.0) {
                accepted = true;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        if !accepted {
            break; // step underflowed: numerically stationary
        }

        std::mem::swap(&mut m, &mut candidate);
        let new_obj = objective(&m, ds, s_mat, cfg);
        if !new_obj.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        rel_decrease = (obj - new_obj) / obj.abs().max(1.0);
        obj = new_obj;
    }

    Ok(m)
}

fn subgradient_residual(
    m: &ModelWeights,
    grad0: f64,
    grad: &[f64],
    t: f64,
    penalize_intercept: bool,
) -> f64 {
    let coord = |w: f64, g: f64, penalized: bool| -> f64 {
        if !penalized || t == 0.0 {
            g.abs()
        } else if w != 0.0 {
            (g + t * w.signum()).abs()
        } else {
            (g.abs() - t).max(0.0)
        }
    };
    let mut worst = coord(m.intercept, grad0, penalize_intercept);
    for (w, g) in m.coefficients.iter().zip(grad) {
        worst = worst.max(coord(*w, *g, true));
    }
    worst
}

fn prox_step(
    m: &ModelWeights,
    grad0: f64,
    grad: &[f64],
    step: f64,
    l1_weight: f64,
    penalize_intercept: bool,
    out: &mut ModelWeights,
) {
    let t = step * l1_weight;
    out.intercept = if penalize_intercept {
        soft_threshold(m.intercept - step * grad0, t)
    } else {
        m.intercept - step * grad0
    };
    out.coefficients.clear();
    out.coefficients.extend(
        m.coefficients
            .iter()
            .zip(grad)
            .map(|(w, g)| soft_threshold(w - step * g, t)),
    );
}

/// Fit on column-standardized features, then map the weights back to the raw
/// scale so downstream scoring and importance see raw-column coefficients.
/// Constant columns are left unstandardized.
pub fn fit_sslr_standardized(
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    cfg: &SslrConfig,
    init: Option<&ModelWeights>,
) -> Result<ModelWeights> {
    let n = ds.n_rows();
    let p = ds.n_features();
    if n == 0 {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    }
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for i in 0..p {
        let col = ds.column(i);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        means[i] = mean;
        stds[i] = var.sqrt();
    }
    let mut values = Vec::with_capacity(n * p);
    for d in 0..n {
        let row = ds.row(d);
        for i in 0..p {
            if stds[i] > 0.0 {
                values.push((row[i] - means[i]) / stds[i]);
            } else {
                values.push(row[i]);
            }
        }
    }
    let std_ds = Dataset::new(
        values,
        ds.labels().to_vec(),
        ds.feature_names().to_vec(),
        ds.label_name().to_string(),
    )?;
    let fitted = fit_sslr(&std_ds, s_mat, cfg, init)?;

    let mut coefficients = Vec::with_capacity(p);
    let mut intercept = fitted.intercept;
    for i in 0..p {
        if stds[i] > 0.0 {
            let w = fitted.coefficients[i] / stds[i];
            coefficients.push(w);
            intercept -= w * means[i];
        } else {
            coefficients.push(fitted.coefficients[i]);
        }
    }
    Ok(ModelWeights {
        intercept,
        coefficients,
    })
}
