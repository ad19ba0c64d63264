//! Synthetic correlated-feature benchmark with known ground truth.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::sslr::sigmoid;

/// Equicorrelated-block Gaussian design with a sparse linear label model.
#[derive(Debug, Clone, Serialize)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub group_size: usize,
    pub within_group_correlation: f64,
    pub true_weights: Vec<f64>,
    pub intercept: f64,
    pub seed: u64,
    /// Threshold features at zero into 0/1 counts instead of raw Gaussians.
    pub count_mode: bool,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidConfig("n and p must be positive".into()));
        }
        if self.group_size == 0 || !self.p.is_multiple_of(self.group_size) {
            return Err(Error::InvalidConfig(format!(
                "p={} must be divisible by group_size={}",
                self.p, self.group_size
            )));
        }
        if !(0.0..1.0).contains(&self.within_group_correlation) {
            return Err(Error::InvalidConfig(
                "within_group_correlation must be in [0,1)".into(),
            ));
        }
        if self.true_weights.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: self.true_weights.len(),
            });
        }
        Ok(())
    }

    /// Group index of each feature.
    pub fn groups(&self) -> Vec<usize> {
        (0..self.p).map(|i| i / self.group_size).collect()
    }
}

/// Draw a dataset: x = sqrt(rho)*g_block + sqrt(1-rho)*e, so features share
/// correlation rho within a group and are independent across groups; labels
/// are Bernoulli(sigmoid(intercept + x . true_weights)).
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rho = cfg.within_group_correlation;
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    let n_groups = cfg.p / cfg.group_size;

    let mut values = Vec::with_capacity(cfg.n * cfg.p);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let group_factors: Vec<f64> = (0..n_groups)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let row_start = values.len();
        for i in 0..cfg.p {
            let e: f64 = StandardNormal.sample(&mut rng);
            let mut x = shared * group_factors[i / cfg.group_size] + own * e;
            if cfg.count_mode {
                x = if x > 0.0 { 1.0 } else { 0.0 };
            }
            values.push(x);
        }
        let score = cfg.intercept
            + values[row_start..]
                .iter()
                .zip(&cfg.true_weights)
                .map(|(x, w)| x * w)
                .sum::<f64>();
        let y = rng.random_bool(sigmoid(score));
        labels.push(y as u8);
    }

    let width = (cfg.p as f64).log10().ceil().max(1.0) as usize;
    let names = (0..cfg.p).map(|i| format!("x{i:0width$}")).collect();
    Dataset::new(values, labels, names, "y".into())
}

/// Mean pairwise Jaccard index over all unordered pairs of selections.
/// A pair of empty sets counts as 1.
pub fn stability_jaccard(selections: &[BTreeSet<usize>]) -> Result<f64> {
    if selections.len() < 2 {
        return Err(Error::InvalidConfig(
            "stability needs at least two selections".into(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in selections.iter().enumerate() {
        for b in &selections[i + 1..] {
            let inter = a.intersection(b).count();
            let union = a.union(b).count();
            total += if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            };
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Ground-truth sidecar written next to generated datasets.
#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    pub true_weights: Vec<f64>,
    pub groups: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}
