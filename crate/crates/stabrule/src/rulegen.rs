//! Rule distillation: bootstrap model averaging, importance-based feature
//! selection, integer score-card construction, and risk-curve calibration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seeds::child_seed;
use crate::similarity::SimilarityMatrix;
use crate::sslr::{fit_sslr, sigmoid, SslrConfig};

/// Rule-generation knobs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RuleGenConfig {
    /// Features retained in the score card.
    pub k: usize,
    /// Bootstrap replicates.
    pub bootstraps: usize,
    pub seed: u64,
    /// Largest score magnitude; the strongest kept feature maps to it.
    pub score_cap: u32,
}

impl Default for RuleGenConfig {
    fn default() -> Self {
        Self {
            k: 10,
            bootstraps: 100,
            seed: 0,
            score_cap: 10,
        }
    }
}

impl RuleGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.bootstraps == 0 {
            return Err(Error::InvalidConfig("bootstraps must be at least 1".into()));
        }
        if self.score_cap == 0 {
            return Err(Error::InvalidConfig("score_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// How bootstrap replicates draw their sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    /// n rows with replacement (the real procedure).
    Bootstrap,
    /// The full dataset unchanged; replicates differ only if the fit does.
    Identity,
}

/// Per-replicate fitted weights, replicate-major.
#[derive(Debug, Clone)]
pub struct BootstrapFits {
    pub intercepts: Vec<f64>,
    pub coefficient_rows: Vec<Vec<f64>>,
}

/// Mean and population standard deviation of the replicate fits.
#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub mean_weights: Vec<f64>,
    pub std_weights: Vec<f64>,
    pub mean_intercept: f64,
    pub bootstraps: usize,
}

const MAX_RESAMPLE_RETRIES: usize = 100;

/// Fit one SSLR per seeded bootstrap resample. The similarity matrix stays
/// fixed from the full dataset. Replicate r derives its seed from
/// (cfg.seed, r); a single-class resample is redrawn with the next derived
/// seed up to 100 times.
pub fn bootstrap_fits(
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    sslr_cfg: &SslrConfig,
    rg_cfg: &RuleGenConfig,
    mode: ResampleMode,
) -> Result<BootstrapFits> {
    rg_cfg.validate()?;
    sslr_cfg.validate()?;
    if ds.n_rows() == 0 {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    }

    // Replicates are independent given their derived seeds, so they can run
    // in parallel; results are collected back in replicate order.
    let fits: Result<Vec<(f64, Vec<f64>)>> = (0..rg_cfg.bootstraps)
        .into_par_iter()
        .map(|r| {
            let sample = match mode {
                ResampleMode::Identity => ds.clone(),
                ResampleMode::Bootstrap => {
                    let n = ds.n_rows();
                    let mut drawn = None;
                    for attempt in 0..=MAX_RESAMPLE_RETRIES {
                        let seed = child_seed(rg_cfg.seed, (r * (MAX_RESAMPLE_RETRIES + 1) + attempt) as u64);
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                        let candidate = ds.select_rows(&rows);
                        if candidate.has_both_classes() {
                            drawn = Some(candidate);
                            break;
                        }
                    }
                    drawn.ok_or(Error::BootstrapResampleFailed(MAX_RESAMPLE_RETRIES))?
                }
            };
            let m = fit_sslr(&sample, s_mat, sslr_cfg, None)?;
            Ok((m.intercept, m.coefficients))
        })
        .collect();
    let fits = fits?;

    Ok(BootstrapFits {
        intercepts: fits.iter().map(|(w0, _)| *w0).collect(),
        coefficient_rows: fits.into_iter().map(|(_, w)| w).collect(),
    })
}

/// Collapse replicate fits into per-feature mean and population std.
pub fn summarize_fits(fits: &BootstrapFits) -> BootstrapSummary {
    let b = fits.coefficient_rows.len();
    let p = fits.coefficient_rows.first().map_or(0, Vec::len);
    let bf = b as f64;

    let mut mean_weights = vec![0.0; p];
    for row in &fits.coefficient_rows {
        for (m, w) in mean_weights.iter_mut().zip(row) {
            *m += w;
        }
    }
    for m in &mut mean_weights {
        *m /= bf;
    }

    let mut std_weights = vec![0.0; p];
    for row in &fits.coefficient_rows {
        for ((s, w), m) in std_weights.iter_mut().zip(row).zip(&mean_weights) {
            let c = w - m;
            *s += c * c;
        }
    }
    for s in &mut std_weights {
        *s = (*s / bf).sqrt();
    }

    BootstrapSummary {
        mean_weights,
        std_weights,
        mean_intercept: fits.intercepts.iter().sum::<f64>() / bf,
        bootstraps: b,
    }
}

/// Bootstrap model averaging: resample, fit, and summarize.
pub fn bootstrap_average(
    ds: &Dataset,
    s_mat: &SimilarityMatrix,
    sslr_cfg: &SslrConfig,
    rg_cfg: &RuleGenConfig,
) -> Result<BootstrapSummary> {
    Ok(summarize_fits(&bootstrap_fits(
        ds,
        s_mat,
        sslr_cfg,
        rg_cfg,
        ResampleMode::Bootstrap,
    )?))
}

/// One feature's importance rank entry.
#[derive(Debug, Clone, Copy)]
pub struct RankedFeature {
    pub index: usize,
    /// |mean weight| x population std of the raw data column.
    pub importance: f64,
    pub mean_weight: f64,
}

/// Rank features by importance = |mean weight| x column std, descending,
/// ties broken by ascending feature index. The sign of the mean weight is
/// carried along to distinguish risk from protective factors.
pub fn feature_importance(summary: &BootstrapSummary, ds: &Dataset) -> Result<Vec<RankedFeature>> {
    if summary.mean_weights.len() != ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_features(),
            actual: summary.mean_weights.len(),
        });
    }
    let mut ranked: Vec<RankedFeature> = summary
        .mean_weights
        .iter()
        .enumerate()
        .map(|(index, &mean_weight)| RankedFeature {
            index,
            importance: mean_weight.abs() * ds.column_std(index),
            mean_weight,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(a.index.cmp(&b.index))
    });
    Ok(ranked)
}

/// One score-card item.
#[derive(Debug, Clone)]
pub struct RuleItem {
    pub feature_index: usize,
    pub feature_name: String,
    /// Nonzero integer in [-score_cap, score_cap].
    pub score: i64,
    pub score_std: f64,
}

/// Top-k features with integer scores, ordered by descending |score|,
/// ties by ascending feature index.
#[derive(Debug, Clone)]
pub struct PredictionRule {
    pub items: Vec<RuleItem>,
    pub k: usize,
}

/// Scale the top-k mean weights so the strongest maps to `score_cap`, round
/// half away from zero, and promote anything that rounds to 0 to sign * 1.
pub fn derive_rule(
    summary: &BootstrapSummary,
    ranking: &[RankedFeature],
    rg_cfg: &RuleGenConfig,
    feature_names: &[String],
) -> Result<PredictionRule> {
    rg_cfg.validate()?;
    let k = rg_cfg.k;
    let positive = ranking.iter().take_while(|r| r.importance > 0.0).count();
    if positive < k {
        return Err(Error::TooFewImportantFeatures {
            available: positive,
            k,
        });
    }
    let selected = &ranking[..k];
    let max_abs = selected
        .iter()
        .map(|r| r.mean_weight.abs())
        .fold(0.0f64, f64::max);
    let scale = rg_cfg.score_cap as f64 / max_abs;

    let mut items: Vec<RuleItem> = selected
        .iter()
        .map(|r| {
            let mut score = (scale * r.mean_weight).round() as i64;
            if score == 0 {
                score = if r.mean_weight > 0.0 { 1 } else { -1 };
            }
            RuleItem {
                feature_index: r.index,
                feature_name: feature_names[r.index].clone(),
                score,
                score_std: scale * summary.std_weights[r.index],
            }
        })
        .collect();
    items.sort_by(|a, b| {
        b.score
            .abs()
            .cmp(&a.score.abs())
            .then(a.feature_index.cmp(&b.feature_index))
    });

    Ok(PredictionRule { items, k })
}

/// How rule items read feature values when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// Treat each item as present/absent: x != 0 contributes its score once.
    #[default]
    Binarized,
    /// Multiply the score by the raw feature value.
    RawValue,
}

/// Integer score card total: sum of item scores over present features.
pub fn rule_score(rule: &PredictionRule, x: &[f64]) -> Result<i64> {
    let mut total = 0i64;
    for item in &rule.items {
        let v = *x
            .get(item.feature_index)
            .ok_or(Error::FeatureIndexOutOfRange {
                index: item.feature_index,
                p: x.len(),
            })?;
        if v != 0.0 {
            total += item.score;
        }
    }
    Ok(total)
}

/// Score with a choice of activation; `RawValue` weights items by the
/// feature value and may be fractional.
pub fn rule_score_with(rule: &PredictionRule, x: &[f64], mode: ScoreMode) -> Result<f64> {
    match mode {
        ScoreMode::Binarized => Ok(rule_score(rule, x)? as f64),
        ScoreMode::RawValue => {
            let mut total = 0.0;
            for item in &rule.items {
                let v = *x
                    .get(item.feature_index)
                    .ok_or(Error::FeatureIndexOutOfRange {
                        index: item.feature_index,
                        p: x.len(),
                    })?;
                total += item.score as f64 * v;
            }
            Ok(total)
        }
    }
}

/// Univariate logistic map from integer rule score to outcome probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskCurve {
    pub slope: f64,
    pub intercept: f64,
    /// (score, probability) for every integer in the observed score range.
    pub table: Vec<(i64, f64)>,
}

impl RiskCurve {
    pub fn probability(&self, score: i64) -> f64 {
        sigmoid(self.intercept + self.slope * score as f64)
    }
}

// Newton iterations stop once fitted log-odds saturate past this bound;
// beyond it the probabilities are numerically 0/1 and the slope would
// otherwise diverge under separation.
const MAX_ABS_LOG_ODDS: f64 = 30.0;

/// Fit labels ~ sigmoid(a + b*score) by Newton's method (tolerance 1e-10,
/// iteration-capped under separation) and tabulate every integer score in
/// the observed range.
pub fn fit_risk_curve(rule: &PredictionRule, ds: &Dataset) -> Result<RiskCurve> {
    if ds.n_rows() == 0 {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    }
    let scores: Vec<i64> = (0..ds.n_rows())
        .map(|d| rule_score(rule, ds.row(d)))
        .collect::<Result<_>>()?;
    let min = *scores.iter().min().unwrap();
    let max = *scores.iter().max().unwrap();
    if min == max {
        return Err(Error::ConstantScore);
    }

    let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = ds.labels().iter().map(|&v| v as f64).collect();
    let n = s.len();

    let mut a = 0.0f64;
    let mut b = 0.0f64;
    let objective = |a: f64, b: f64| -> f64 {
        let mut v = 0.0;
        for d in 0..n {
            let z: f64 = a + b * s[d];
            let log1p_exp = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            v += log1p_exp - y[d] * z;
        }
        v
    };
    let mut obj = objective(a, b);

    for _ in 0..100 {
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        let mut h00 = 0.0;
        let mut h01 = 0.0;
        let mut h11 = 0.0;
        for d in 0..n {
            let mu = sigmoid(a + b * s[d]);
            let r = mu - y[d];
            let w = mu * (1.0 - mu);
            g0 += r;
            g1 += r * s[d];
            h00 += w;
            h01 += w * s[d];
            h11 += w * s[d] * s[d];
        }
        if g0.abs().max(g1.abs()) <= 1e-10 {
            break;
        }
        let det = h00 * h11 - h01 * h01;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (h11 * g0 - h01 * g1) / det;
        let db = (h00 * g1 - h01 * g0) / det;

        // Damped Newton: halve the step until the objective improves.
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let na = a - step * da;
            let nb = b - step * db;
            let cand = objective(na, nb);
            if cand <= obj {
                a = na;
                b = nb;
                obj = cand;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        let reach = (a + b * min as f64).abs().max((a + b * max as f64).abs());
        if reach > MAX_ABS_LOG_ODDS {
            break; // saturated: separation in the scores
        }
    }

    let table: Vec<(i64, f64)> = (min..=max)
        .map(|score| (score, sigmoid(a + b * score as f64)))
        .collect();
    Ok(RiskCurve {
        slope: b,
        intercept: a,
        table,
    })
}

/// JSON form of a score card.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleFile {
    pub items: Vec<RuleItemJson>,
    pub risk_curve: RiskCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleItemJson {
    pub feature: String,
    pub score: i64,
    pub std: f64,
}

impl RuleFile {
    pub fn new(rule: &PredictionRule, curve: &RiskCurve) -> Self {
        Self {
            items: rule
                .items
                .iter()
                .map(|it| RuleItemJson {
                    feature: it.feature_name.clone(),
                    score: it.score,
                    std: it.score_std,
                })
                .collect(),
            risk_curve: curve.clone(),
            config: None,
        }
    }

    /// Rebind the stored items to a dataset's columns by feature name.
    pub fn to_rule(&self, feature_names: &[String]) -> Result<PredictionRule> {
        let items: Vec<RuleItem> = self
            .items
            .iter()
            .map(|it| {
                let feature_index = feature_names
                    .iter()
                    .position(|n| *n == it.feature)
                    .ok_or_else(|| Error::MissingFeature(it.feature.clone()))?;
                Ok(RuleItem {
                    feature_index,
                    feature_name: it.feature.clone(),
                    score: it.score,
                    score_std: it.std,
                })
            })
            .collect::<Result<_>>()?;
        let k = items.len();
        Ok(PredictionRule { items, k })
    }
}

/// Human-readable score card, one numbered line per item.
pub fn render_score_card(rule: &PredictionRule) -> String {
    let name_width = rule
        .items
        .iter()
        .map(|it| it.feature_name.len())
        .max()
        .unwrap_or(0)
        .max(4);
    let mut out = String::new();
    out.push_str(&format!("{:<4}{:<name_width$}  score\n", "", "item"));
    for (i, item) in rule.items.iter().enumerate() {
        out.push_str(&format!(
            "{:<4}{:<name_width$}  {} (±{:.1})\n",
            format!("{}.", i + 1),
            item.feature_name,
            item.score,
            item.score_std
        ));
    }
    out
}

/// Human-readable risk table: score -> probability.
pub fn render_risk_table(curve: &RiskCurve) -> String {
    let mut out = String::from("score  risk\n");
    for (score, prob) in &curve.table {
        out.push_str(&format!("{score:>5}  {:.1}%\n", prob * 100.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::cosine_similarity_matrix;
    use crate::synth::{generate, SynthConfig};

    fn summary_from(mean: Vec<f64>, std: Vec<f64>) -> BootstrapSummary {
        BootstrapSummary {
            mean_weights: mean,
            std_weights: std,
            mean_intercept: 0.0,
            bootstraps: 1,
        }
    }

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn identity_resample_reproduces_single_fit() {
        let cfg = SynthConfig {
            n: 80,
            p: 4,
            group_size: 1,
            within_group_correlation: 0.0,
            true_weights: vec![1.5, 0.0, 0.0, 0.0],
            intercept: 0.0,
            seed: 5,
            count_mode: false,
        };
        let ds = generate(&cfg).unwrap();
        let s = cosine_similarity_matrix(&ds).unwrap();
        let sslr_cfg = SslrConfig {
            lambda: 1.0,
            ..Default::default()
        };
        let rg = RuleGenConfig {
            bootstraps: 1,
            k: 2,
            seed: 3,
            score_cap: 10,
        };
        let fits = bootstrap_fits(&ds, &s, &sslr_cfg, &rg, ResampleMode::Identity).unwrap();
        let summary = summarize_fits(&fits);
        let single = fit_sslr(&ds, &s, &sslr_cfg, None).unwrap();
        assert_eq!(summary.mean_weights, single.coefficients);
        assert_eq!(summary.mean_intercept, single.intercept);
        assert!(summary.std_weights.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn bootstrap_average_is_deterministic() {
        let cfg = SynthConfig {
            n: 60,
            p: 3,
            group_size: 1,
            within_group_correlation: 0.0,
            true_weights: vec![2.0, 0.0, 0.0],
            intercept: 0.0,
            seed: 8,
            count_mode: false,
        };
        let ds = generate(&cfg).unwrap();
        let s = cosine_similarity_matrix(&ds).unwrap();
        let sslr_cfg = SslrConfig {
            lambda: 0.5,
            ..Default::default()
        };
        let rg = RuleGenConfig {
            bootstraps: 8,
            k: 2,
            seed: 11,
            score_cap: 10,
        };
        let a = bootstrap_average(&ds, &s, &sslr_cfg, &rg).unwrap();
        let b = bootstrap_average(&ds, &s, &sslr_cfg, &rg).unwrap();
        assert_eq!(a.mean_weights, b.mean_weights);
        assert_eq!(a.std_weights, b.std_weights);
        assert_eq!(a.mean_intercept, b.mean_intercept);
    }

    #[test]
    fn bootstrap_results_do_not_depend_on_thread_count() {
        let cfg = SynthConfig {
            n: 70,
            p: 4,
            group_size: 2,
            within_group_correlation: 0.5,
            true_weights: vec![1.5, 0.0, -1.0, 0.0],
            intercept: 0.0,
            seed: 13,
            count_mode: false,
        };
        let ds = generate(&cfg).unwrap();
        let s = cosine_similarity_matrix(&ds).unwrap();
        let sslr_cfg = SslrConfig {
            lambda: 1.0,
            ..Default::default()
        };
        let rg = RuleGenConfig {
            bootstraps: 10,
            k: 2,
            seed: 5,
            score_cap: 10,
        };
        let parallel = bootstrap_average(&ds, &s, &sslr_cfg, &rg).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| bootstrap_average(&ds, &s, &sslr_cfg, &rg).unwrap());
        assert_eq!(parallel.mean_weights, single.mean_weights);
        assert_eq!(parallel.std_weights, single.std_weights);
        assert_eq!(parallel.mean_intercept, single.mean_intercept);
    }

    #[test]
    fn dominant_feature_keeps_its_sign_in_every_replicate() {
        let cfg = SynthConfig {
            n: 120,
            p: 4,
            group_size: 1,
            within_group_correlation: 0.0,
            true_weights: vec![3.0, 0.0, 0.0, 0.0],
            intercept: 0.0,
            seed: 21,
            count_mode: false,
        };
        let ds = generate(&cfg).unwrap();
        let s = cosine_similarity_matrix(&ds).unwrap();
        let sslr_cfg = SslrConfig {
            lambda: 2.0,
            ..Default::default()
        };
        let rg = RuleGenConfig {
            bootstraps: 100,
            k: 1,
            seed: 17,
            score_cap: 10,
        };
        let fits = bootstrap_fits(&ds, &s, &sslr_cfg, &rg, ResampleMode::Bootstrap).unwrap();
        assert_eq!(fits.coefficient_rows.len(), 100);
        for (r, row) in fits.coefficient_rows.iter().enumerate() {
            assert!(row[0] > 0.0, "replicate {r} lost the dominant feature sign");
        }
        let summary = summarize_fits(&fits);
        assert!(summary.mean_weights[0] > 0.0);
    }

    #[test]
    fn importance_zero_for_constant_column_or_zero_weight() {
        // Column 0 constant, column 1 varies.
        let ds = Dataset::new(
            vec![2.0, 0.0, 2.0, 1.0, 2.0, 4.0, 2.0, 5.0],
            vec![0, 1, 0, 1],
            names(2),
            "y".into(),
        )
        .unwrap();
        let summary = summary_from(vec![5.0, 0.0], vec![0.1, 0.1]);
        let ranked = feature_importance(&summary, &ds).unwrap();
        assert!(ranked.iter().all(|r| r.importance == 0.0));
    }

    #[test]
    fn importance_ranks_by_weight_times_std() {
        // Column stds 2 and 1 (population): values (0,4) and (0,2).
        let ds = Dataset::new(
            vec![0.0, 0.0, 4.0, 2.0],
            vec![0, 1],
            names(2),
            "y".into(),
        )
        .unwrap();
        let summary = summary_from(vec![0.5, -0.5], vec![0.0, 0.0]);
        let ranked = feature_importance(&summary, &ds).unwrap();
        assert_eq!(ranked[0].index, 0);
        assert!((ranked[0].importance - 1.0).abs() < 1e-12);
        assert_eq!(ranked[1].index, 1);
        assert!((ranked[1].importance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn derive_rule_scales_and_rounds_half_away_from_zero() {
        let summary = summary_from(vec![0.82, 0.41, -0.25, 0.03], vec![0.05, 0.04, 0.02, 0.01]);
        let ranking: Vec<RankedFeature> = (0..4)
            .map(|i| RankedFeature {
                index: i,
                importance: summary.mean_weights[i].abs(),
                mean_weight: summary.mean_weights[i],
            })
            .collect();
        let mut ranking = ranking;
        ranking.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        let rg = RuleGenConfig {
            k: 4,
            bootstraps: 1,
            seed: 0,
            score_cap: 10,
        };
        let rule = derive_rule(&summary, &ranking, &rg, &names(4)).unwrap();
        let scores: Vec<i64> = rule.items.iter().map(|it| it.score).collect();
        assert_eq!(scores, vec![10, 5, -3, 1]);
        // The rounded-to-zero weight 0.03 was promoted to +1.
        assert_eq!(rule.items[3].feature_index, 3);
        // score_std scales with the same factor.
        let c = 10.0 / 0.82;
        assert!((rule.items[0].score_std - c * 0.05).abs() < 1e-12);
    }

    #[test]
    fn single_feature_maps_to_cap() {
        let summary = summary_from(vec![-0.4], vec![0.02]);
        let ranking = vec![RankedFeature {
            index: 0,
            importance: 0.4,
            mean_weight: -0.4,
        }];
        let rg = RuleGenConfig {
            k: 1,
            bootstraps: 1,
            seed: 0,
            score_cap: 10,
        };
        let rule = derive_rule(&summary, &ranking, &rg, &names(1)).unwrap();
        assert_eq!(rule.items[0].score, -10);
    }

    #[test]
    fn derive_rule_requires_k_important_features() {
        let summary = summary_from(vec![1.0, 0.0], vec![0.0, 0.0]);
        let ranking = vec![
            RankedFeature {
                index: 0,
                importance: 1.0,
                mean_weight: 1.0,
            },
            RankedFeature {
                index: 1,
                importance: 0.0,
                mean_weight: 0.0,
            },
        ];
        let rg = RuleGenConfig {
            k: 2,
            bootstraps: 1,
            seed: 0,
            score_cap: 10,
        };
        let err = derive_rule(&summary, &ranking, &rg, &names(2)).unwrap_err();
        assert!(matches!(
            err,
            Error::TooFewImportantFeatures { available: 1, k: 2 }
        ));
    }

    #[test]
    fn rank_is_invariant_to_positive_weight_scaling() {
        let mean = vec![0.7, -0.3, 0.5, 0.1];
        let std = vec![0.1, 0.2, 0.1, 0.05];
        let ds = generate(&SynthConfig {
            n: 50,
            p: 4,
            group_size: 1,
            within_group_correlation: 0.0,
            true_weights: vec![0.0; 4],
            intercept: 0.0,
            seed: 31,
            count_mode: false,
        })
        .unwrap();
        let rg = RuleGenConfig {
            k: 4,
            bootstraps: 1,
            seed: 0,
            score_cap: 10,
        };
        let base = summary_from(mean.clone(), std.clone());
        let scaled = summary_from(
            mean.iter().map(|w| w * 37.5).collect(),
            std.iter().map(|s| s * 37.5).collect(),
        );
        let rank_a = feature_importance(&base, &ds).unwrap();
        let rank_b = feature_importance(&scaled, &ds).unwrap();
        let order_a: Vec<usize> = rank_a.iter().map(|r| r.index).collect();
        let order_b: Vec<usize> = rank_b.iter().map(|r| r.index).collect();
        assert_eq!(order_a, order_b);
        let rule_a = derive_rule(&base, &rank_a, &rg, &names(4)).unwrap();
        let rule_b = derive_rule(&scaled, &rank_b, &rg, &names(4)).unwrap();
        let scores_a: Vec<i64> = rule_a.items.iter().map(|it| it.score).collect();
        let scores_b: Vec<i64> = rule_b.items.iter().map(|it| it.score).collect();
        assert_eq!(scores_a, scores_b);
    }

    fn toy_rule(scores: &[(usize, i64)]) -> PredictionRule {
        PredictionRule {
            items: scores
                .iter()
                .map(|&(feature_index, score)| RuleItem {
                    feature_index,
                    feature_name: format!("f{feature_index}"),
                    score,
                    score_std: 0.0,
                })
                .collect(),
            k: scores.len(),
        }
    }

    #[test]
    fn rule_score_examples() {
        let rule = toy_rule(&[(0, 10), (1, -3)]);
        assert_eq!(rule_score(&rule, &[0.0, 0.0]).unwrap(), 0);
        assert_eq!(rule_score(&rule, &[2.0, 1.0]).unwrap(), 7);
        assert_eq!(rule_score(&rule, &[1.0, 0.0]).unwrap(), 10);
        assert!(rule_score(&rule, &[1.0]).is_err());
    }

    #[test]
    fn raw_scoring_weights_by_value() {
        let rule = toy_rule(&[(0, 10), (1, -3)]);
        let raw = rule_score_with(&rule, &[0.5, 2.0], ScoreMode::RawValue).unwrap();
        assert_eq!(raw, 5.0 - 6.0);
        let bin = rule_score_with(&rule, &[0.5, 2.0], ScoreMode::Binarized).unwrap();
        assert_eq!(bin, 7.0);
    }

    #[test]
    fn risk_curve_flat_when_labels_ignore_scores() {
        // Labels alternate independent of score.
        let n = 400;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for d in 0..n {
            values.push((d % 5) as f64); // feature present for d%5 != 0
            labels.push(((d / 2) % 2) as u8);
        }
        let ds = Dataset::new(values, labels, names(1), "y".into()).unwrap();
        let rule = toy_rule(&[(0, 10)]);
        let curve = fit_risk_curve(&rule, &ds).unwrap();
        let base = ds.base_rate();
        for (_, prob) in &curve.table {
            assert!((prob - base).abs() <= 0.02, "prob {prob} vs base {base}");
        }
    }

    #[test]
    fn risk_curve_saturates_under_separation() {
        // Score 0 -> label 0, score 10 -> label 1, perfectly separated.
        let n = 60;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for d in 0..n {
            let present = d % 2 == 0;
            values.push(present as u8 as f64);
            labels.push(present as u8);
        }
        let ds = Dataset::new(values, labels, names(1), "y".into()).unwrap();
        let rule = toy_rule(&[(0, 10)]);
        let curve = fit_risk_curve(&rule, &ds).unwrap();
        assert!(curve.slope > 0.0);
        let first = curve.table.first().unwrap().1;
        let last = curve.table.last().unwrap().1;
        assert!(first < 0.01, "min-score risk {first}");
        assert!(last > 0.99, "max-score risk {last}");
        // Strictly monotone despite the saturation cap.
        for pair in curve.table.windows(2) {
            assert!(pair[1].1 > pair[0].1);
        }
        for (_, prob) in &curve.table {
            assert!(*prob > 0.0 && *prob < 1.0);
        }
    }

    #[test]
    fn risk_curve_rejects_constant_scores() {
        let ds = Dataset::new(
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0, 1, 0, 1],
            names(1),
            "y".into(),
        )
        .unwrap();
        let rule = toy_rule(&[(0, 10)]);
        assert!(matches!(
            fit_risk_curve(&rule, &ds),
            Err(Error::ConstantScore)
        ));
    }

    #[test]
    fn score_card_renders_item_lines() {
        let mut rule = toy_rule(&[(0, 10), (1, -3)]);
        rule.items[0].feature_name = "twin pregnancy flag".into();
        rule.items[0].score_std = 0.7;
        rule.items[1].feature_name = "late booking".into();
        rule.items[1].score_std = 0.52;
        let card = render_score_card(&rule);
        assert!(card.contains("1.  twin pregnancy flag"));
        assert!(card.contains("10 (±0.7)"));
        assert!(card.contains("-3 (±0.5)"));
    }

    #[test]
    fn rule_file_round_trip_rebinds_by_name() {
        let rule = toy_rule(&[(1, 10), (0, -2)]);
        let curve = RiskCurve {
            slope: 0.3,
            intercept: -2.0,
            table: vec![(-2, 0.1), (-1, 0.12), (0, 0.15)],
        };
        let file = RuleFile::new(&rule, &curve);
        let json = serde_json::to_string(&file).unwrap();
        let parsed: RuleFile = serde_json::from_str(&json).unwrap();
        // Rebind against a reordered feature universe.
        let universe = vec!["f1".to_string(), "spacer".to_string(), "f0".to_string()];
        let rebound = parsed.to_rule(&universe).unwrap();
        assert_eq!(rebound.items[0].feature_index, 0); // f1 first by |score|
        assert_eq!(rebound.items[1].feature_index, 2);
        assert!(parsed.to_rule(&["nope".to_string()]).is_err());
    }
}
