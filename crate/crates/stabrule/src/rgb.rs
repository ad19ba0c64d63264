//! Randomized gradient boosting: sequential shrunken regression trees on
//! logistic loss, each tree restricted to a random feature subset and each
//! node split to a random sub-subset, grown best-first under a leaf budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::sslr::sigmoid;

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RgbConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub per_tree_features: usize,
    pub per_node_features: usize,
    pub row_subsample: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl RgbConfig {
    /// Defaults: 500 trees, rate 0.03, 256 leaves, m = floor(p/3) features
    /// per tree and ceil(m/3) per node, half-row subsampling.
    pub fn defaults_for(p: usize, seed: u64) -> Self {
        let per_tree = (p / 3).max(1);
        let per_node = per_tree.div_ceil(3).max(1);
        Self {
            n_trees: 500,
            learning_rate: 0.03,
            max_leaves: 256,
            per_tree_features: per_tree,
            per_node_features: per_node,
            row_subsample: 0.5,
            min_samples_leaf: 5,
            seed,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be in (0,1), got {}",
                self.learning_rate
            )));
        }
        if self.max_leaves == 0 {
            return Err(Error::InvalidConfig("max_leaves must be at least 1".into()));
        }
        if self.per_tree_features == 0 || self.per_tree_features > p {
            return Err(Error::InvalidConfig(format!(
                "per_tree_features must be in [1, p={p}], got {}",
                self.per_tree_features
            )));
        }
        if self.per_node_features == 0 || self.per_node_features > self.per_tree_features {
            return Err(Error::InvalidConfig(format!(
                "per_node_features must be in [1, per_tree_features={}], got {}",
                self.per_tree_features, self.per_node_features
            )));
        }
        if !(self.row_subsample > 0.0 && self.row_subsample <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "row_subsample must be in (0,1], got {}",
                self.row_subsample
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One tree node; children are indices into the tree's node array.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree with its assigned feature subset kept for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub feature_subset: Vec<usize>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }
}

/// Base log-odds plus the shrunken tree sequence, applied in training order.
#[derive(Debug, Clone)]
pub struct RgbEnsemble {
    pub initial_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl RgbEnsemble {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.initial_score
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict(x))
                .sum::<f64>()
    }
}

struct PendingLeaf {
    node_id: usize,
    rows: Vec<usize>,
    split: Option<Candidate>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn leaf_value(rows: &[usize], residuals: &[f64], hessians: &[f64]) -> f64 {
    let num: f64 = rows.iter().map(|&d| residuals[d]).sum();
    let den: f64 = rows.iter().map(|&d| hessians[d]).sum();
    num / den
}

/// Best squared-error split of `rows` over a fresh per-node feature draw.
/// Candidates are midpoints between consecutive distinct values; both
/// children must keep at least `min_samples_leaf` rows. Ties resolve to the
/// lowest feature index, then the lowest threshold.
fn best_split(
    ds: &Dataset,
    rows: &[usize],
    residuals: &[f64],
    feature_subset: &[usize],
    per_node_features: usize,
    min_samples_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let take = per_node_features.min(feature_subset.len());
    let mut drawn: Vec<usize> = rand::seq::index::sample(rng, feature_subset.len(), take)
        .into_iter()
        .map(|i| feature_subset[i])
        .collect();
    drawn.sort_unstable();

    let total_sum: f64 = rows.iter().map(|&d| residuals[d]).sum();
    let total_count = rows.len();
    let base = total_sum * total_sum / total_count as f64;

    let mut best: Option<Candidate> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for feature in drawn {
        pairs.clear();
        pairs.extend(rows.iter().map(|&d| (ds.value(d, feature), residuals[d])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_sum = 0.0;
        let mut left_count = 0usize;
        let mut i = 0;
        while i < pairs.len() {
            // Consume a run of equal values; a split can only fall after it.
            let v = pairs[i].0;
            while i < pairs.len() && pairs[i].0 == v {
                left_sum += pairs[i].1;
                left_count += 1;
                i += 1;
            }
            if i == pairs.len() {
                break;
            }
            let right_count = total_count - left_count;
            if left_count < min_samples_leaf || right_count < min_samples_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let gain = left_sum * left_sum / left_count as f64
                + right_sum * right_sum / right_count as f64
                - base;
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    feature,
                    threshold: 0.5 * (v + pairs[i].0),
                });
            }
        }
    }
    best
}

/// Grow one regression tree best-first: always split the frontier leaf with
/// the largest gain, stopping at the leaf budget or when nothing gains.
/// Leaf values are Newton steps sum(residual)/sum(hessian).
pub fn fit_gradient_tree(
    ds: &Dataset,
    rows: &[usize],
    residuals: &[f64],
    hessians: &[f64],
    feature_subset: &[usize],
    cfg: &RgbConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("tree needs at least one row".into()));
    }
    if rows.iter().any(|&d| hessians[d] <= 0.0) {
        return Err(Error::InvalidConfig("hessians must be strictly positive".into()));
    }

    let mut nodes = vec![TreeNode::Leaf {
        value: leaf_value(rows, residuals, hessians),
    }];
    let mut frontier: Vec<PendingLeaf> = Vec::new();
    let root_split = if cfg.max_leaves > 1 {
        best_split(
            ds,
            rows,
            residuals,
            feature_subset,
            cfg.per_node_features,
            cfg.min_samples_leaf,
            rng,
        )
    } else {
        None
    };
    frontier.push(PendingLeaf {
        node_id: 0,
        rows: rows.to_vec(),
        split: root_split,
    });
    let mut leaf_count = 1usize;

    while leaf_count < cfg.max_leaves {
        // Lowest-index wins ties, so scan keeps the first strict maximum.
        let mut chosen: Option<usize> = None;
        for (i, pending) in frontier.iter().enumerate() {
            if let Some(c) = pending.split {
                if chosen.is_none_or(|j| c.gain > frontier[j].split.unwrap().gain) {
                    chosen = Some(i);
                }
            }
        }
        let Some(at) = chosen else { break };
        let pending = frontier.swap_remove(at);
        let Candidate {
            feature, threshold, ..
        } = pending.split.unwrap();

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = pending
            .rows
            .iter()
            .partition(|&&d| ds.value(d, feature) < threshold);

        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes.push(TreeNode::Leaf {
            value: leaf_value(&left_rows, residuals, hessians),
        });
        nodes.push(TreeNode::Leaf {
            value: leaf_value(&right_rows, residuals, hessians),
        });
        nodes[pending.node_id] = TreeNode::Split {
            feature,
            threshold,
            left: left_id,
            right: right_id,
        };
        leaf_count += 1;

        for (node_id, child_rows) in [(left_id, left_rows), (right_id, right_rows)] {
            let split = if leaf_count < cfg.max_leaves {
                best_split(
                    ds,
                    &child_rows,
                    residuals,
                    feature_subset,
                    cfg.per_node_features,
                    cfg.min_samples_leaf,
                    rng,
                )
            } else {
                None
            };
            frontier.push(PendingLeaf {
                node_id,
                rows: child_rows,
                split,
            });
        }
    }

    Ok(RegressionTree {
        nodes,
        feature_subset: feature_subset.to_vec(),
    })
}

/// Fit the boosted ensemble: start from the base-rate log-odds, then add
/// `n_trees` shrunken Newton trees, each on a fresh feature subset and row
/// subsample. Deterministic given the seed.
pub fn fit_rgb(ds: &Dataset, cfg: &RgbConfig) -> Result<RgbEnsemble> {
    let p = ds.n_features();
    let n = ds.n_rows();
    cfg.validate(p)?;
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let base_rate = ds.base_rate();
    let initial_score = (base_rate / (1.0 - base_rate)).ln();
    let mut scores = vec![initial_score; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_sampled = ((cfg.row_subsample * n as f64).ceil() as usize).clamp(1, n);

    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    for _ in 0..cfg.n_trees {
        let mut feature_subset: Vec<usize> =
            rand::seq::index::sample(&mut rng, p, cfg.per_tree_features)
                .into_iter()
                .collect();
        feature_subset.sort_unstable();

        let mut rows: Vec<usize> = rand::seq::index::sample(&mut rng, n, n_sampled)
            .into_iter()
            .collect();
        rows.sort_unstable();

        for d in 0..n {
            let mu = sigmoid(scores[d]);
            residuals[d] = ds.label(d) as f64 - mu;
            hessians[d] = mu * (1.0 - mu);
        }

        let tree = fit_gradient_tree(ds, &rows, &residuals, &hessians, &feature_subset, cfg, &mut rng)?;
        for (d, score) in scores.iter_mut().enumerate() {
            *score += cfg.learning_rate * tree.predict(ds.row(d));
        }
        trees.push(tree);
    }

    Ok(RgbEnsemble {
        initial_score,
        learning_rate: cfg.learning_rate,
        trees,
    })
}

/// P(y=1 | x) under the ensemble.
pub fn rgb_predict_proba(model: &RgbEnsemble, x: &[f64]) -> Result<f64> {
    for tree in &model.trees {
        if let Some(max) = tree.max_feature_index() {
            if max >= x.len() {
                return Err(Error::FeatureIndexOutOfRange {
                    index: max,
                    p: x.len(),
                });
            }
        }
    }
    Ok(sigmoid(model.raw_score(x)))
}

/// On-disk model format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RgbModelFile {
    pub f0: f64,
    pub rate: f64,
    pub trees: Vec<RegressionTree>,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl RgbModelFile {
    pub fn new(model: &RgbEnsemble, feature_names: &[String]) -> Self {
        Self {
            f0: model.initial_score,
            rate: model.learning_rate,
            trees: model.trees.clone(),
            feature_names: feature_names.to_vec(),
            config: None,
        }
    }

    pub fn ensemble(&self) -> RgbEnsemble {
        RgbEnsemble {
            initial_score: self.f0,
            learning_rate: self.rate,
            trees: self.trees.clone(),
        }
    }
}
