use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{Node, RegressionTree, Split};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 regularisation on leaf weights.
    pub lambda: f64,
    /// Minimum gain required to keep a split.
    pub gamma: f64,
    pub min_child_weight: f64,
    /// `None` starts from the mean target.
    pub base_score: Option<f64>,
}

impl Default for BoosterParams {
    fn default() -> Self {
        Self {
            n_rounds: 10_000,
            max_depth: 10,
            learning_rate: 0.02,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: None,
        }
    }
}

impl BoosterParams {
    pub fn check(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} not in (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(Error::InvalidArgument(
                "lambda, gamma and min_child_weight must be non-negative".into(),
            ));
        }
        if let Some(b) = self.base_score {
            if !b.is_finite() {
                return Err(Error::InvalidArgument("base score must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Additive tree ensemble: `base_score + learning_rate · Σ tree(x)`, with
/// trees storing unshrunk leaf weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub format_version: u32,
    pub params: BoosterParams,
    pub base_score: f64,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub trees: Vec<RegressionTree>,
}

impl BoostedModel {
    pub fn new(params: BoosterParams, base_score: f64, feature_names: Vec<String>, trees: Vec<RegressionTree>) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            params,
            base_score,
            n_features: feature_names.len(),
            feature_names,
            trees,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.params.learning_rate
    }

    pub fn check(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if self.feature_names.len() != self.n_features {
            return Err(Error::Model("feature name count differs from n_features".into()));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.check().map_err(|e| Error::Model(format!("tree {i}: {e}")))?;
            if t.max_feature().is_some_and(|f| f >= self.n_features) {
                return Err(Error::Model(format!("tree {i} splits on an unknown feature")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: BoostedModel = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        model.check()?;
        Ok(model)
    }

    fn raw_sum(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum()
    }
}

pub fn predict(model: &BoostedModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: x.len(),
        });
    }
    Ok(model.base_score + model.learning_rate() * model.raw_sum(x))
}

/// Trains an ensemble on row-major `features` (`n × m`).
pub fn train(features: &[Vec<f64>], targets: &[f64], feature_names: &[String], params: &BoosterParams) -> Result<BoostedModel> {
    train_traced(features, targets, feature_names, params).map(|(m, _)| m)
}

/// Like [`train`], also returning the training mean squared error after
/// each round (entry 0 is the loss of the base score alone).
pub fn train_traced(
    features: &[Vec<f64>],
    targets: &[f64],
    feature_names: &[String],
    params: &BoosterParams,
) -> Result<(BoostedModel, Vec<f64>)> {
    params.check()?;
    let n = features.len();
    if n == 0 || targets.is_empty() {
        return Err(Error::InsufficientData("empty training data".into()));
    }
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: targets.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData("training needs at least 2 samples".into()));
    }
    let m = feature_names.len();
    if let Some(row) = features.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: row.len(),
        });
    }
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("targets must be finite".into()));
    }
    if features.iter().flatten().any(|v| v.is_infinite()) {
        return Err(Error::InvalidArgument("features must be finite or NaN".into()));
    }

    let base = params
        .base_score
        .unwrap_or_else(|| targets.iter().sum::<f64>() / n as f64);
    let lr = params.learning_rate;

    // Per-feature row order by value (NaN excluded), ties by row index.
    let presorted: Vec<Vec<usize>> = (0..m)
        .map(|f| {
            let mut rows: Vec<usize> = (0..n).filter(|&i| !features[i][f].is_nan()).collect();
            rows.sort_by(|&a, &b| features[a][f].total_cmp(&features[b][f]).then(a.cmp(&b)));
            rows
        })
        .collect();

    let mse = |tree_sum: &[f64]| -> f64 {
        tree_sum
            .iter()
            .zip(targets)
            .map(|(s, y)| {
                let r = base + lr * s - y;
                r * r
            })
            .sum::<f64>()
            / n as f64
    };

    // Running Σ tree(x_i); predictions are base + lr·sum, exactly as `predict`.
    let mut tree_sum = vec![0.0; n];
    let mut history = Vec::with_capacity(params.n_rounds + 1);
    history.push(mse(&tree_sum));
    let mut trees = Vec::with_capacity(params.n_rounds);
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    for _ in 0..params.n_rounds {
        for i in 0..n {
            grad[i] = base + lr * tree_sum[i] - targets[i];
        }
        let mut builder = TreeBuilder {
            features,
            grad: &grad,
            hess: &hess,
            params,
            nodes: Vec::new(),
            leaf_of: vec![0; n],
        };
        builder.grow((0..n).collect(), presorted.clone(), 0);
        let TreeBuilder { nodes, leaf_of, .. } = builder;
        for i in 0..n {
            tree_sum[i] += nodes[leaf_of[i]].value;
        }
        trees.push(RegressionTree { nodes });
        history.push(mse(&tree_sum));
    }

    Ok((
        BoostedModel::new(params.clone(), base, feature_names.to_vec(), trees),
        history,
    ))
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoosterParams,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    /// Grows the subtree over `rows` (ascending) and returns its node index.
    fn grow(&mut self, rows: Vec<usize>, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let (g, h) = rows
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]));
        let idx = self.nodes.len();
        self.nodes.push(Node::leaf(-g / (h + self.params.lambda), h));

        let best = if depth < self.params.max_depth {
            self.best_split(&sorted, rows.len(), g, h)
        } else {
            None
        };
        let Some(best) = best else {
            for &i in &rows {
                self.leaf_of[i] = idx;
            }
            return idx;
        };

        let goes_left = |i: usize| {
            let v = self.features[i][best.feature];
            if v.is_nan() {
                best.missing_left
            } else {
                v < best.threshold
            }
        };
        let mut mask = vec![false; self.features.len()];
        for &i in &rows {
            mask[i] = goes_left(i);
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| mask[i]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| mask[i]);
            left_sorted.push(l);
            right_sorted.push(r);
        }

        let left = self.grow(left_rows, left_sorted, depth + 1);
        let right = self.grow(right_rows, right_sorted, depth + 1);
        self.nodes[idx].split = Some(Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        });
        idx
    }

    /// Exact greedy search. Candidates are midpoints between consecutive
    /// distinct values; rows missing the feature join the side with the
    /// larger hessian sum. Ties keep the lowest feature, then the lowest
    /// threshold.
    fn best_split(&self, sorted: &[Vec<usize>], n_rows: usize, g: f64, h: f64) -> Option<Candidate> {
        let parent = self.score(g, h);
        let mcw = self.params.min_child_weight;
        let mut best: Option<Candidate> = None;
        for (f, list) in sorted.iter().enumerate() {
            if list.len() < 2 {
                continue;
            }
            let (gp, hp) = list
                .iter()
                .fold((0.0, 0.0), |(a, b), &i| (a + self.grad[i], b + self.hess[i]));
            let (g_miss, h_miss) = (g - gp, h - hp);
            let has_missing = list.len() < n_rows;
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..list.len() - 1 {
                let i = list[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let (a, b) = (self.features[i][f], self.features[list[k + 1]][f]);
                if a == b {
                    continue;
                }
                let (gr, hr) = (gp - gl, hp - hl);
                let missing_left = !has_missing || hl >= hr;
                let (gl2, hl2, gr2, hr2) = if has_missing {
                    if missing_left {
                        (gl + g_miss, hl + h_miss, gr, hr)
                    } else {
                        (gl, hl, gr + g_miss, hr + h_miss)
                    }
                } else {
                    (gl, hl, gr, hr)
                };
                if hl2 < mcw || hr2 < mcw {
                    continue;
                }
                let gain = 0.5 * (self.score(gl2, hl2) + self.score(gr2, hr2) - parent) - self.params.gamma;
                if gain > best.as_ref().map_or(0.0, |c| c.gain) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold,
                        missing_left,
                    });
                }
            }
        }
        best
    }
}
