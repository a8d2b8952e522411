//! Path-dependent TreeSHAP.
//!
//! Absent features are marginalised with the cover-weighted conditional
//! expectation of the tree: at a split on an absent feature both children
//! are visited, weighted by the fraction of training cover each received.
//! The polynomial-time recursion tracks, along the current root-to-node
//! path, the proportion of feature subsets of every size that reach it.

use serde::Serialize;

use super::booster::BoostedModel;
use super::tree::RegressionTree;
use crate::error::{Error, Result};
use crate::stats::pearson;

pub const MAX_BRUTE_FORCE_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapExplanation {
    /// Expected model output over the training distribution.
    pub base: f64,
    pub phi: Vec<f64>,
    /// The explained input.
    pub features: Vec<f64>,
    pub prediction: f64,
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

/// Appends a split to the path, updating the subset-size weights.
fn extend(path: &mut Vec<PathElem>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElem {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / d1;
    }
}

/// Removes element `index` from the path, undoing its [`extend`].
fn unwind(path: &mut Vec<PathElem>, index: usize) {
    let depth = path.len() - 1;
    let PathElem {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one_fraction);
            next = tmp - path[i].weight * zero_fraction * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total weight the path would have with element `index` removed.
fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElem {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next = path[i].weight - tmp * zero_fraction * ((depth - i) as f64 / d1);
        } else if zero_fraction != 0.0 {
            total += (path[i].weight / zero_fraction) / ((depth - i) as f64 / d1);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &RegressionTree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElem>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
    scale: f64,
) {
    extend(&mut path, zero_fraction, one_fraction, feature);
    let current = &tree.nodes[node];
    let Some(split) = &current.split else {
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            let e = &path[i];
            let f = e.feature.expect("non-root path element has a feature");
            phi[f] += w * (e.one_fraction - e.zero_fraction) * current.value * scale;
        }
        return;
    };

    let hot = tree.route(split, x);
    let cold = if hot == split.left { split.right } else { split.left };
    let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
    if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split.feature)) {
        incoming_zero = path[k].zero_fraction;
        incoming_one = path[k].one_fraction;
        unwind(&mut path, k);
    }
    let hot_fraction = tree.nodes[hot].cover / current.cover;
    let cold_fraction = tree.nodes[cold].cover / current.cover;
    recurse(
        tree,
        x,
        phi,
        hot,
        path.clone(),
        hot_fraction * incoming_zero,
        incoming_one,
        Some(split.feature),
        scale,
    );
    recurse(
        tree,
        x,
        phi,
        cold,
        path,
        cold_fraction * incoming_zero,
        0.0,
        Some(split.feature),
        scale,
    );
}

fn check_input(model: &BoostedModel, x: &[f64]) -> Result<()> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: x.len(),
        });
    }
    for (i, t) in model.trees.iter().enumerate() {
        t.check()
            .map_err(|e| Error::Model(format!("tree {i}: cover metadata unusable for SHAP: {e}")))?;
    }
    Ok(())
}

/// Expected model output: base score plus the shrunk cover-weighted leaf
/// means of every tree.
pub fn expected_output(model: &BoostedModel) -> f64 {
    model.base_score
        + model.learning_rate() * model.trees.iter().map(RegressionTree::expected_value).sum::<f64>()
}

/// SHAP values of `x` under `model`, summed over trees and scaled by the
/// learning rate. `base + Σφ` reproduces the prediction.
pub fn tree_shap(model: &BoostedModel, x: &[f64]) -> Result<ShapExplanation> {
    check_input(model, x)?;
    let lr = model.learning_rate();
    let mut phi = vec![0.0; model.n_features];
    for tree in &model.trees {
        recurse(tree, x, &mut phi, 0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None, lr);
    }
    Ok(ShapExplanation {
        base: expected_output(model),
        phi,
        features: x.to_vec(),
        prediction: super::booster::predict(model, x)?,
    })
}

/// Conditional expectation of a tree's output when only the features in
/// `present` (a bitmask) are known.
fn conditional_expectation(tree: &RegressionTree, node: usize, x: &[f64], present: u32) -> f64 {
    let n = &tree.nodes[node];
    match &n.split {
        None => n.value,
        Some(s) => {
            if present & (1 << s.feature) != 0 {
                conditional_expectation(tree, tree.route(s, x), x, present)
            } else {
                let (l, r) = (&tree.nodes[s.left], &tree.nodes[s.right]);
                (l.cover * conditional_expectation(tree, s.left, x, present)
                    + r.cover * conditional_expectation(tree, s.right, x, present))
                    / n.cover
            }
        }
    }
}

/// Exact Shapley values by enumerating all `2^m` feature subsets, with the
/// same cover-weighted value function TreeSHAP uses.
pub fn brute_force_shap(model: &BoostedModel, x: &[f64]) -> Result<Vec<f64>> {
    let m = model.n_features;
    if m > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "brute-force Shapley enumeration supports at most {MAX_BRUTE_FORCE_FEATURES} features, got {m}"
        )));
    }
    check_input(model, x)?;
    let lr = model.learning_rate();
    let value: Vec<f64> = (0..1u32 << m)
        .map(|s| lr * model.trees.iter().map(|t| conditional_expectation(t, 0, x, s)).sum::<f64>())
        .collect();

    // weight[k] = k! (m-k-1)! / m!
    let mut fact = vec![1.0f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phi = vec![0.0; m];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in 0..1u32 << m {
            if s & bit != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = fact[k] * fact[m - k - 1] / fact[m];
            *p += w * (value[(s | bit) as usize] - value[s as usize]);
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub mean_abs_shap: f64,
    /// Sign of the correlation between feature value and SHAP value:
    /// +1, -1, or 0 when undefined or zero.
    pub sign: i8,
}

/// Mean |SHAP| per feature and the direction of each feature's effect.
pub fn global_importance(explanations: &[ShapExplanation]) -> Result<Vec<FeatureImportance>> {
    let first = explanations
        .first()
        .ok_or_else(|| Error::InsufficientData("no explanations".into()))?;
    let m = first.phi.len();
    if explanations
        .iter()
        .any(|e| e.phi.len() != m || e.features.len() != m)
    {
        return Err(Error::InvalidArgument("explanations disagree on feature count".into()));
    }
    let n = explanations.len() as f64;
    Ok((0..m)
        .map(|j| {
            let phi: Vec<f64> = explanations.iter().map(|e| e.phi[j]).collect();
            let vals: Vec<f64> = explanations.iter().map(|e| e.features[j]).collect();
            let mean_abs_shap = phi.iter().map(|p| p.abs()).sum::<f64>() / n;
            let sign = match pearson(&vals, &phi) {
                Ok(r) if r > 0.0 => 1,
                Ok(r) if r < 0.0 => -1,
                _ => 0,
            };
            FeatureImportance { mean_abs_shap, sign }
        })
        .collect())
}
