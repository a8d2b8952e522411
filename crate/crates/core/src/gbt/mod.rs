//! Gradient-boosted regression trees (squared error, exact greedy splits)
//! with path-dependent TreeSHAP attributions.

mod booster;
mod shap;
mod tree;

pub use booster::{predict, train, train_traced, BoostedModel, BoosterParams, MODEL_FORMAT_VERSION};
pub use shap::{brute_force_shap, global_importance, tree_shap, FeatureImportance, ShapExplanation, MAX_BRUTE_FORCE_FEATURES};
pub use tree::{Node, RegressionTree, Split};
