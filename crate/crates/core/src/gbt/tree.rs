use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Samples with `x[feature] < threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// A tree node. Internal nodes keep the weight they would have as a leaf in
/// `value`; only leaf values contribute to predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub split: Option<Split>,
    pub value: f64,
    /// Training-sample weight (hessian sum) reaching the node.
    pub cover: f64,
}

impl Node {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Self {
            split: None,
            value,
            cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Regression tree with the root at index 0. Leaf values are unshrunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn single_leaf(value: f64, cover: f64) -> Self {
        Self {
            nodes: vec![Node::leaf(value, cover)],
        }
    }

    /// Child taken by `x` at internal node `split`. A missing (NaN) value
    /// follows the child with the larger cover, the left one on ties.
    #[inline]
    pub fn route(&self, split: &Split, x: &[f64]) -> usize {
        let v = x[split.feature];
        if v.is_nan() {
            if self.nodes[split.left].cover >= self.nodes[split.right].cover {
                split.left
            } else {
                split.right
            }
        } else if v < split.threshold {
            split.left
        } else {
            split.right
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = self.route(s, x);
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    /// Cover-weighted mean of the leaf values: the tree's expected output
    /// over the training distribution.
    pub fn expected_value(&self) -> f64 {
        self.subtree_expectation(0)
    }

    fn subtree_expectation(&self, i: usize) -> f64 {
        let node = &self.nodes[i];
        match &node.split {
            None => node.value,
            Some(s) => {
                let (l, r) = (&self.nodes[s.left], &self.nodes[s.right]);
                (l.cover * self.subtree_expectation(s.left) + r.cover * self.subtree_expectation(s.right))
                    / node.cover
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes.iter().filter_map(|n| n.split.map(|s| s.feature)).max()
    }

    /// Checks structure and cover metadata: child indices in range and
    /// visited once, positive covers, and parent cover equal to the sum of
    /// its children's (relative tolerance 1e-9).
    pub fn check(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Model(format!("node {i} reached twice")));
            }
            let node = &self.nodes[i];
            if !(node.cover > 0.0 && node.cover.is_finite()) {
                return Err(Error::Model(format!("node {i} lacks a positive cover")));
            }
            if let Some(s) = &node.split {
                if s.left >= self.nodes.len() || s.right >= self.nodes.len() {
                    return Err(Error::Model(format!("node {i} has a child out of range")));
                }
                let sum = self.nodes[s.left].cover + self.nodes[s.right].cover;
                if (sum - node.cover).abs() > 1e-9 * node.cover.max(1.0) {
                    return Err(Error::Model(format!(
                        "node {i}: cover {} differs from children's sum {sum}",
                        node.cover
                    )));
                }
                stack.push(s.left);
                stack.push(s.right);
            }
        }
        Ok(())
    }
}
