#![allow(dead_code)]

use lexalign::data::{LexicalSystem, WordEntry, WordType};
use lexalign::gbt::{BoostedModel, BoosterParams, Node, RegressionTree, Split};
use lexalign::rng::SplitMix64;

pub fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

pub fn gaussian_vec(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.normal()).collect()
}

/// Random system with per-word exemplar counts in `counts` (inclusive).
pub fn random_system(
    rng: &mut SplitMix64,
    n_words: usize,
    dim_visual: usize,
    dim_linguistic: usize,
    counts: (usize, usize),
) -> LexicalSystem {
    let count = |rng: &mut SplitMix64| counts.0 + rng.below((counts.1 - counts.0 + 1) as u64) as usize;
    let words = (0..n_words)
        .map(|i| {
            let nv = count(rng);
            let nl = count(rng);
            WordEntry {
                word: format!("word{i}"),
                word_type: if rng.below(2) == 0 { WordType::Noun } else { WordType::Verb },
                visual_exemplars: (0..nv).map(|_| gaussian_vec(rng, dim_visual)).collect(),
                linguistic_exemplars: (0..nl).map(|_| gaussian_vec(rng, dim_linguistic)).collect(),
            }
        })
        .collect();
    LexicalSystem {
        name: "random".into(),
        dim_visual,
        dim_linguistic,
        words,
    }
}

/// A finite double drawn from the whole bit space: subnormals, huge and
/// tiny magnitudes, negative zero.
pub fn any_finite(rng: &mut SplitMix64) -> f64 {
    loop {
        let x = f64::from_bits(rng.next_u64());
        if x.is_finite() {
            return x;
        }
    }
}

/// Average ranks by direct counting: rank = #less + (#equal + 1) / 2.
pub fn naive_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation via the single-pass moment formula in extended
/// intermediate form (different arithmetic path from the library).
pub fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

pub fn naive_spearman(x: &[f64], y: &[f64]) -> f64 {
    naive_pearson(&naive_ranks(x), &naive_ranks(y))
}

/// Cosine similarity straight from the definition.
pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Strict upper triangle of a full matrix given as rows, row-major.
pub fn upper(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(rows[i][j]);
        }
    }
    out
}

/// Random full binary tree of the given maximum depth over `n_features`
/// features, with positive covers that add up at every split.
pub fn random_tree(rng: &mut SplitMix64, n_features: usize, max_depth: usize) -> RegressionTree {
    fn grow(
        rng: &mut SplitMix64,
        nodes: &mut Vec<Node>,
        n_features: usize,
        depth_left: usize,
        cover: f64,
    ) -> usize {
        let id = nodes.len();
        let split_here = depth_left > 0 && (id == 0 || rng.next_f64() < 0.75);
        nodes.push(Node::leaf(uniform(rng, -2.0, 2.0), cover));
        if split_here {
            let frac = uniform(rng, 0.1, 0.9);
            let feature = rng.below(n_features as u64) as usize;
            let threshold = uniform(rng, -1.0, 1.0);
            let left = grow(rng, nodes, n_features, depth_left - 1, cover * frac);
            let right = grow(rng, nodes, n_features, depth_left - 1, cover - cover * frac);
            nodes[id].split = Some(Split {
                feature,
                threshold,
                left,
                right,
            });
        }
        id
    }
    let mut nodes = Vec::new();
    let cover = uniform(rng, 10.0, 100.0);
    grow(rng, &mut nodes, n_features, max_depth, cover);
    RegressionTree { nodes }
}

pub fn random_model(rng: &mut SplitMix64, n_features: usize, n_trees: usize, max_depth: usize) -> BoostedModel {
    let trees = (0..n_trees).map(|_| random_tree(rng, n_features, max_depth)).collect();
    let params = BoosterParams {
        n_rounds: n_trees,
        max_depth,
        learning_rate: uniform(rng, 0.05, 1.0),
        ..BoosterParams::default()
    };
    let names = (0..n_features).map(|j| format!("f{j}")).collect();
    BoostedModel::new(params, uniform(rng, -1.0, 1.0), names, trees)
}

/// Random regression data set: n rows, m features, targets a noisy
/// nonlinear function of the features.
pub fn random_dataset(rng: &mut SplitMix64, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    // Some repeated values so ties in split search get exercised.
                    if rng.next_f64() < 0.2 {
                        rng.below(3) as f64
                    } else {
                        rng.normal()
                    }
                })
                .collect()
        })
        .collect();
    let y = x
        .iter()
        .map(|r| r[0].sin() + r.get(1).map_or(0.0, |v| v * v) + 0.3 * rng.normal())
        .collect();
    (x, y)
}

/// Synthetic regression table: random predictors in the usual seven
/// columns, target `10 + Σ coef_j · x_j + noise`. Frequency is log-normal
/// and enters the target through its logarithm.
pub fn planted_table(
    rng: &mut SplitMix64,
    n: usize,
    coefs: &[(usize, f64)],
    noise_sd: f64,
) -> lexalign::regression::FeatureTable {
    use lexalign::regression::{FeatureTable, FEATURE_NAMES};
    let mut rows = Vec::with_capacity(n);
    let mut aoa = Vec::with_capacity(n);
    let mut word_types = Vec::with_capacity(n);
    for _ in 0..n {
        let freq = (4.0 + 1.5 * rng.normal()).exp().round();
        let verb = rng.below(2) == 1;
        let mut row = vec![freq, if verb { 1.0 } else { 0.0 }];
        row.extend((0..5).map(|_| rng.next_f64()));
        let signal: f64 = coefs
            .iter()
            .map(|&(j, c)| c * if j == 0 { (row[0] + 1.0).ln() } else { row[j] })
            .sum();
        aoa.push(10.0 + signal + noise_sd * rng.normal());
        word_types.push(if verb { WordType::Verb } else { WordType::Noun });
        rows.push(row);
    }
    FeatureTable {
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        words: (0..n).map(|i| format!("w{i}")).collect(),
        word_types,
        rows,
        aoa,
        exclusions: Vec::new(),
    }
}
