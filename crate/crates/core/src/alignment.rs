//! Cross-modal alignment strength.
//!
//! Each modality's category prototypes yield a cosine-similarity matrix; the
//! alignment strength of a mapping is Spearman's correlation between the
//! strict upper triangles of the two matrices. Relative alignment strength is
//! the fraction of randomly permuted (non-identity) mappings whose alignment
//! strength is strictly lower than the true mapping's.
//!
//! Permuting the linguistic categories only reorders the multiset of its
//! upper-triangle values, so their ranks can be computed once and looked up
//! through the permutation. [`RankedPair`] keeps both modalities' ranks as
//! doubled integers, which makes the correlation numerator of every
//! permuted mapping an exact integer.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Modality, SystemView};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stats::{self, TTestResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    pub modality: Option<Modality>,
}

impl SimilarityMatrix {
    /// Wraps a row-major `n×n` matrix. Symmetry is the caller's contract.
    pub fn from_values(n: usize, values: Vec<f64>, modality: Option<Modality>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: values.len(),
            });
        }
        Ok(Self { n, values, modality })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Strict upper triangle in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i + 1..(i + 1) * n]);
        }
        out
    }

    /// The matrix with categories relabelled: entry `(a, b)` becomes
    /// `self[(perm[a], perm[b])]`.
    pub fn permuted(&self, perm: &[usize]) -> SimilarityMatrix {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                values[a * n + b] = self.get(perm[a], perm[b]);
            }
        }
        SimilarityMatrix {
            n,
            values,
            modality: self.modality,
        }
    }
}

/// Rows are the centroids of each word's selected exemplars.
pub fn prototype_matrix(view: &SystemView<'_>, modality: Modality) -> Result<Vec<Vec<f64>>> {
    crate::metrics::centroids(view, modality)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four interleaved partial sums; fixed association order.
    let mut acc = [0.0f64; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `dot(rows[r], b)` for four rows at once, streaming `b` a single time.
/// Same association order as [`dot`], so the results are identical.
#[inline]
fn dot4(rows: [&[f64]; 4], b: &[f64]) -> [f64; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    let len = 4 * (b.len() / 4);
    for k in (0..len).step_by(4) {
        let y = &b[k..k + 4];
        for (r, row) in rows.iter().enumerate() {
            let x = &row[k..k + 4];
            for l in 0..4 {
                acc[r][l] += x[l] * y[l];
            }
        }
    }
    let mut out = [0.0; 4];
    for (r, row) in rows.iter().enumerate() {
        let tail: f64 = row[len..].iter().zip(&b[len..]).map(|(x, y)| x * y).sum();
        out[r] = (acc[r][0] + acc[r][1]) + (acc[r][2] + acc[r][3]) + tail;
    }
    out
}

/// Pairwise cosine similarities of the prototype rows. Each unordered pair is
/// computed once and mirrored; the diagonal is exactly 1.
pub fn similarity_matrix(prototypes: &[Vec<f64>], modality: Option<Modality>) -> Result<SimilarityMatrix> {
    let n = prototypes.len();
    if n < 2 {
        return Err(Error::InsufficientData("similarity matrix needs at least 2 rows".into()));
    }
    let dim = prototypes[0].len();
    let mut unit = Vec::with_capacity(n);
    for (i, p) in prototypes.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        let norm = dot(p, p).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm {
                word: format!("#{i}"),
                modality: modality.unwrap_or(Modality::Visual),
            });
        }
        unit.push(p.iter().map(|x| x / norm).collect::<Vec<f64>>());
    }
    // Blocks of four rows share each pass over the later rows.
    let blocks: Vec<Vec<(usize, usize, f64)>> = (0..n.div_ceil(4))
        .into_par_iter()
        .map(|blk| {
            let lo = 4 * blk;
            let hi = (lo + 4).min(n);
            let mut out = Vec::with_capacity((hi - lo) * (n - lo));
            for i in lo..hi {
                for j in i + 1..hi {
                    out.push((i, j, dot(&unit[i], &unit[j])));
                }
            }
            if hi - lo == 4 {
                let rows = [&unit[lo][..], &unit[lo + 1][..], &unit[lo + 2][..], &unit[lo + 3][..]];
                for (j, u) in unit.iter().enumerate().skip(hi) {
                    let d = dot4(rows, u);
                    out.extend((0..4).map(|r| (lo + r, j, d[r])));
                }
            } else {
                for i in lo..hi {
                    out.extend((hi..n).map(|j| (i, j, dot(&unit[i], &unit[j]))));
                }
            }
            out
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (i, j, d) in blocks.into_iter().flatten() {
        let s = d.clamp(-1.0, 1.0);
        values[i * n + j] = s;
        values[j * n + i] = s;
    }
    Ok(SimilarityMatrix { n, values, modality })
}

/// Similarity matrix of a view's prototypes; zero-norm errors name the word.
pub fn view_similarity(view: &SystemView<'_>, modality: Modality) -> Result<SimilarityMatrix> {
    let protos = prototype_matrix(view, modality)?;
    similarity_matrix(&protos, Some(modality)).map_err(|e| match e {
        Error::ZeroNorm { word, modality } => {
            let idx: usize = word.trim_start_matches('#').parse().unwrap_or(0);
            Error::ZeroNorm {
                word: view.base().words[idx].word.clone(),
                modality,
            }
        }
        other => other,
    })
}

fn check_pair(sv: &SimilarityMatrix, sl: &SimilarityMatrix, min_n: usize) -> Result<()> {
    if sv.n != sl.n {
        return Err(Error::DimensionMismatch {
            expected: sv.n,
            actual: sl.n,
        });
    }
    if sv.n < min_n {
        return Err(Error::InsufficientData(format!(
            "alignment needs at least {min_n} categories, got {}",
            sv.n
        )));
    }
    Ok(())
}

/// Spearman correlation of the strict upper triangles.
///
/// Evaluated in exact integer rank arithmetic, so the value does not depend
/// on the order in which pairs are visited: relabelling both modalities the
/// same way leaves it bit-identical.
pub fn alignment_strength(sv: &SimilarityMatrix, sl: &SimilarityMatrix) -> Result<f64> {
    Ok(RankedPair::new(sv, sl)?.rho_identity())
}

/// Both modalities' upper-triangle ranks, stored as doubled (hence integer)
/// average ranks in full symmetric `n×n` tables.
#[derive(Debug, Clone)]
pub struct RankedPair {
    n: usize,
    visual: Vec<u32>,
    linguistic: Vec<u32>,
    /// `M·Σr² − (Σr)²` per modality, as exact integers.
    spread_visual: i128,
    spread_linguistic: i128,
    pairs: i128,
    rank_sum: i128,
}

fn doubled_rank_table(m: &SimilarityMatrix) -> (Vec<u32>, i128) {
    let n = m.n;
    let ranks = stats::average_ranks(&m.upper_triangle());
    let mut table = vec![0u32; n * n];
    let mut sum_sq: i128 = 0;
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let r2 = (2.0 * ranks[k]) as u32;
            table[i * n + j] = r2;
            table[j * n + i] = r2;
            sum_sq += (r2 as i128) * (r2 as i128);
            k += 1;
        }
    }
    (table, sum_sq)
}

impl RankedPair {
    pub fn new(sv: &SimilarityMatrix, sl: &SimilarityMatrix) -> Result<Self> {
        check_pair(sv, sl, 3)?;
        let n = sv.n;
        let pairs = (n * (n - 1) / 2) as i128;
        // Σ of doubled ranks 1..M is M(M+1) regardless of ties.
        let rank_sum = pairs * (pairs + 1);
        let (visual, ssv) = doubled_rank_table(sv);
        let (linguistic, ssl) = doubled_rank_table(sl);
        let spread_visual = pairs * ssv - rank_sum * rank_sum;
        let spread_linguistic = pairs * ssl - rank_sum * rank_sum;
        if spread_visual == 0 || spread_linguistic == 0 {
            return Err(Error::UndefinedCorrelation(
                "an upper triangle is constant".into(),
            ));
        }
        Ok(Self {
            n,
            visual,
            linguistic,
            spread_visual,
            spread_linguistic,
            pairs,
            rank_sum,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Alignment strength with linguistic category `perm[a]` mapped to
    /// visual category `a`.
    pub fn rho(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        debug_assert_eq!(perm.len(), n);
        let mut total: u128 = 0;
        for a in 0..n {
            let vrow = &self.visual[a * n..(a + 1) * n];
            let lrow = &self.linguistic[perm[a] * n..(perm[a] + 1) * n];
            let mut acc: u64 = 0;
            for b in a + 1..n {
                acc += vrow[b] as u64 * lrow[perm[b]] as u64;
            }
            total += acc as u128;
        }
        let num = self.pairs * total as i128 - self.rank_sum * self.rank_sum;
        let den = (self.spread_visual as f64 * self.spread_linguistic as f64).sqrt();
        (num as f64 / den).clamp(-1.0, 1.0)
    }

    pub fn rho_identity(&self) -> f64 {
        let id: Vec<usize> = (0..self.n).collect();
        self.rho(&id)
    }

    /// One non-identity uniform permutation per sample; sample `i` draws from
    /// stream `derive(seed, i)`.
    pub fn permuted_rhos(&self, n_perms: usize, seed: u64) -> Vec<f64> {
        (0..n_perms)
            .into_par_iter()
            .map(|i| {
                let mut rng = SplitMix64::stream(seed, i as u64);
                let perm = draw_non_identity(&mut rng, self.n);
                self.rho(&perm)
            })
            .collect()
    }
}

/// Uniform permutation of `0..n` conditioned on not being the identity.
pub fn draw_non_identity(rng: &mut SplitMix64, n: usize) -> Vec<usize> {
    assert!(n >= 2);
    loop {
        let p = rng.permutation(n);
        if p.iter().enumerate().any(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Alignment strengths of `n_perms` randomly permuted mappings (the
/// linguistic matrix is relabelled; the visual one stays fixed).
pub fn permutation_distribution(
    sv: &SimilarityMatrix,
    sl: &SimilarityMatrix,
    n_perms: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_perms == 0 {
        return Err(Error::InvalidArgument("number of permutations must be positive".into()));
    }
    Ok(RankedPair::new(sv, sl)?.permuted_rhos(n_perms, seed))
}

/// Fraction of permuted alignment strengths strictly below `rho_true`.
pub fn relative_alignment(rho_true: f64, permuted: &[f64]) -> Result<f64> {
    if permuted.is_empty() {
        return Err(Error::InsufficientData("no permuted mappings".into()));
    }
    let lower = permuted.iter().filter(|&&r| r < rho_true).count();
    Ok(lower as f64 / permuted.len() as f64)
}

/// Per-word alignment: Spearman correlation between row `i` of both
/// matrices with the self-similarity entry dropped.
pub fn rowwise_alignment(sv: &SimilarityMatrix, sl: &SimilarityMatrix, i: usize) -> Result<f64> {
    check_pair(sv, sl, 4)?;
    if i >= sv.n {
        return Err(Error::InvalidArgument(format!("word index {i} out of range")));
    }
    let row = |m: &SimilarityMatrix| -> Vec<f64> {
        (0..m.n).filter(|&j| j != i).map(|j| m.get(i, j)).collect()
    };
    stats::spearman(&row(sv), &row(sl))
}

pub fn compare_true_vs_permuted(true_rhos: &[f64], permuted_rhos: &[f64]) -> Result<TTestResult> {
    stats::pooled_t_test(true_rhos, permuted_rhos)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub rho_true: f64,
    #[serde(skip)]
    pub permuted_rhos: Vec<f64>,
    pub relative_strength: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

/// True alignment strength and its permutation reference distribution.
///
/// `rho_true` comes from the same exact-rank evaluator as the permuted
/// samples, so ties between the true and a permuted mapping compare exactly.
pub fn align(sv: &SimilarityMatrix, sl: &SimilarityMatrix, n_perms: usize, seed: u64) -> Result<AlignmentResult> {
    if n_perms == 0 {
        return Err(Error::InvalidArgument("number of permutations must be positive".into()));
    }
    let ranked = RankedPair::new(sv, sl)?;
    let rho_true = ranked.rho_identity();
    let permuted_rhos = ranked.permuted_rhos(n_perms, seed);
    let relative_strength = relative_alignment(rho_true, &permuted_rhos)?;
    Ok(AlignmentResult {
        rho_true,
        permuted_rhos,
        relative_strength,
        n_permutations: n_perms,
        seed,
    })
}

/// `alignment.json` body.
#[derive(Debug, Serialize)]
pub struct AlignmentFile<'a> {
    pub rho_true: f64,
    pub relative_strength: f64,
    pub n_permutations: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permuted_rhos_path: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<&'a str>,
}

/// One permuted alignment strength per line under a `permuted_rho` header.
pub fn write_permuted_csv(rhos: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("sample,permuted_rho\n");
    for (i, r) in rhos.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", crate::fmt::g17(*r)));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
