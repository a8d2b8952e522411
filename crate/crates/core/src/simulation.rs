//! Exemplar-aggregation campaigns.
//!
//! A simulated learner forms each category prototype as the running mean of
//! the exemplars seen so far. Curves grow one modality one exemplar at a time
//! against a fixed number of exemplars in the other; grids sweep every
//! `(visual, linguistic)` count combination. Every simulation and grid cell
//! owns its own seed stream, and reductions run in index order, so results
//! do not depend on the number of worker threads.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::{relative_alignment, similarity_matrix, RankedPair, SimilarityMatrix};
use crate::data::{subsample, LexicalSystem, Modality};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::metrics::{accumulate_mean, centroids};
use crate::rng::{derive_path, derive_seed};
use crate::stats::{bootstrap_mean_ci, pooled_t_test, TTestResult};

pub const BOOTSTRAP_RESAMPLES: usize = 1_000;
pub const CI_LEVEL: f64 = 0.95;

// Sub-stream namespaces under a simulation seed.
const STREAM_SUBSAMPLE: u64 = 0;
const STREAM_PERMUTATIONS: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub k: usize,
    pub mean_relative_strength: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Mean absolute alignment strength of the true mappings at this level.
    pub mean_rho: f64,
    pub n_sims: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationCurve {
    pub mode: Modality,
    pub fixed_other_count: usize,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub k_visual: usize,
    pub k_linguistic: usize,
    pub mean_relative_strength: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_rho: f64,
    pub n_sims: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationGrid {
    pub max_visual: usize,
    pub max_linguistic: usize,
    /// Row-major over `k_visual`, then `k_linguistic`, both from 1.
    pub cells: Vec<GridCell>,
    /// Unit gradient direction `(d/dv, d/dl)` per cell, or `(0, 0)`.
    pub gradients: Option<Vec<(f64, f64)>>,
}

impl AggregationGrid {
    pub fn cell(&self, k_visual: usize, k_linguistic: usize) -> &GridCell {
        &self.cells[(k_visual - 1) * self.max_linguistic + (k_linguistic - 1)]
    }
}

/// Mean, bootstrap CI and mean rho of one level's per-simulation values.
fn summarize(rel: &[f64], rho: &[f64], seed: u64) -> Result<(f64, f64, f64, f64)> {
    let n = rel.len() as f64;
    let mean = rel.iter().sum::<f64>() / n;
    let (lo, hi) = bootstrap_mean_ci(rel, BOOTSTRAP_RESAMPLES, CI_LEVEL, seed)?;
    // A percentile interval of resampled means can in principle miss the
    // sample mean by rounding; keep the reported interval around it.
    let (lo, hi) = (lo.min(mean), hi.max(mean));
    let mean_rho = rho.iter().sum::<f64>() / rho.len() as f64;
    Ok((mean, lo, hi, mean_rho))
}

fn check_counts(system: &LexicalSystem, modality: Modality, k: usize) -> Result<()> {
    for w in &system.words {
        let available = w.exemplars(modality).len();
        if k == 0 || k > available {
            return Err(Error::InsufficientExemplars {
                word: w.word.clone(),
                modality,
                requested: k,
                available,
            });
        }
    }
    Ok(())
}

fn check_runs(n_sims: usize, n_perms: usize) -> Result<()> {
    if n_sims == 0 || n_perms == 0 {
        return Err(Error::InvalidArgument(
            "simulation and permutation counts must be positive".into(),
        ));
    }
    Ok(())
}

/// Relative and absolute alignment strength of one pair of matrices.
fn score(sv: &SimilarityMatrix, sl: &SimilarityMatrix, n_perms: usize, seed: u64) -> Result<(f64, f64)> {
    let ranked = RankedPair::new(sv, sl)?;
    let rho = ranked.rho_identity();
    let permuted = ranked.permuted_rhos(n_perms, seed);
    Ok((relative_alignment(rho, &permuted)?, rho))
}

/// Relative alignment strength as `mode` exemplars accumulate from 1 to
/// `max_k`, with `fixed_other` exemplars aggregated in the other modality.
pub fn aggregate_curve(
    system: &LexicalSystem,
    mode: Modality,
    max_k: usize,
    fixed_other: usize,
    n_sims: usize,
    n_perms: usize,
    seed: u64,
) -> Result<AggregationCurve> {
    if max_k == 0 {
        return Err(Error::InvalidArgument("max_k must be at least 1".into()));
    }
    check_runs(n_sims, n_perms)?;
    check_counts(system, mode, max_k)?;
    check_counts(system, mode.other(), fixed_other)?;

    let (kv, kl) = match mode {
        Modality::Visual => (max_k, fixed_other),
        Modality::Linguistic => (fixed_other, max_k),
    };

    // trajectories[s][k-1] = (relative strength, rho)
    let trajectories: Vec<Vec<(f64, f64)>> = (0..n_sims)
        .into_par_iter()
        .map(|s| {
            let sim_seed = derive_path(seed, &[0, s as u64]);
            let view = subsample(system, kv, kl, derive_seed(sim_seed, STREAM_SUBSAMPLE))?;
            let fixed = similarity_matrix(&centroids(&view, mode.other())?, Some(mode.other()))?;

            // Running means reproduce `centroid` of the first k selected
            // exemplars bit for bit.
            let mut protos: Vec<Vec<f64>> = Vec::with_capacity(view.n_words());
            let mut out = Vec::with_capacity(max_k);
            for k in 1..=max_k {
                for w in 0..view.n_words() {
                    let x = view.exemplars(w, mode).nth(k - 1).expect("k within selection");
                    if k == 1 {
                        protos.push(x.to_vec());
                    } else {
                        accumulate_mean(&mut protos[w], x, k);
                    }
                }
                let growing = similarity_matrix(&protos, Some(mode))?;
                let (sv, sl) = match mode {
                    Modality::Visual => (&growing, &fixed),
                    Modality::Linguistic => (&fixed, &growing),
                };
                let perm_seed = derive_path(sim_seed, &[STREAM_PERMUTATIONS, k as u64]);
                out.push(score(sv, sl, n_perms, perm_seed)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let levels = (1..=max_k)
        .map(|k| {
            let rel: Vec<f64> = trajectories.iter().map(|t| t[k - 1].0).collect();
            let rho: Vec<f64> = trajectories.iter().map(|t| t[k - 1].1).collect();
            let (mean, lo, hi, mean_rho) = summarize(&rel, &rho, derive_path(seed, &[1, k as u64]))?;
            Ok(LevelSummary {
                k,
                mean_relative_strength: mean,
                ci_lo: lo,
                ci_hi: hi,
                mean_rho,
                n_sims,
            })
        })
        .collect::<Result<_>>()?;

    Ok(AggregationCurve {
        mode,
        fixed_other_count: fixed_other,
        levels,
    })
}

/// Relative alignment strength for every `(k_visual, k_linguistic)` in
/// `1..=max_v × 1..=max_l`, each cell from `n_sims` independent subsamples.
pub fn aggregate_grid(
    system: &LexicalSystem,
    max_v: usize,
    max_l: usize,
    n_sims: usize,
    n_perms: usize,
    seed: u64,
) -> Result<AggregationGrid> {
    if max_v == 0 || max_l == 0 {
        return Err(Error::InvalidArgument("grid extents must be at least 1".into()));
    }
    check_runs(n_sims, n_perms)?;
    check_counts(system, Modality::Visual, max_v)?;
    check_counts(system, Modality::Linguistic, max_l)?;

    let n_cells = max_v * max_l;
    let runs: Vec<(f64, f64)> = (0..n_cells * n_sims)
        .into_par_iter()
        .map(|task| {
            let (cell, s) = (task / n_sims, task % n_sims);
            let (kv, kl) = (cell / max_l + 1, cell % max_l + 1);
            let sim_seed = derive_path(seed, &[cell as u64, s as u64]);
            let view = subsample(system, kv, kl, derive_seed(sim_seed, STREAM_SUBSAMPLE))?;
            let sv = similarity_matrix(&centroids(&view, Modality::Visual)?, Some(Modality::Visual))?;
            let sl = similarity_matrix(&centroids(&view, Modality::Linguistic)?, Some(Modality::Linguistic))?;
            score(&sv, &sl, n_perms, derive_path(sim_seed, &[STREAM_PERMUTATIONS]))
        })
        .collect::<Result<_>>()?;

    let cells = runs
        .chunks(n_sims)
        .enumerate()
        .map(|(cell, chunk)| {
            let rel: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            let rho: Vec<f64> = chunk.iter().map(|r| r.1).collect();
            let ci_seed = derive_path(seed, &[u64::MAX, cell as u64]);
            let (mean, lo, hi, mean_rho) = summarize(&rel, &rho, ci_seed)?;
            Ok(GridCell {
                k_visual: cell / max_l + 1,
                k_linguistic: cell % max_l + 1,
                mean_relative_strength: mean,
                ci_lo: lo,
                ci_hi: hi,
                mean_rho,
                n_sims,
            })
        })
        .collect::<Result<_>>()?;

    Ok(AggregationGrid {
        max_visual: max_v,
        max_linguistic: max_l,
        cells,
        gradients: None,
    })
}

/// Finite difference along one axis of a sampled surface with unit spacing:
/// central inside, one-sided at the edges.
fn diff(values: &[f64], i: usize) -> f64 {
    let n = values.len();
    if i == 0 {
        values[1] - values[0]
    } else if i == n - 1 {
        values[n - 1] - values[n - 2]
    } else {
        (values[i + 1] - values[i - 1]) / 2.0
    }
}

/// Attaches unit gradient directions of the mean relative strength surface.
pub fn gradient_field(grid: &AggregationGrid) -> Result<AggregationGrid> {
    let (nv, nl) = (grid.max_visual, grid.max_linguistic);
    if nv < 2 || nl < 2 {
        return Err(Error::InsufficientData(format!(
            "gradient field needs at least a 2x2 grid, got {nv}x{nl}"
        )));
    }
    let f = |v: usize, l: usize| grid.cells[v * nl + l].mean_relative_strength;
    let mut gradients = Vec::with_capacity(nv * nl);
    for v in 0..nv {
        let row: Vec<f64> = (0..nl).map(|l| f(v, l)).collect();
        for l in 0..nl {
            let col: Vec<f64> = (0..nv).map(|vv| f(vv, l)).collect();
            let (gv, gl) = (diff(&col, v), diff(&row, l));
            let norm = gv.hypot(gl);
            gradients.push(if norm == 0.0 { (0.0, 0.0) } else { (gv / norm, gl / norm) });
        }
    }
    Ok(AggregationGrid {
        gradients: Some(gradients),
        ..grid.clone()
    })
}

/// Alignment of many randomly subsampled systems with fixed exemplar counts:
/// per-system true rho and relative strength, plus the pooled permuted
/// samples and their t-test against the true values.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSample {
    pub rho_true: Vec<f64>,
    pub relative_strength: Vec<f64>,
    pub permuted_rhos: Vec<f64>,
    pub comparison: Option<TTestResult>,
}

pub fn sample_systems(
    system: &LexicalSystem,
    k_visual: usize,
    k_linguistic: usize,
    n_systems: usize,
    n_perms: usize,
    seed: u64,
) -> Result<SystemSample> {
    check_runs(n_systems, n_perms)?;
    let runs: Vec<(f64, Vec<f64>)> = (0..n_systems)
        .into_par_iter()
        .map(|s| {
            let sim_seed = derive_path(seed, &[0, s as u64]);
            let view = subsample(system, k_visual, k_linguistic, derive_seed(sim_seed, STREAM_SUBSAMPLE))?;
            let sv = similarity_matrix(&centroids(&view, Modality::Visual)?, Some(Modality::Visual))?;
            let sl = similarity_matrix(&centroids(&view, Modality::Linguistic)?, Some(Modality::Linguistic))?;
            let ranked = RankedPair::new(&sv, &sl)?;
            Ok((
                ranked.rho_identity(),
                ranked.permuted_rhos(n_perms, derive_path(sim_seed, &[STREAM_PERMUTATIONS])),
            ))
        })
        .collect::<Result<_>>()?;
    let rho_true: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let relative_strength = runs
        .iter()
        .map(|(rho, perm)| relative_alignment(*rho, perm))
        .collect::<Result<_>>()?;
    let permuted_rhos: Vec<f64> = runs.into_iter().flat_map(|r| r.1).collect();
    let comparison = pooled_t_test(&rho_true, &permuted_rhos).ok();
    Ok(SystemSample {
        rho_true,
        relative_strength,
        permuted_rhos,
        comparison,
    })
}

const CSV_HEADER: &str = "mode,k_visual,k_linguistic,mean_relative_strength,ci_lo,ci_hi,n_sims";

pub fn write_curve_csv(curve: &AggregationCurve, path: &Path) -> Result<()> {
    let mut out = format!("{CSV_HEADER}\n");
    for l in &curve.levels {
        let (kv, kl) = match curve.mode {
            Modality::Visual => (l.k, curve.fixed_other_count),
            Modality::Linguistic => (curve.fixed_other_count, l.k),
        };
        out.push_str(&format!(
            "{},{kv},{kl},{},{},{},{}\n",
            curve.mode,
            g17(l.mean_relative_strength),
            g17(l.ci_lo),
            g17(l.ci_hi),
            l.n_sims
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_grid_csv(grid: &AggregationGrid, path: &Path) -> Result<()> {
    let mut out = format!("{CSV_HEADER},grad_v,grad_l\n");
    for (i, c) in grid.cells.iter().enumerate() {
        let (gv, gl) = match &grid.gradients {
            Some(g) => (g17(g[i].0), g17(g[i].1)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "grid,{},{},{},{},{},{},{gv},{gl}\n",
            c.k_visual,
            c.k_linguistic,
            g17(c.mean_relative_strength),
            g17(c.ci_lo),
            g17(c.ci_hi),
            c.n_sims
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
