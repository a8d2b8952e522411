//! Category structure: centroids, variability and discriminability.
//!
//! Variability of category `i` is the mean Euclidean distance from its
//! exemplars to its own centroid. Discriminability of category `i` is the
//! mean distance from the exemplars of *every* category, its own included,
//! to the centroid of `i`. With equal exemplar counts the mean of the
//! per-word values equals the system-level triple sum normalised by `N²P`.
//!
//! All sums run in a fixed order (words, then selected exemplars, then
//! components) so results are bit-identical however the per-word work is
//! scheduled.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Modality, SystemView, WordType};
use crate::error::{Error, Result};
use crate::fmt::g17;

/// Componentwise arithmetic mean, accumulated in the given exemplar order as
/// a running mean, so identical exemplars give back exactly that exemplar.
pub fn centroid<'a, I>(exemplars: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = exemplars.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InsufficientData("centroid of an empty exemplar list".into()))?;
    let mut mean = first.to_vec();
    let mut n = 1usize;
    for x in iter {
        if x.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: x.len(),
            });
        }
        n += 1;
        accumulate_mean(&mut mean, x, n);
    }
    Ok(mean)
}

/// Folds the `n`-th exemplar into a running mean of the first `n - 1`.
#[inline]
pub fn accumulate_mean(mean: &mut [f64], x: &[f64], n: usize) {
    let n = n as f64;
    for (m, v) in mean.iter_mut().zip(x) {
        *m += (v - *m) / n;
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn category_variability<'a, I>(exemplars: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
    I::IntoIter: Clone,
{
    let iter = exemplars.into_iter();
    let c = centroid(iter.clone())?;
    let (sum, n) = iter.fold((0.0, 0usize), |(s, n), x| (s + euclidean(x, &c), n + 1));
    Ok(sum / n as f64)
}

/// Per-word centroids of the selected exemplars in one modality.
pub fn centroids(view: &SystemView<'_>, modality: Modality) -> Result<Vec<Vec<f64>>> {
    (0..view.n_words())
        .map(|i| centroid(view.exemplars(i, modality)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub visual: Vec<Vec<f64>>,
    pub linguistic: Vec<Vec<f64>>,
}

impl Centroids {
    pub fn of(view: &SystemView<'_>) -> Result<Self> {
        Ok(Self {
            visual: centroids(view, Modality::Visual)?,
            linguistic: centroids(view, Modality::Linguistic)?,
        })
    }

    pub fn get(&self, modality: Modality) -> &[Vec<f64>] {
        match modality {
            Modality::Visual => &self.visual,
            Modality::Linguistic => &self.linguistic,
        }
    }
}

/// Mean distance from all selected exemplars of all words to `center`.
fn mean_distance_to(view: &SystemView<'_>, modality: Modality, center: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for j in 0..view.n_words() {
        for x in view.exemplars(j, modality) {
            sum += euclidean(x, center);
            n += 1;
        }
    }
    sum / n as f64
}

pub fn category_discriminability(
    view: &SystemView<'_>,
    modality: Modality,
    category_index: usize,
) -> Result<f64> {
    if category_index >= view.n_words() {
        return Err(Error::InvalidArgument(format!(
            "category index {category_index} out of range for {} words",
            view.n_words()
        )));
    }
    let c = centroid(view.exemplars(category_index, modality))?;
    Ok(mean_distance_to(view, modality, &c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordMetrics {
    pub word: String,
    pub word_type: WordType,
    pub visual_variability: f64,
    pub visual_discriminability: f64,
    pub linguistic_variability: f64,
    pub linguistic_discriminability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemMetrics {
    pub visual_variability: f64,
    pub visual_discriminability: f64,
    pub linguistic_variability: f64,
    pub linguistic_discriminability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub words: Vec<WordMetrics>,
    pub system: SystemMetrics,
}

impl MetricsReport {
    pub fn column(&self, f: impl Fn(&WordMetrics) -> f64) -> Vec<f64> {
        self.words.iter().map(f).collect()
    }

    /// Writes `metrics.csv` with 17-significant-digit values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(
            "word,type,visual_variability,visual_discriminability,linguistic_variability,linguistic_discriminability\n",
        );
        for w in &self.words {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::fmt::csv_field(&w.word),
                w.word_type,
                g17(w.visual_variability),
                g17(w.visual_discriminability),
                g17(w.linguistic_variability),
                g17(w.linguistic_discriminability)
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-word and system-level variability and discriminability of a view.
pub fn system_metrics(view: &SystemView<'_>) -> Result<MetricsReport> {
    let cents = Centroids::of(view)?;
    let base = view.base();
    let words: Vec<WordMetrics> = (0..view.n_words())
        .into_par_iter()
        .map(|i| {
            let var = |m: Modality| {
                let c = &cents.get(m)[i];
                let (s, n) = view
                    .exemplars(i, m)
                    .fold((0.0, 0usize), |(s, n), x| (s + euclidean(x, c), n + 1));
                s / n as f64
            };
            let disc = |m: Modality| mean_distance_to(view, m, &cents.get(m)[i]);
            WordMetrics {
                word: base.words[i].word.clone(),
                word_type: base.words[i].word_type,
                visual_variability: var(Modality::Visual),
                visual_discriminability: disc(Modality::Visual),
                linguistic_variability: var(Modality::Linguistic),
                linguistic_discriminability: disc(Modality::Linguistic),
            }
        })
        .collect();

    let col = |f: fn(&WordMetrics) -> f64| mean(&words.iter().map(f).collect::<Vec<_>>());
    let system = SystemMetrics {
        visual_variability: col(|w| w.visual_variability),
        visual_discriminability: col(|w| w.visual_discriminability),
        linguistic_variability: col(|w| w.linguistic_variability),
        linguistic_discriminability: col(|w| w.linguistic_discriminability),
    };
    Ok(MetricsReport { words, system })
}
