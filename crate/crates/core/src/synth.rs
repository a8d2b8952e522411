//! Synthetic lexical systems with known structure, for calibration runs,
//! benchmarks and tests.

use crate::data::{LexicalSystem, WordEntry, WordType};
use crate::rng::{derive_seed, SplitMix64};

fn gaussian(rng: &mut SplitMix64, dim: usize, sd: f64) -> Vec<f64> {
    (0..dim).map(|_| sd * rng.normal()).collect()
}

fn offset(center: &[f64], rng: &mut SplitMix64, sd: f64) -> Vec<f64> {
    center.iter().map(|c| c + sd * rng.normal()).collect()
}

/// Isotropic Gaussian clusters: each word's centroid is drawn with spread
/// `between_sd`, its exemplars around it with spread `within_sd`, both
/// modalities independently.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub n_words: usize,
    pub word_type: WordType,
    pub dim_visual: usize,
    pub dim_linguistic: usize,
    pub n_visual: usize,
    pub n_linguistic: usize,
    pub between_sd: f64,
    pub within_sd_visual: f64,
    pub within_sd_linguistic: f64,
    /// Prefix of generated word labels.
    pub prefix: String,
}

pub fn clustered_system(spec: &ClusterSpec, seed: u64) -> LexicalSystem {
    let words = (0..spec.n_words)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            let cv = gaussian(&mut rng, spec.dim_visual, spec.between_sd);
            let cl = gaussian(&mut rng, spec.dim_linguistic, spec.between_sd);
            WordEntry {
                word: format!("{}{i}", spec.prefix),
                word_type: spec.word_type,
                visual_exemplars: (0..spec.n_visual)
                    .map(|_| offset(&cv, &mut rng, spec.within_sd_visual))
                    .collect(),
                linguistic_exemplars: (0..spec.n_linguistic)
                    .map(|_| offset(&cl, &mut rng, spec.within_sd_linguistic))
                    .collect(),
            }
        })
        .collect();
    LexicalSystem {
        name: format!("{}clusters", spec.prefix),
        dim_visual: spec.dim_visual,
        dim_linguistic: spec.dim_linguistic,
        words,
    }
}

/// Both modalities are noisy linear read-outs of one latent vector per word,
/// so their similarity structures agree once enough exemplars are averaged.
/// A shared offset keeps prototypes away from the origin.
#[derive(Debug, Clone)]
pub struct AlignedSpec {
    pub n_words: usize,
    pub latent_dim: usize,
    pub dim_visual: usize,
    pub dim_linguistic: usize,
    pub n_visual: usize,
    pub n_linguistic: usize,
    pub noise_visual: f64,
    pub noise_linguistic: f64,
    pub word_type: WordType,
}

impl Default for AlignedSpec {
    fn default() -> Self {
        Self {
            n_words: 40,
            latent_dim: 8,
            dim_visual: 32,
            dim_linguistic: 48,
            n_visual: 20,
            n_linguistic: 20,
            noise_visual: 1.0,
            noise_linguistic: 1.0,
            word_type: WordType::Noun,
        }
    }
}

pub fn aligned_system(spec: &AlignedSpec, seed: u64) -> LexicalSystem {
    let mut mrng = SplitMix64::new(derive_seed(seed, u64::MAX));
    let scale = 1.0 / (spec.latent_dim as f64).sqrt();
    let mut projection = |dim: usize| -> Vec<Vec<f64>> {
        (0..dim).map(|_| gaussian(&mut mrng, spec.latent_dim, scale)).collect()
    };
    let proj_v = projection(spec.dim_visual);
    let proj_l = projection(spec.dim_linguistic);
    let base_v = gaussian(&mut mrng, spec.dim_visual, 0.5);
    let base_l = gaussian(&mut mrng, spec.dim_linguistic, 0.5);

    let read_out = |proj: &[Vec<f64>], base: &[f64], z: &[f64]| -> Vec<f64> {
        proj.iter()
            .zip(base)
            .map(|(row, b)| b + row.iter().zip(z).map(|(p, x)| p * x).sum::<f64>())
            .collect()
    };

    let words = (0..spec.n_words)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            let z = gaussian(&mut rng, spec.latent_dim, 1.0);
            let cv = read_out(&proj_v, &base_v, &z);
            let cl = read_out(&proj_l, &base_l, &z);
            WordEntry {
                word: format!("w{i}"),
                word_type: spec.word_type,
                visual_exemplars: (0..spec.n_visual)
                    .map(|_| offset(&cv, &mut rng, spec.noise_visual))
                    .collect(),
                linguistic_exemplars: (0..spec.n_linguistic)
                    .map(|_| offset(&cl, &mut rng, spec.noise_linguistic))
                    .collect(),
            }
        })
        .collect();
    LexicalSystem {
        name: "aligned".into(),
        dim_visual: spec.dim_visual,
        dim_linguistic: spec.dim_linguistic,
        words,
    }
}

/// Independent standard-normal exemplars in each modality: no cross-modal
/// structure at all.
pub fn null_system(n_words: usize, dim_visual: usize, dim_linguistic: usize, n_exemplars: usize, seed: u64) -> LexicalSystem {
    let words = (0..n_words)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            WordEntry {
                word: format!("w{i}"),
                word_type: WordType::Noun,
                visual_exemplars: (0..n_exemplars).map(|_| gaussian(&mut rng, dim_visual, 1.0)).collect(),
                linguistic_exemplars: (0..n_exemplars)
                    .map(|_| gaussian(&mut rng, dim_linguistic, 1.0))
                    .collect(),
            }
        })
        .collect();
    LexicalSystem {
        name: "null".into(),
        dim_visual,
        dim_linguistic,
        words,
    }
}
