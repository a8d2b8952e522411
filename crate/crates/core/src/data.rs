//! Lexical systems: word categories with visual and linguistic exemplar sets,
//! their on-disk formats, validation, and seeded exemplar subsampling.
//!
//! A system is stored as two files. `manifest.json` declares the words in
//! canonical order together with their type and exemplar counts;
//! `embeddings.jsonl` holds one exemplar vector per line, addressed by
//! `(word, modality, index)`. Vectors are held as `f64` in memory; values
//! produced as `f32` widen exactly.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Linguistic,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::Visual, Modality::Linguistic];

    pub fn other(self) -> Modality {
        match self {
            Modality::Visual => Modality::Linguistic,
            Modality::Linguistic => Modality::Visual,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Linguistic => "linguistic",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordType {
    Noun,
    Verb,
}

impl WordType {
    pub fn as_str(self) -> &'static str {
        match self {
            WordType::Noun => "noun",
            WordType::Verb => "verb",
        }
    }

    /// Regression encoding: verbs 1, nouns 0.
    pub fn indicator(self) -> f64 {
        match self {
            WordType::Noun => 0.0,
            WordType::Verb => 1.0,
        }
    }
}

impl fmt::Display for WordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordEntry {
    pub word: String,
    pub word_type: WordType,
    pub visual_exemplars: Vec<Vec<f64>>,
    pub linguistic_exemplars: Vec<Vec<f64>>,
}

impl WordEntry {
    pub fn exemplars(&self, modality: Modality) -> &[Vec<f64>] {
        match modality {
            Modality::Visual => &self.visual_exemplars,
            Modality::Linguistic => &self.linguistic_exemplars,
        }
    }
}

/// A set of word categories analysed jointly. Word order is canonical: it
/// fixes similarity-matrix rows and permutation indices everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalSystem {
    pub name: String,
    pub dim_visual: usize,
    pub dim_linguistic: usize,
    pub words: Vec<WordEntry>,
}

impl LexicalSystem {
    /// Builds a system and rejects it if [`validate`] reports any error.
    pub fn new(
        name: impl Into<String>,
        dim_visual: usize,
        dim_linguistic: usize,
        words: Vec<WordEntry>,
    ) -> Result<Self> {
        let system = Self {
            name: name.into(),
            dim_visual,
            dim_linguistic,
            words,
        };
        let report = validate(&system);
        if let Some(issue) = report.issues.iter().find(|i| i.severity == Severity::Error) {
            return Err(Error::InvalidArgument(issue.to_string()));
        }
        Ok(system)
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Visual => self.dim_visual,
            Modality::Linguistic => self.dim_linguistic,
        }
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w.word == word)
    }

    /// View selecting every exemplar of every word.
    pub fn full_view(&self) -> SystemView<'_> {
        SystemView::full(self)
    }
}

// ---------------------------------------------------------------------------
// Views
// ---------------------------------------------------------------------------

/// A selection of exemplar indices per word and modality over a borrowed
/// system. Indices are unique within each list and every list is nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemView<'a> {
    base: &'a LexicalSystem,
    visual: Vec<Vec<usize>>,
    linguistic: Vec<Vec<usize>>,
}

impl<'a> SystemView<'a> {
    pub fn full(base: &'a LexicalSystem) -> Self {
        let all = |m: Modality| {
            base.words
                .iter()
                .map(|w| (0..w.exemplars(m).len()).collect())
                .collect()
        };
        Self {
            base,
            visual: all(Modality::Visual),
            linguistic: all(Modality::Linguistic),
        }
    }

    /// Builds a view from explicit selections, checking the view invariants.
    pub fn from_indices(
        base: &'a LexicalSystem,
        visual: Vec<Vec<usize>>,
        linguistic: Vec<Vec<usize>>,
    ) -> Result<Self> {
        for (modality, sel) in [(Modality::Visual, &visual), (Modality::Linguistic, &linguistic)] {
            if sel.len() != base.n_words() {
                return Err(Error::DimensionMismatch {
                    expected: base.n_words(),
                    actual: sel.len(),
                });
            }
            for (entry, idx) in base.words.iter().zip(sel) {
                let available = entry.exemplars(modality).len();
                if idx.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "word '{}': empty {modality} selection",
                        entry.word
                    )));
                }
                let mut seen = vec![false; available];
                for &i in idx {
                    if i >= available || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::InvalidArgument(format!(
                            "word '{}': {modality} index {i} out of range or repeated",
                            entry.word
                        )));
                    }
                }
            }
        }
        Ok(Self {
            base,
            visual,
            linguistic,
        })
    }

    pub fn base(&self) -> &'a LexicalSystem {
        self.base
    }

    pub fn n_words(&self) -> usize {
        self.base.n_words()
    }

    pub fn selected(&self, word: usize, modality: Modality) -> &[usize] {
        match modality {
            Modality::Visual => &self.visual[word],
            Modality::Linguistic => &self.linguistic[word],
        }
    }

    /// Selected exemplar vectors of `word`, in selection order.
    pub fn exemplars(&self, word: usize, modality: Modality) -> impl Iterator<Item = &'a [f64]> + '_ {
        let all = self.base.words[word].exemplars(modality);
        self.selected(word, modality).iter().map(move |&i| all[i].as_slice())
    }

    /// The view keeping only the first `k_visual` / `k_linguistic` selected
    /// exemplars of every word.
    pub fn truncated(&self, k_visual: usize, k_linguistic: usize) -> Result<SystemView<'a>> {
        let cut = |sel: &[Vec<usize>], k: usize, modality: Modality| -> Result<Vec<Vec<usize>>> {
            sel.iter()
                .zip(&self.base.words)
                .map(|(s, w)| {
                    if k == 0 || k > s.len() {
                        Err(Error::InsufficientExemplars {
                            word: w.word.clone(),
                            modality,
                            requested: k,
                            available: s.len(),
                        })
                    } else {
                        Ok(s[..k].to_vec())
                    }
                })
                .collect()
        };
        Ok(SystemView {
            base: self.base,
            visual: cut(&self.visual, k_visual, Modality::Visual)?,
            linguistic: cut(&self.linguistic, k_linguistic, Modality::Linguistic)?,
        })
    }
}

/// Seeded per-word sampling without replacement of `k_visual` visual and
/// `k_linguistic` linguistic exemplars.
///
/// Word `i`'s selection in modality `m` is the prefix of a Fisher–Yates
/// ordering drawn from stream `derive(seed, 2i + m)`, so the result is a pure
/// function of the arguments and growing `k` under the same seed only
/// appends indices.
pub fn subsample(
    system: &LexicalSystem,
    k_visual: usize,
    k_linguistic: usize,
    seed: u64,
) -> Result<SystemView<'_>> {
    let mut sel = [Vec::new(), Vec::new()];
    for (slot, (modality, k)) in
        [(Modality::Visual, k_visual), (Modality::Linguistic, k_linguistic)].into_iter().enumerate()
    {
        for (i, entry) in system.words.iter().enumerate() {
            let available = entry.exemplars(modality).len();
            if k == 0 || k > available {
                return Err(Error::InsufficientExemplars {
                    word: entry.word.clone(),
                    modality,
                    requested: k,
                    available,
                });
            }
            let mut rng = SplitMix64::new(derive_seed(seed, 2 * i as u64 + slot as u64));
            sel[slot].push(rng.partial_permutation(available, k));
        }
    }
    let [visual, linguistic] = sel;
    Ok(SystemView {
        base: system,
        visual,
        linguistic,
    })
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub word: Option<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.word {
            Some(w) => write!(f, "{sev}: word '{w}': {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

/// Lists every invariant violation of `system`. Never fails.
pub fn validate(system: &LexicalSystem) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |severity, word: Option<&str>, message: String| {
        issues.push(Issue {
            severity,
            word: word.map(str::to_owned),
            message,
        })
    };

    if system.words.len() < 2 {
        push(
            Severity::Error,
            None,
            format!("system has {} words; at least 2 required", system.words.len()),
        );
    }
    for m in Modality::BOTH {
        if system.dim(m) == 0 {
            push(Severity::Error, None, format!("{m} dimensionality is zero"));
        }
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, entry) in system.words.iter().enumerate() {
        if let Some(first) = seen.insert(entry.word.as_str(), i) {
            push(
                Severity::Error,
                Some(&entry.word),
                format!("duplicate word label (positions {first} and {i})"),
            );
        }
        for m in Modality::BOTH {
            let ex = entry.exemplars(m);
            if ex.is_empty() {
                push(Severity::Error, Some(&entry.word), format!("no {m} exemplars"));
                continue;
            }
            let dim = system.dim(m);
            let mut dims_ok = true;
            for (j, v) in ex.iter().enumerate() {
                if v.len() != dim {
                    dims_ok = false;
                    push(
                        Severity::Error,
                        Some(&entry.word),
                        format!("{m} exemplar {j} has length {}, expected {dim}", v.len()),
                    );
                }
                if let Some(c) = v.iter().position(|x| !x.is_finite()) {
                    dims_ok = false;
                    push(
                        Severity::Error,
                        Some(&entry.word),
                        format!("{m} exemplar {j} has non-finite component {c} ({})", v[c]),
                    );
                }
            }
            if dims_ok {
                let c = crate::metrics::centroid(ex.iter().map(Vec::as_slice))
                    .expect("nonempty exemplar list");
                if c.iter().all(|&x| x == 0.0) {
                    push(
                        Severity::Warning,
                        Some(&entry.word),
                        format!("{m} centroid is the zero vector; cosine similarity undefined"),
                    );
                }
            }
        }
    }

    let ok = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub dim_visual: usize,
    pub dim_linguistic: usize,
    pub words: Vec<ManifestWord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestWord {
    pub word: String,
    #[serde(rename = "type")]
    pub word_type: WordType,
    pub n_visual: usize,
    pub n_linguistic: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord<'a> {
    #[serde(borrow)]
    word: std::borrow::Cow<'a, str>,
    modality: Modality,
    index: usize,
    vector: std::borrow::Cow<'a, [f64]>,
}

/// 1-based line of the `occurrence`-th (0-based) line of `text` mentioning
/// the JSON string `word`; 0 when not found.
fn line_of(text: &str, word: &str, occurrence: usize) -> usize {
    let needle = serde_json::to_string(word).unwrap_or_default();
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.contains(&needle))
        .nth(occurrence)
        .map_or(0, |(i, _)| i + 1)
}

/// Loads a lexical system from a manifest and an embeddings file.
///
/// Exemplars are stored at their declared index, so record order in the
/// embeddings file is irrelevant. Every failure names the offending word and
/// file line.
pub fn load_system(manifest_path: &Path, embeddings_path: &Path) -> Result<LexicalSystem> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let manifest_err = |word: &str, occurrence: usize, message: String| Error::Record {
        path: manifest_path.to_owned(),
        line: line_of(&text, word, occurrence),
        word: word.to_owned(),
        message,
    };

    if manifest.words.len() < 2 {
        return Err(Error::Parse {
            path: manifest_path.to_owned(),
            line: 0,
            message: format!("{} words declared; at least 2 required", manifest.words.len()),
        });
    }
    if manifest.dim_visual == 0 || manifest.dim_linguistic == 0 {
        return Err(Error::Parse {
            path: manifest_path.to_owned(),
            line: 0,
            message: "embedding dimensionality must be positive".into(),
        });
    }

    let mut index_of: HashMap<&str, usize> = HashMap::new();
    for (i, w) in manifest.words.iter().enumerate() {
        if index_of.insert(w.word.as_str(), i).is_some() {
            return Err(manifest_err(&w.word, 1, "duplicate word in manifest".into()));
        }
        if w.n_visual == 0 || w.n_linguistic == 0 {
            return Err(manifest_err(
                &w.word,
                0,
                "every word needs at least one exemplar per modality".into(),
            ));
        }
    }

    // slots[word][modality] = per-index vector, filled from the records.
    let mut slots: Vec<[Vec<Option<Vec<f64>>>; 2]> = manifest
        .words
        .iter()
        .map(|w| [vec![None; w.n_visual], vec![None; w.n_linguistic]])
        .collect();

    let file = File::open(embeddings_path).map_err(|e| Error::io(embeddings_path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut line_no = 0usize;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(embeddings_path, e))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: embeddings_path.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        let rec_err = |message: String| Error::Record {
            path: embeddings_path.to_owned(),
            line: line_no,
            word: record.word.to_string(),
            message,
        };
        let Some(&wi) = index_of.get(record.word.as_ref()) else {
            return Err(rec_err("word not declared in manifest".into()));
        };
        let modality = record.modality;
        let dim = match modality {
            Modality::Visual => manifest.dim_visual,
            Modality::Linguistic => manifest.dim_linguistic,
        };
        if record.vector.len() != dim {
            return Err(rec_err(format!(
                "{modality} vector has length {}, expected {dim}",
                record.vector.len()
            )));
        }
        if let Some(c) = record.vector.iter().position(|x| !x.is_finite()) {
            return Err(rec_err(format!("non-finite component at position {c}")));
        }
        let slot = &mut slots[wi][modality as usize];
        let n = slot.len();
        let Some(cell) = slot.get_mut(record.index) else {
            return Err(rec_err(format!(
                "{modality} index {} out of range (manifest declares {n})",
                record.index
            )));
        };
        if cell.is_some() {
            return Err(rec_err(format!("duplicate {modality} index {}", record.index)));
        }
        *cell = Some(record.vector.into_owned());
    }

    let mut words = Vec::with_capacity(manifest.words.len());
    for (w, [vis, lin]) in manifest.words.iter().zip(slots) {
        let collect = |slot: Vec<Option<Vec<f64>>>, modality: Modality| {
            slot.into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        manifest_err(&w.word, 0, format!("missing {modality} exemplar index {i}"))
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        words.push(WordEntry {
            word: w.word.clone(),
            word_type: w.word_type,
            visual_exemplars: collect(vis, Modality::Visual)?,
            linguistic_exemplars: collect(lin, Modality::Linguistic)?,
        });
    }

    Ok(LexicalSystem {
        name: manifest.name,
        dim_visual: manifest.dim_visual,
        dim_linguistic: manifest.dim_linguistic,
        words,
    })
}

pub fn manifest_of(system: &LexicalSystem) -> Manifest {
    Manifest {
        name: system.name.clone(),
        dim_visual: system.dim_visual,
        dim_linguistic: system.dim_linguistic,
        words: system
            .words
            .iter()
            .map(|w| ManifestWord {
                word: w.word.clone(),
                word_type: w.word_type,
                n_visual: w.visual_exemplars.len(),
                n_linguistic: w.linguistic_exemplars.len(),
            })
            .collect(),
    }
}

/// Writes `system` in the manifest + embeddings format. Floats are emitted as
/// shortest round-trip decimals, so reloading reproduces every bit.
pub fn write_system(system: &LexicalSystem, manifest_path: &Path, embeddings_path: &Path) -> Result<()> {
    let manifest = manifest_of(system);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: manifest_path.to_owned(),
        source: e,
    })?;
    text.push('\n');
    std::fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))?;

    let file = File::create(embeddings_path).map_err(|e| Error::io(embeddings_path, e))?;
    let mut out = BufWriter::new(file);
    for w in &system.words {
        for m in Modality::BOTH {
            for (index, v) in w.exemplars(m).iter().enumerate() {
                let rec = EmbeddingRecord {
                    word: w.word.as_str().into(),
                    modality: m,
                    index,
                    vector: v.as_slice().into(),
                };
                serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Json {
                    path: embeddings_path.to_owned(),
                    source: e,
                })?;
                out.write_all(b"\n").map_err(|e| Error::io(embeddings_path, e))?;
            }
        }
    }
    out.flush().map_err(|e| Error::io(embeddings_path, e))
}
