//! Age-of-acquisition regression: per-word feature table, boosted-tree fit
//! and SHAP reporting.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::WordType;
use crate::error::{Error, Result};
use crate::fmt::{csv_field, g17};
use crate::gbt::{self, BoostedModel, BoosterParams, FeatureImportance, ShapExplanation};
use crate::metrics::MetricsReport;

pub const FEATURE_NAMES: [&str; 7] = [
    "frequency",
    "type",
    "visual_variability",
    "visual_discriminability",
    "linguistic_variability",
    "linguistic_discriminability",
    "alignment",
];

pub const MIN_ROWS: usize = 10;

fn read_two_column<T>(
    path: &Path,
    header: [&str; 2],
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Vec<(String, T, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_owned(),
            source: e,
        })?;
    let found = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_owned(),
            source: e,
        })?
        .clone();
    if found.len() != 2 || found[0] != *header[0] || found[1] != *header[1] {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("expected header '{},{}'", header[0], header[1]),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_owned(),
            source: e,
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let word = rec[0].to_owned();
        let value = parse(&rec[1]).map_err(|message| Error::Record {
            path: path.to_owned(),
            line,
            word: word.clone(),
            message,
        })?;
        rows.push((word, value, line));
    }
    Ok(rows)
}

fn into_map<T>(path: &Path, rows: Vec<(String, T, usize)>) -> Result<HashMap<String, T>> {
    let mut map = HashMap::with_capacity(rows.len());
    for (word, value, line) in rows {
        if map.contains_key(&word) {
            return Err(Error::Record {
                path: path.to_owned(),
                line,
                word,
                message: "duplicate word".into(),
            });
        }
        map.insert(word, value);
    }
    Ok(map)
}

/// Reads `aoa.csv` (`word,aoa_months`); ages must be positive and finite.
pub fn load_aoa(path: &Path) -> Result<HashMap<String, f64>> {
    let rows = read_two_column(path, ["word", "aoa_months"], |s| {
        let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("age of acquisition must be positive, got {s}"));
        }
        Ok(v)
    })?;
    into_map(path, rows)
}

/// Reads `frequency.csv` (`word,count`); counts are non-negative integers.
pub fn load_frequency(path: &Path) -> Result<HashMap<String, u64>> {
    let rows = read_two_column(path, ["word", "count"], |s| {
        s.parse::<u64>()
            .map_err(|_| format!("count must be a non-negative integer, got '{s}'"))
    })?;
    into_map(path, rows)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes an AoA table, rows in the given order.
pub fn write_aoa(rows: &[(String, f64)], path: &Path) -> Result<()> {
    let mut out = String::from("word,aoa_months\n");
    for (w, v) in rows {
        out.push_str(&format!("{},{}\n", csv_field(w), g17(*v)));
    }
    write_text(path, &out)
}

pub fn write_frequency(rows: &[(String, u64)], path: &Path) -> Result<()> {
    let mut out = String::from("word,count\n");
    for (w, v) in rows {
        out.push_str(&format!("{},{v}\n", csv_field(w)));
    }
    write_text(path, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub word: String,
    pub reason: String,
}

/// Per-word predictors and AoA target, in manifest word order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub words: Vec<String>,
    pub word_types: Vec<WordType>,
    /// Row-major, columns as in [`FEATURE_NAMES`].
    pub rows: Vec<Vec<f64>>,
    pub aoa: Vec<f64>,
    pub exclusions: Vec<Exclusion>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_exclusions(&self, path: &Path) -> Result<()> {
        let text: String = self
            .exclusions
            .iter()
            .map(|e| format!("{}\t{}\n", e.word, e.reason))
            .collect();
        write_text(path, &text)
    }
}

/// Inner join of metrics, per-word alignment, frequency and AoA on word.
/// `alignment_rows[i]` belongs to `metrics.words[i]`. Words missing any
/// input are excluded with a reason; frequency stays untransformed.
pub fn assemble_features(
    metrics: &MetricsReport,
    alignment_rows: &[f64],
    freq: &HashMap<String, u64>,
    aoa: &HashMap<String, f64>,
) -> Result<FeatureTable> {
    if alignment_rows.len() != metrics.words.len() {
        return Err(Error::DimensionMismatch {
            expected: metrics.words.len(),
            actual: alignment_rows.len(),
        });
    }
    let mut table = FeatureTable {
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        words: Vec::new(),
        word_types: Vec::new(),
        rows: Vec::new(),
        aoa: Vec::new(),
        exclusions: Vec::new(),
    };
    for (w, &align) in metrics.words.iter().zip(alignment_rows) {
        let mut reasons = Vec::new();
        let target = aoa.get(&w.word);
        if target.is_none() {
            reasons.push("no AoA");
        }
        let count = freq.get(&w.word);
        if count.is_none() {
            reasons.push("no frequency");
        }
        if !align.is_finite() {
            reasons.push("no alignment");
        }
        let metric_values = [
            w.visual_variability,
            w.visual_discriminability,
            w.linguistic_variability,
            w.linguistic_discriminability,
        ];
        if metric_values.iter().any(|v| !v.is_finite()) {
            reasons.push("non-finite metric");
        }
        match (reasons.is_empty(), target, count) {
            (true, Some(&target), Some(&count)) => {
                let mut row = vec![count as f64, w.word_type.indicator()];
                row.extend_from_slice(&metric_values);
                row.push(align);
                table.words.push(w.word.clone());
                table.word_types.push(w.word_type);
                table.rows.push(row);
                table.aoa.push(target);
            }
            _ => table.exclusions.push(Exclusion {
                word: w.word.clone(),
                reason: reasons.join("; "),
            }),
        }
    }
    if table.is_empty() {
        return Err(Error::InsufficientData("no word has every feature and an AoA".into()));
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitStatistics {
    pub n_rows: usize,
    pub rmse: f64,
    /// Undefined for a constant target.
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RegressionReport {
    pub model: BoostedModel,
    pub predictions: Vec<f64>,
    pub explanations: Vec<ShapExplanation>,
    pub importance: Vec<FeatureImportance>,
    pub fit: FitStatistics,
}

impl RegressionReport {
    /// Features ordered by decreasing mean |SHAP| (ties by column order).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.importance.len()).collect();
        idx.sort_by(|&a, &b| {
            self.importance[b]
                .mean_abs_shap
                .total_cmp(&self.importance[a].mean_abs_shap)
                .then(a.cmp(&b))
        });
        idx
    }

    /// Writes predictions.csv, shap.csv, importance.csv, exclusions.log and
    /// model.json into `dir`; returns the file names written.
    pub fn write_bundle(&self, table: &FeatureTable, dir: &Path) -> Result<Vec<&'static str>> {
        let mut pred = String::from("word,aoa_true,aoa_pred\n");
        for ((w, t), p) in table.words.iter().zip(&table.aoa).zip(&self.predictions) {
            pred.push_str(&format!("{},{},{}\n", csv_field(w), g17(*t), g17(*p)));
        }
        write_text(&dir.join("predictions.csv"), &pred)?;

        let mut shap = String::from("word,feature,feature_value,shap_value\n");
        for (w, e) in table.words.iter().zip(&self.explanations) {
            for (j, name) in table.feature_names.iter().enumerate() {
                shap.push_str(&format!(
                    "{},{name},{},{}\n",
                    csv_field(w),
                    g17(e.features[j]),
                    g17(e.phi[j])
                ));
            }
        }
        write_text(&dir.join("shap.csv"), &shap)?;

        let mut imp = String::from("feature,mean_abs_shap,sign\n");
        for (name, fi) in table.feature_names.iter().zip(&self.importance) {
            imp.push_str(&format!("{name},{},{}\n", g17(fi.mean_abs_shap), fi.sign));
        }
        write_text(&dir.join("importance.csv"), &imp)?;

        table.write_exclusions(&dir.join("exclusions.log"))?;
        self.model.save(&dir.join("model.json"))?;
        Ok(vec![
            "predictions.csv",
            "shap.csv",
            "importance.csv",
            "exclusions.log",
            "model.json",
        ])
    }
}

/// Fits the booster on every row and explains every row in-sample.
pub fn run_regression(table: &FeatureTable, params: &BoosterParams) -> Result<RegressionReport> {
    if table.len() < MIN_ROWS {
        return Err(Error::InsufficientData(format!(
            "regression needs at least {MIN_ROWS} rows, got {}",
            table.len()
        )));
    }
    let model = gbt::train(&table.rows, &table.aoa, &table.feature_names, params)?;
    let explanations = table
        .rows
        .iter()
        .map(|r| gbt::tree_shap(&model, r))
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<f64> = explanations.iter().map(|e| e.prediction).collect();
    let importance = gbt::global_importance(&explanations)?;

    let n = table.len() as f64;
    let mean = table.aoa.iter().sum::<f64>() / n;
    let ss_res: f64 = predictions.iter().zip(&table.aoa).map(|(p, y)| (p - y).powi(2)).sum();
    let ss_tot: f64 = table.aoa.iter().map(|y| (y - mean).powi(2)).sum();
    let fit = FitStatistics {
        n_rows: table.len(),
        rmse: (ss_res / n).sqrt(),
        r_squared: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    };
    Ok(RegressionReport {
        model,
        predictions,
        explanations,
        importance,
        fit,
    })
}
