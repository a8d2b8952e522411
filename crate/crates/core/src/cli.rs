//! `lexalign` command line: argument parsing, stage orchestration, artifact
//! hashing and the run manifest.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::alignment::{self, AlignmentFile};
use crate::data::{self, LexicalSystem, Modality, Severity, ValidationReport};
use crate::error::{Error, Result};
use crate::gbt::BoosterParams;
use crate::metrics;
use crate::regression;
use crate::simulation;

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_ENVIRONMENT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lexalign", version, about = "Embedding-space analytics for word-category learnability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Inputs {
    /// System manifest (manifest.json).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Exemplar embeddings (embeddings.jsonl).
    #[arg(long)]
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker thread cap. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateMode {
    Visual,
    Linguistic,
    Grid,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a system's files against the input contract.
    Validate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        json: bool,
    },
    /// Per-word variability and discriminability (metrics.csv).
    Metrics {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
    },
    /// True-mapping alignment strength against permuted mappings.
    Align {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Alignment as exemplars are aggregated (aggregation.csv).
    Aggregate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        mode: AggregateMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
        /// Simulations per level [default: 1000 for curves, 500 for grid].
        #[arg(long)]
        sims: Option<usize>,
        /// Largest exemplar count of the varied modality [default: fewest available].
        #[arg(long)]
        max_k: Option<usize>,
        /// Exemplars aggregated in the other modality [default: min(20, fewest available)].
        #[arg(long)]
        fixed_other: Option<usize>,
        #[arg(long, default_value_t = 8)]
        max_visual: usize,
        #[arg(long, default_value_t = 8)]
        max_linguistic: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Boosted-tree AoA regression with SHAP attributions.
    Regress {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        aoa: PathBuf,
        #[arg(long)]
        frequency: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 0.02)]
        learning_rate: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Re-check the hashes recorded in an output directory's run manifest.
    Verify {
        /// Directory holding run_manifest.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Everything that determines the artifacts: command, parameters and
    /// input content hashes (not paths).
    pub config: Value,
    pub config_hash: String,
    pub input_paths: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Hash of a config value's canonical (key-sorted, compact) JSON form.
pub fn config_hash(config: &Value) -> String {
    sha256_hex(serde_json::to_string(config).expect("json value").as_bytes())
}

/// Config and input bookkeeping for one artifact-producing run.
struct Run {
    config: Value,
    hash: String,
    input_paths: BTreeMap<String, String>,
    out: PathBuf,
}

impl Run {
    fn new(command: &str, params: Value, inputs: &[(&str, &Path)], out: &Path) -> Result<Self> {
        let mut hashes = BTreeMap::new();
        let mut input_paths = BTreeMap::new();
        for (name, path) in inputs {
            hashes.insert(name.to_string(), sha256_file(path)?);
            input_paths.insert(name.to_string(), path.display().to_string());
        }
        let config = json!({ "command": command, "params": params, "inputs": hashes });
        let hash = config_hash(&config);
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(Self {
            config,
            hash,
            input_paths,
            out: out.to_owned(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn finish(self, artifacts: &[&str]) -> Result<()> {
        let mut hashes = BTreeMap::new();
        for name in artifacts {
            hashes.insert(name.to_string(), sha256_file(&self.path(name))?);
        }
        let manifest = RunManifest {
            tool: "lexalign".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.config.clone(),
            config_hash: self.hash.clone(),
            input_paths: self.input_paths.clone(),
            artifacts: hashes,
        };
        self.write_json(RUN_MANIFEST, &manifest)
    }
}

fn load(inputs: &Inputs) -> Result<LexicalSystem> {
    data::load_system(&inputs.manifest, &inputs.embeddings)
}

fn input_list(inputs: &Inputs) -> Vec<(&'static str, &Path)> {
    vec![("manifest", inputs.manifest.as_path()), ("embeddings", inputs.embeddings.as_path())]
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn emit(json_mode: bool, summary: Value, line: String) {
    if json_mode {
        println!("{summary}");
    } else {
        println!("{line}");
    }
}

fn min_available(system: &LexicalSystem, m: Modality) -> usize {
    system.words.iter().map(|w| w.exemplars(m).len()).min().unwrap_or(0)
}

fn cmd_validate(inputs: &Inputs, json_mode: bool) -> Result<i32> {
    for p in [&inputs.manifest, &inputs.embeddings] {
        std::fs::metadata(p).map_err(|e| Error::io(p, e))?;
    }
    let report = match load(inputs) {
        Ok(system) => data::validate(&system),
        Err(e) if e.is_environmental() => return Err(e),
        Err(e) => ValidationReport {
            ok: false,
            issues: vec![data::Issue {
                severity: Severity::Error,
                word: None,
                message: e.to_string(),
            }],
        },
    };
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for issue in &report.issues {
            println!("{issue}");
        }
        println!("{}", if report.ok { "ok" } else { "invalid" });
    }
    Ok(if report.ok { EXIT_OK } else { EXIT_DOMAIN })
}

fn cmd_metrics(inputs: &Inputs, output: &Output) -> Result<i32> {
    let run = Run::new("metrics", json!({}), &input_list(inputs), &output.out)?;
    let system = load(inputs)?;
    let report = with_threads(output.threads, || metrics::system_metrics(&system.full_view()))?;
    report.write_csv(&run.path("metrics.csv"))?;
    let s = &report.system;
    emit(
        output.json,
        json!({ "words": report.words.len(), "system": s, "config_hash": run.hash }),
        format!(
            "words={} visual_variability={:.6} visual_discriminability={:.6} linguistic_variability={:.6} linguistic_discriminability={:.6}",
            report.words.len(),
            s.visual_variability,
            s.visual_discriminability,
            s.linguistic_variability,
            s.linguistic_discriminability
        ),
    );
    run.finish(&["metrics.csv"])?;
    Ok(EXIT_OK)
}

fn cmd_align(inputs: &Inputs, seed: u64, permutations: usize, output: &Output) -> Result<i32> {
    let run = Run::new(
        "align",
        json!({ "seed": seed, "permutations": permutations }),
        &input_list(inputs),
        &output.out,
    )?;
    let system = load(inputs)?;
    let view = system.full_view();
    let result = with_threads(output.threads, || {
        let sv = alignment::view_similarity(&view, Modality::Visual)?;
        let sl = alignment::view_similarity(&view, Modality::Linguistic)?;
        alignment::align(&sv, &sl, permutations, seed)
    })?;
    alignment::write_permuted_csv(&result.permuted_rhos, &run.path("permuted_rhos.csv"))?;
    let file = AlignmentFile {
        rho_true: result.rho_true,
        relative_strength: result.relative_strength,
        n_permutations: result.n_permutations,
        seed: result.seed,
        permuted_rhos_path: Some("permuted_rhos.csv"),
        config_hash: Some(&run.hash),
    };
    run.write_json("alignment.json", &file)?;
    emit(
        output.json,
        json!({ "rho_true": result.rho_true, "relative_strength": result.relative_strength, "config_hash": run.hash }),
        format!("rho_true={:.6} relative_strength={:.4}", result.rho_true, result.relative_strength),
    );
    run.finish(&["alignment.json", "permuted_rhos.csv"])?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_aggregate(
    inputs: &Inputs,
    mode: AggregateMode,
    seed: u64,
    permutations: usize,
    sims: Option<usize>,
    max_k: Option<usize>,
    fixed_other: Option<usize>,
    max_visual: usize,
    max_linguistic: usize,
    output: &Output,
) -> Result<i32> {
    let system = load(inputs)?;
    match mode {
        AggregateMode::Grid => {
            let sims = sims.unwrap_or(500);
            let run = Run::new(
                "aggregate",
                json!({
                    "mode": "grid", "seed": seed, "permutations": permutations, "sims": sims,
                    "max_visual": max_visual, "max_linguistic": max_linguistic,
                }),
                &input_list(inputs),
                &output.out,
            )?;
            let grid = with_threads(output.threads, || {
                let g = simulation::aggregate_grid(&system, max_visual, max_linguistic, sims, permutations, seed)?;
                // Gradients need at least two levels along each axis.
                if max_visual >= 2 && max_linguistic >= 2 {
                    simulation::gradient_field(&g)
                } else {
                    Ok(g)
                }
            })?;
            simulation::write_grid_csv(&grid, &run.path("aggregation.csv"))?;
            run.write_json("aggregation.json", &json!({ "grid": grid, "config_hash": run.hash }))?;
            let (lo, hi) = (grid.cell(1, 1), grid.cell(max_visual, max_linguistic));
            emit(
                output.json,
                json!({
                    "cells": grid.cells.len(),
                    "corner_low": lo.mean_relative_strength,
                    "corner_high": hi.mean_relative_strength,
                    "config_hash": run.hash,
                }),
                format!(
                    "cells={} relative_strength(1,1)={:.4} relative_strength({max_visual},{max_linguistic})={:.4}",
                    grid.cells.len(),
                    lo.mean_relative_strength,
                    hi.mean_relative_strength
                ),
            );
            run.finish(&["aggregation.csv", "aggregation.json"])?;
        }
        AggregateMode::Visual | AggregateMode::Linguistic => {
            let m = if mode == AggregateMode::Visual {
                Modality::Visual
            } else {
                Modality::Linguistic
            };
            let sims = sims.unwrap_or(1000);
            let max_k = max_k.unwrap_or_else(|| min_available(&system, m));
            let fixed_other = fixed_other.unwrap_or_else(|| min_available(&system, m.other()).min(20));
            let run = Run::new(
                "aggregate",
                json!({
                    "mode": m.as_str(), "seed": seed, "permutations": permutations, "sims": sims,
                    "max_k": max_k, "fixed_other": fixed_other,
                }),
                &input_list(inputs),
                &output.out,
            )?;
            let curve = with_threads(output.threads, || {
                simulation::aggregate_curve(&system, m, max_k, fixed_other, sims, permutations, seed)
            })?;
            simulation::write_curve_csv(&curve, &run.path("aggregation.csv"))?;
            run.write_json("aggregation.json", &json!({ "curve": curve, "config_hash": run.hash }))?;
            let (first, last) = (&curve.levels[0], curve.levels.last().expect("nonempty curve"));
            emit(
                output.json,
                json!({
                    "levels": curve.levels.len(),
                    "first": first.mean_relative_strength,
                    "last": last.mean_relative_strength,
                    "config_hash": run.hash,
                }),
                format!(
                    "mode={m} relative_strength(k=1)={:.4} relative_strength(k={})={:.4}",
                    first.mean_relative_strength, last.k, last.mean_relative_strength
                ),
            );
            run.finish(&["aggregation.csv", "aggregation.json"])?;
        }
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_regress(
    inputs: &Inputs,
    aoa: &Path,
    frequency: &Path,
    rounds: usize,
    depth: usize,
    learning_rate: f64,
    output: &Output,
) -> Result<i32> {
    let params = BoosterParams {
        n_rounds: rounds,
        max_depth: depth,
        learning_rate,
        ..BoosterParams::default()
    };
    params.check()?;
    let mut inputs_hashed = input_list(inputs);
    inputs_hashed.push(("aoa", aoa));
    inputs_hashed.push(("frequency", frequency));
    let run = Run::new("regress", serde_json::to_value(&params).expect("params"), &inputs_hashed, &output.out)?;

    let system = load(inputs)?;
    let aoa = regression::load_aoa(aoa)?;
    let freq = regression::load_frequency(frequency)?;
    let (table, report) = with_threads(output.threads, || {
        let view = system.full_view();
        let m = metrics::system_metrics(&view)?;
        let sv = alignment::view_similarity(&view, Modality::Visual)?;
        let sl = alignment::view_similarity(&view, Modality::Linguistic)?;
        let rowwise = (0..view.n_words())
            .map(|i| alignment::rowwise_alignment(&sv, &sl, i))
            .collect::<Result<Vec<_>>>()?;
        let table = regression::assemble_features(&m, &rowwise, &freq, &aoa)?;
        let report = regression::run_regression(&table, &params)?;
        Ok((table, report))
    })?;
    let mut artifacts = report.write_bundle(&table, &run.out)?;
    let ranking: Vec<&str> = report.ranking().iter().map(|&j| table.feature_names[j].as_str()).collect();
    run.write_json(
        "fit.json",
        &json!({ "fit": report.fit, "ranking": ranking, "excluded": table.exclusions.len(), "config_hash": run.hash }),
    )?;
    artifacts.push("fit.json");
    emit(
        output.json,
        json!({ "fit": report.fit, "top_feature": ranking[0], "excluded": table.exclusions.len(), "config_hash": run.hash }),
        format!(
            "rows={} excluded={} rmse={:.4} top_feature={}",
            report.fit.n_rows,
            table.exclusions.len(),
            report.fit.rmse,
            ranking[0]
        ),
    );
    run.finish(&artifacts)?;
    Ok(EXIT_OK)
}

/// Outcome of re-checking a run manifest.
#[derive(Debug, Serialize)]
pub struct Verification {
    pub ok: bool,
    pub problems: Vec<String>,
    pub checked: usize,
}

pub fn verify_dir(out: &Path) -> Result<Verification> {
    let path = out.join(RUN_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut problems = Vec::new();
    let mut checked = 0;
    if config_hash(&manifest.config) != manifest.config_hash {
        problems.push("config hash does not match recorded config".to_string());
    }
    for (name, expected) in &manifest.artifacts {
        let p = out.join(name);
        checked += 1;
        let actual = sha256_file(&p)?;
        if &actual != expected {
            problems.push(format!("{name}: content hash changed"));
            continue;
        }
        if name.ends_with(".json") {
            let declared = std::fs::read_to_string(&p)
                .ok()
                .and_then(|t| serde_json::from_str::<Value>(&t).ok())
                .and_then(|v| v.get("config_hash").and_then(Value::as_str).map(str::to_owned));
            if let Some(h) = declared {
                if h != manifest.config_hash {
                    problems.push(format!("{name}: declares config hash {h}, run manifest has {}", manifest.config_hash));
                }
            }
        }
    }
    // Inputs are re-hashed when still reachable at their recorded paths.
    if let Some(Value::Object(hashes)) = manifest.config.get("inputs") {
        for (name, expected) in hashes {
            if let Some(p) = manifest.input_paths.get(name) {
                let p = Path::new(p);
                if p.exists() {
                    checked += 1;
                    if Some(sha256_file(p)?.as_str()) != expected.as_str() {
                        problems.push(format!("input {name} ({}) changed since the run", p.display()));
                    }
                }
            }
        }
    }
    Ok(Verification {
        ok: problems.is_empty(),
        problems,
        checked,
    })
}

fn cmd_verify(out: &Path, json_mode: bool) -> Result<i32> {
    let v = verify_dir(out)?;
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&v).expect("verification serializes"));
    } else {
        for p in &v.problems {
            println!("mismatch: {p}");
        }
        println!("{} ({} files checked)", if v.ok { "ok" } else { "FAILED" }, v.checked);
    }
    Ok(if v.ok { EXIT_OK } else { EXIT_DOMAIN })
}

fn stage(command: &Command) -> &'static str {
    match command {
        Command::Validate { .. } => "validate",
        Command::Metrics { .. } => "metrics",
        Command::Align { .. } => "align",
        Command::Aggregate { .. } => "aggregate",
        Command::Regress { .. } => "regress",
        Command::Verify { .. } => "verify",
    }
}

/// Runs one parsed command; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Validate { inputs, json } => cmd_validate(inputs, *json),
        Command::Metrics { inputs, output } => cmd_metrics(inputs, output),
        Command::Align {
            inputs,
            seed,
            permutations,
            output,
        } => cmd_align(inputs, *seed, *permutations, output),
        Command::Aggregate {
            inputs,
            mode,
            seed,
            permutations,
            sims,
            max_k,
            fixed_other,
            max_visual,
            max_linguistic,
            output,
        } => cmd_aggregate(
            inputs,
            *mode,
            *seed,
            *permutations,
            *sims,
            *max_k,
            *fixed_other,
            *max_visual,
            *max_linguistic,
            output,
        ),
        Command::Regress {
            inputs,
            aoa,
            frequency,
            rounds,
            depth,
            learning_rate,
            output,
        } => cmd_regress(inputs, aoa, frequency, *rounds, *depth, *learning_rate, output),
        Command::Verify { out, json } => cmd_verify(out, *json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lexalign {}: error: {e}", stage(&cli.command));
            if e.is_environmental() {
                EXIT_ENVIRONMENT
            } else {
                EXIT_DOMAIN
            }
        }
    }
}
