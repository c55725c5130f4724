//! Artifact files and their readers.
//!
//! ```text
//! manifest.json                 config echo, seeds, goal names, metric declaration
//! summary.json                  SummaryStats
//! competence_<variant>.csv      epoch,run,competence,goal_1,...,goal_n
//! discovery_<variant>.json      {"goal_<i>": [epoch or null per run]}
//! runs/<variant>/run_<k>/       epochs.jsonl, goals.json, q_tables.txt, run.json
//! ```
//!
//! Nothing time- or host-dependent is written, so identical configs give
//! byte-identical directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use oel_core::agent::Counters;
use oel_core::Variant;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{Evaluation, ResultsBundle, RunResult};
use crate::summary::{summarize, ExperimentData, SummaryStats, VariantData};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDeclaration {
    pub competence: String,
    pub discovery_epoch: String,
}

impl Default for MetricDeclaration {
    fn default() -> Self {
        MetricDeclaration {
            competence: "fraction of scenario goals achieved when each is attempted for one frozen-policy epoch \
                         from a fresh scene (greedy experts, meta exploration at its floor)"
                .into(),
            discovery_epoch: "1-based epoch during which the goal's predicate first appeared as a rising edge \
                              in a discovered goal signature"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: u32,
    pub generator: String,
    pub config: ExperimentConfig,
    pub goals: Vec<String>,
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub metric: MetricDeclaration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunInfo {
    variant: Variant,
    run: u32,
    seed: u64,
    epochs: usize,
    discovery: Vec<Option<u32>>,
    counters: Counters,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::artifact(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::artifact(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

pub fn competence_csv(dir: &Path, variant: Variant) -> PathBuf {
    dir.join(format!("competence_{variant}.csv"))
}

pub fn discovery_json(dir: &Path, variant: Variant) -> PathBuf {
    dir.join(format!("discovery_{variant}.json"))
}

fn csv_header(goals: usize) -> Vec<String> {
    ["epoch", "run", "competence"]
        .into_iter()
        .map(String::from)
        .chain((1..=goals).map(|g| format!("goal_{g}")))
        .collect()
}

fn write_competence(path: &Path, runs: &[&RunResult], goals: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::artifact(path, e))?;
    let err = |e: csv::Error| HarnessError::artifact(path, e);
    w.write_record(csv_header(goals)).map_err(err)?;
    for r in runs {
        for e in &r.evaluations {
            let mut row = vec![e.epoch.to_string(), r.run.to_string(), format!("{:.6}", e.competence())];
            row.extend(e.goals.iter().map(|&g| u8::from(g).to_string()));
            w.write_record(&row).map_err(err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn read_competence(path: &Path, runs: usize, goals: usize) -> Result<Vec<Vec<Evaluation>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::artifact(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::artifact(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header != csv_header(goals) {
        return Err(HarnessError::artifact(path, format!("unexpected header {header:?}")));
    }
    let mut out = vec![Vec::new(); runs];
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| HarnessError::artifact(path, e))?;
        let bad = |what: &str| HarnessError::artifact(path, format!("row {}: {what}", line + 2));
        let int = |i: usize| -> Result<u32> { row[i].parse().map_err(|_| bad("not an integer")) };
        let epoch = int(0)?;
        let run = int(1)? as usize;
        let goal_flags = (3..3 + goals)
            .map(|i| match &row[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad("goal flags must be 0 or 1")),
            })
            .collect::<Result<Vec<_>>>()?;
        let evaluation = Evaluation { epoch, goals: goal_flags };
        if row[2] != format!("{:.6}", evaluation.competence()) {
            return Err(bad("competence disagrees with goal flags"));
        }
        out.get_mut(run).ok_or_else(|| bad("run index out of range"))?.push(evaluation);
    }
    Ok(out)
}

fn discovery_map(runs: &[&RunResult], goals: usize) -> BTreeMap<String, Vec<Option<u32>>> {
    (0..goals)
        .map(|g| (format!("goal_{}", g + 1), runs.iter().map(|r| r.discovery[g]).collect()))
        .collect()
}

fn read_discovery(path: &Path, runs: usize, goals: usize) -> Result<Vec<Vec<Option<u32>>>> {
    let map: BTreeMap<String, Vec<Option<u32>>> = read_json(path)?;
    let mut out = vec![vec![None; goals]; runs];
    for g in 0..goals {
        let key = format!("goal_{}", g + 1);
        let epochs = map.get(&key).ok_or_else(|| HarnessError::artifact(path, format!("missing {key}")))?;
        if epochs.len() != runs {
            return Err(HarnessError::artifact(path, format!("{key}: expected {runs} runs, found {}", epochs.len())));
        }
        for (run, &e) in epochs.iter().enumerate() {
            out[run][g] = e;
        }
    }
    Ok(out)
}

fn write_run(dir: &Path, r: &RunResult) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join("epochs.jsonl");
    let mut lines = Vec::new();
    for record in &r.records {
        serde_json::to_writer(&mut lines, record).map_err(|e| HarnessError::artifact(&path, e))?;
        lines.push(b'\n');
    }
    write_file(&path, &lines)?;
    write_json(&dir.join("goals.json"), &r.goal_map)?;
    write_file(&dir.join("q_tables.txt"), r.q_tables.as_bytes())?;
    write_json(
        &dir.join("run.json"),
        &RunInfo {
            variant: r.variant,
            run: r.run,
            seed: r.seed,
            epochs: r.records.len(),
            discovery: r.discovery.clone(),
            counters: r.counters,
        },
    )
}

pub fn manifest(bundle: &ResultsBundle) -> Manifest {
    let config = &bundle.config;
    Manifest {
        artifact_version: ARTIFACT_VERSION,
        generator: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config: config.clone(),
        goals: bundle.goal_names.clone(),
        seeds: config
            .variants
            .iter()
            .map(|v| (v.to_string(), (0..config.runs).map(|r| config.seed(r)).collect()))
            .collect(),
        metric: MetricDeclaration::default(),
    }
}

/// Writes every artifact and returns the summary stored in `summary.json`.
pub fn write_outputs(bundle: &ResultsBundle, dir: &Path) -> Result<SummaryStats> {
    create_dir(dir)?;
    let goals = bundle.goal_names.len();
    for &variant in &bundle.config.variants {
        let runs: Vec<&RunResult> = bundle.runs_of(variant).collect();
        write_competence(&competence_csv(dir, variant), &runs, goals)?;
        write_json(&discovery_json(dir, variant), &discovery_map(&runs, goals))?;
        for r in &runs {
            write_run(&dir.join("runs").join(variant.as_str()).join(format!("run_{:02}", r.run)), r)?;
        }
    }
    let summary = summarize(&bundle.data())?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("manifest.json"), &manifest(bundle))?;
    Ok(summary)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let manifest: Manifest = read_json(&path)?;
    if manifest.artifact_version != ARTIFACT_VERSION {
        return Err(HarnessError::artifact(
            &path,
            format!("artifact version {} is not supported", manifest.artifact_version),
        ));
    }
    Ok(manifest)
}

/// Rebuilds the summary inputs from a results directory.
pub fn read_data(dir: &Path) -> Result<ExperimentData> {
    let manifest = read_manifest(dir)?;
    let config = &manifest.config;
    let goals = manifest.goals.len();
    let runs = config.runs as usize;
    let variants = config
        .variants
        .iter()
        .map(|&variant| {
            Ok(VariantData {
                variant,
                evaluations: read_competence(&competence_csv(dir, variant), runs, goals)?,
                discovery: read_discovery(&discovery_json(dir, variant), runs, goals)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentData { epochs: config.epochs, goal_names: manifest.goals, variants })
}

/// Recomputes the summary from files and rewrites `summary.json`.
pub fn summarize_dir(dir: &Path) -> Result<SummaryStats> {
    let summary = summarize(&read_data(dir)?)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> Result<SummaryStats> {
    read_json(&dir.join("summary.json"))
}

/// Human-readable digest of a summary, one line per item.
pub fn render_summary(summary: &SummaryStats, mut out: impl std::io::Write) -> std::io::Result<()> {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x}"));
    for v in &summary.variants {
        writeln!(out, "{} ({} runs)", v.variant, v.runs)?;
        for d in &v.discovery {
            writeln!(
                out,
                "  goal {} {:<10} found {:>2}/{:<2} median {:>7}  iqr [{}, {}]  range [{}, {}]",
                d.goal,
                d.name,
                d.discovered,
                d.discovered + d.missed,
                fmt(d.median),
                fmt(d.q1),
                fmt(d.q3),
                fmt(d.min),
                fmt(d.max)
            )?;
        }
        if let Some(last) = v.competence.last() {
            writeln!(out, "  competence at epoch {}: {:.3} ± {:.3}", last.epoch, last.mean, last.sd)?;
        }
    }
    for t in &summary.tests {
        writeln!(
            out,
            "goal {} {} earlier than {}: U = {}, one-sided p = {:.4}",
            t.goal, t.a, t.b, t.test.u, t.test.p_less
        )?;
    }
    out.flush()
}
