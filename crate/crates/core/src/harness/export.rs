//! On-disk layout of a campaign.
//!
//! | file | content |
//! |---|---|
//! | `campaign.json` | code version, configuration, ground truth, applied noise |
//! | `problem.json` | the weight matrix |
//! | `mesh.json` | chip state, for mesh-generated problems only |
//! | `runs.jsonl` | one iteration record per line, tagged with its run |
//! | `summary.csv` | one row per run |
//! | `curves.csv` | `eta,iteration,probability` |
//! | `evolution.csv` | `run,iteration,normalized_cost` |
//! | `stability.json` | per-run and aggregate stability reports |
//!
//! Every file is written even for an empty campaign, and the bytes depend
//! only on the configuration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::campaign::{evolution, CampaignResult, SuccessCurve};
use super::config::ExperimentConfig;
use crate::anneal::{IterationRecord, RunRecord};
use crate::error::{Error, Result};
use crate::mesh::MeshStateDump;
use crate::noise::{NoiseParams, StabilityReport};
use crate::qubo::{BinaryState, GroundTruth, QuboProblem};

#[derive(Serialize, Deserialize)]
struct CampaignFile {
    code_version: String,
    config: ExperimentConfig,
    ground_truth: GroundTruth,
    noise: Option<NoiseParams>,
}

#[derive(Serialize, Deserialize)]
struct IterationLine {
    run: usize,
    #[serde(flatten)]
    record: IterationRecord,
}

#[derive(Serialize, Deserialize)]
struct SummaryRow {
    run: usize,
    seed: u64,
    initial_state: BinaryState,
    initial_measured_cost: f64,
    initial_theoretical_cost: f64,
    cost_scale: f64,
    best_state: BinaryState,
    best_cost: f64,
    best_measured_cost: f64,
    final_cost: f64,
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    eta: f64,
    iteration: usize,
    probability: f64,
}

#[derive(Serialize, Deserialize)]
struct EvolutionRow {
    run: usize,
    iteration: usize,
    normalized_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityFile {
    pub aggregate: Option<StabilityReport>,
    pub runs: Vec<Option<StabilityReport>>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err(path))
}

pub fn write_curves(path: &Path, curves: &[SuccessCurve]) -> Result<()> {
    let rows = curves.iter().flat_map(|c| {
        c.probability.iter().enumerate().map(move |(iteration, &probability)| CurveRow {
            eta: c.eta,
            iteration,
            probability,
        })
    });
    write_rows(path, &["eta", "iteration", "probability"], rows)
}

pub fn read_curves(path: &Path) -> Result<Vec<SuccessCurve>> {
    let mut curves: Vec<SuccessCurve> = Vec::new();
    for row in read_rows::<CurveRow>(path)? {
        match curves.last_mut() {
            Some(c) if c.eta == row.eta => c.probability.push(row.probability),
            _ => curves.push(SuccessCurve {
                eta: row.eta,
                probability: vec![row.probability],
            }),
        }
    }
    Ok(curves)
}

/// Writes `evolution.csv`; empty (header only) when `C_min = 0`.
pub fn write_evolution(path: &Path, runs: &[RunRecord], c_min: f64) -> Result<()> {
    let table = evolution(runs, c_min).unwrap_or_default();
    let rows = table.iter().enumerate().flat_map(|(run, costs)| {
        costs.iter().enumerate().map(move |(iteration, &normalized_cost)| EvolutionRow {
            run,
            iteration,
            normalized_cost,
        })
    });
    write_rows(path, &["run", "iteration", "normalized_cost"], rows)
}

pub fn write_stability(path: &Path, stability: &StabilityFile) -> Result<()> {
    write_json(path, stability)
}

pub fn export(result: &CampaignResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = |name: &str| -> PathBuf { dir.join(name) };

    write_json(
        &p("campaign.json"),
        &CampaignFile {
            code_version: result.code_version.clone(),
            config: result.config.clone(),
            ground_truth: result.ground_truth.clone(),
            noise: result.noise.clone(),
        },
    )?;
    result.problem.save(&p("problem.json"))?;
    let mesh_path = p("mesh.json");
    match &result.mesh {
        Some(m) => write_json(&mesh_path, m)?,
        None if mesh_path.exists() => std::fs::remove_file(&mesh_path).map_err(|e| Error::io(&mesh_path, e))?,
        None => {}
    }

    let runs_path = p("runs.jsonl");
    let mut w = create(&runs_path)?;
    for r in &result.runs {
        for it in &r.iterations {
            let line = serde_json::to_string(&IterationLine {
                run: r.run_index,
                record: it.clone(),
            })
            .map_err(|source| Error::Json {
                path: runs_path.clone(),
                source,
            })?;
            writeln!(w, "{line}").map_err(|e| Error::io(&runs_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&runs_path, e))?;

    let summary = result.runs.iter().map(|r| SummaryRow {
        run: r.run_index,
        seed: r.seed,
        initial_state: r.initial_state.clone(),
        initial_measured_cost: r.initial_measured_cost,
        initial_theoretical_cost: r.initial_theoretical_cost,
        cost_scale: r.cost_scale,
        best_state: r.best_state.clone(),
        best_cost: r.best_cost,
        best_measured_cost: r.best_measured_cost,
        final_cost: r.final_theoretical_cost(),
    });
    write_rows(
        &p("summary.csv"),
        &[
            "run",
            "seed",
            "initial_state",
            "initial_measured_cost",
            "initial_theoretical_cost",
            "cost_scale",
            "best_state",
            "best_cost",
            "best_measured_cost",
            "final_cost",
        ],
        summary,
    )?;
    write_curves(&p("curves.csv"), &result.curves)?;
    write_evolution(&p("evolution.csv"), &result.runs, result.ground_truth.c_min)?;
    write_stability(
        &p("stability.json"),
        &StabilityFile {
            aggregate: result.stability.clone(),
            runs: result.run_stability.clone(),
        },
    )
}

/// Reads an exported campaign back. Wall-clock times are not stored and
/// come back as zero.
pub fn load(dir: &Path) -> Result<CampaignResult> {
    let p = |name: &str| -> PathBuf { dir.join(name) };
    let campaign: CampaignFile = read_json(&p("campaign.json"))?;
    let problem = QuboProblem::load(&p("problem.json"))?;
    let mesh_path = p("mesh.json");
    let mesh: Option<MeshStateDump> = if mesh_path.exists() {
        Some(read_json(&mesh_path)?)
    } else {
        None
    };

    let summary: Vec<SummaryRow> = read_rows(&p("summary.csv"))?;
    let mut runs: Vec<RunRecord> = summary
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.run != i {
                return Err(Error::Malformed {
                    path: p("summary.csv"),
                    reason: format!("row {i} holds run {}", row.run),
                });
            }
            Ok(RunRecord {
                run_index: row.run,
                seed: row.seed,
                initial_state: row.initial_state,
                initial_measured_cost: row.initial_measured_cost,
                initial_theoretical_cost: row.initial_theoretical_cost,
                cost_scale: row.cost_scale,
                iterations: Vec::new(),
                best_state: row.best_state,
                best_cost: row.best_cost,
                best_measured_cost: row.best_measured_cost,
                wall_clock: Duration::ZERO,
            })
        })
        .collect::<Result<_>>()?;

    let runs_path = p("runs.jsonl");
    let reader = BufReader::new(File::open(&runs_path).map_err(|e| Error::io(&runs_path, e))?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&runs_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: IterationLine = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: runs_path.clone(),
            source,
        })?;
        let run = runs.get_mut(parsed.run).ok_or_else(|| Error::Malformed {
            path: runs_path.clone(),
            reason: format!("line {} refers to unknown run {}", lineno + 1, parsed.run),
        })?;
        run.iterations.push(parsed.record);
    }

    let curves = read_curves(&p("curves.csv"))?;
    let stability: StabilityFile = read_json(&p("stability.json"))?;
    Ok(CampaignResult {
        code_version: campaign.code_version,
        config: campaign.config,
        problem,
        mesh,
        ground_truth: campaign.ground_truth,
        noise: campaign.noise,
        runs,
        curves,
        run_stability: stability.runs,
        stability: stability.aggregate,
    })
}
