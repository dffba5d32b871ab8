use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::problem::{generate_problem, GeneratedProblem};
use crate::anneal::{anneal, CostEvaluator, EvaluatorKind, Ovmm, RunRecord};
use crate::error::{Error, Result};
use crate::mesh::{MeshStateDump, ReadoutVector};
use crate::noise::{self, aggregate_reports, stability_report, NoiseParams, StabilityReport};
use crate::qubo::{brute_force_min, decompose, GroundTruth, QuboProblem};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

const PROBLEM_STREAM: u64 = u64::MAX;
const CALIBRATION_STREAM: u64 = u64::MAX - 1;
const PILOT_STREAM_BASE: u64 = 1 << 40;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under `master`. Runs use `stream = run index`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(master.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1))))
}

/// Fraction of runs, per iteration, whose accepted state has a true cost
/// within `eta` of the optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub eta: f64,
    pub probability: Vec<f64>,
}

impl SuccessCurve {
    pub fn final_value(&self) -> Option<f64> {
        self.probability.last().copied()
    }
}

/// `C < η·C_min`, with the optimum itself always counted.
pub fn is_success(cost: f64, c_min: f64, eta: f64) -> bool {
    cost < eta * c_min || cost <= c_min
}

pub fn success_curve(records: &[RunRecord], c_min: f64, eta: f64) -> Result<SuccessCurve> {
    if !(c_min < 0.0) {
        return Err(Error::DegenerateProblem(c_min));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside (0, 1]")));
    }
    let len = records.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
    let mut hits = vec![0usize; len];
    for r in records {
        for (t, h) in hits.iter_mut().enumerate() {
            // A run that ended early keeps its last state.
            let c = r
                .iterations
                .get(t)
                .or(r.iterations.last())
                .map_or(r.initial_theoretical_cost, |it| it.current_theoretical_cost);
            if is_success(c, c_min, eta) {
                *h += 1;
            }
        }
    }
    let total = records.len().max(1) as f64;
    Ok(SuccessCurve {
        eta,
        probability: hits.into_iter().map(|h| h as f64 / total).collect(),
    })
}

/// Current true cost over `|C_min|`, per run and iteration.
pub fn evolution(records: &[RunRecord], c_min: f64) -> Result<Vec<Vec<f64>>> {
    if c_min == 0.0 {
        return Err(Error::DegenerateProblem(c_min));
    }
    let scale = c_min.abs();
    Ok(records
        .iter()
        .map(|r| {
            r.iterations
                .iter()
                .map(|it| it.current_theoretical_cost / scale)
                .collect()
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub code_version: String,
    pub config: ExperimentConfig,
    pub problem: QuboProblem,
    pub mesh: Option<MeshStateDump>,
    pub ground_truth: GroundTruth,
    /// Noise actually applied, after calibration. `None` when noiseless.
    pub noise: Option<NoiseParams>,
    pub runs: Vec<RunRecord>,
    pub curves: Vec<SuccessCurve>,
    pub run_stability: Vec<Option<StabilityReport>>,
    pub stability: Option<StabilityReport>,
}

fn build_evaluator(
    kind: EvaluatorKind,
    generated: &GeneratedProblem,
    noise: Option<NoiseParams>,
) -> Result<CostEvaluator> {
    if kind == EvaluatorKind::Exact {
        return Ok(CostEvaluator::exact(generated.problem.clone()));
    }
    let ovmm = match &generated.mesh {
        Some(mesh) => Ovmm::Mesh(Arc::clone(mesh)),
        None => Ovmm::Matrix(decompose(&generated.problem)?.1),
    };
    let noise = if kind == EvaluatorKind::PhotonicNoisy { noise } else { None };
    CostEvaluator::photonic(generated.problem.clone(), ovmm, noise)
}

fn run_one(ev: &CostEvaluator, cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = anneal(ev, &cfg.anneal_config(), &mut rng)?;
    record.run_index = index;
    record.seed = seed;
    Ok(record)
}

/// Detector sigma for the target SNR, measured on the states proposed by
/// noiseless pilot runs.
fn calibrate(cfg: &ExperimentConfig, generated: &GeneratedProblem, target_db: f64) -> Result<f64> {
    let pilot_ev = build_evaluator(EvaluatorKind::PhotonicNoiseless, generated, None)?;
    let theory = pilot_ev.theory().expect("photonic evaluator has a theory matrix");
    let mut readouts = Vec::new();
    for i in 0..cfg.pilot_runs.max(1) {
        let seed = derive_seed(cfg.master_seed, PILOT_STREAM_BASE + i as u64);
        let record = run_one(&pilot_ev, cfg, i, seed)?;
        for it in &record.iterations {
            readouts.push(ReadoutVector::from(theory.apply(&it.proposed)?));
        }
    }
    noise::calibrate_detector_sigma(
        &readouts,
        cfg.noise.laser_rel_sigma,
        target_db,
        derive_seed(cfg.master_seed, CALIBRATION_STREAM),
    )
}

/// Generates the problem, solves it exhaustively, calibrates the noise if
/// asked, then runs the annealer `cfg.runs` times in parallel. Results
/// depend only on the configuration.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let mut problem_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, PROBLEM_STREAM));
    let generated = generate_problem(&cfg.problem, &cfg.mesh, cfg.noise.dac_bits, &mut problem_rng)?;
    let ground_truth = brute_force_min(&generated.problem)?;

    let noise = match cfg.evaluator {
        EvaluatorKind::PhotonicNoisy => {
            let mut np = cfg.noise.clone();
            if let Some(db) = cfg.target_snr_db {
                np.detector_sigma = calibrate(cfg, &generated, db)?;
            }
            (!np.is_silent()).then_some(np)
        }
        _ => None,
    };
    let ev = build_evaluator(cfg.evaluator, &generated, noise.clone())?;

    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|i| run_one(&ev, cfg, i, derive_seed(cfg.master_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let c_min = ground_truth.c_min;
    let curves = if c_min < 0.0 {
        cfg.eta_grid
            .iter()
            .map(|&eta| success_curve(&runs, c_min, eta))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let (run_stability, stability) = stability_of(&runs, c_min, cfg.wrong_accept_window);

    Ok(CampaignResult {
        code_version: CODE_VERSION.to_string(),
        config: cfg.clone(),
        problem: generated.problem,
        mesh: generated.mesh.map(|m| m.dump()),
        ground_truth,
        noise,
        runs,
        curves,
        run_stability,
        stability,
    })
}

pub fn stability_of(
    runs: &[RunRecord],
    c_min: f64,
    window: [usize; 2],
) -> (Vec<Option<StabilityReport>>, Option<StabilityReport>) {
    let per_run: Vec<Option<StabilityReport>> = runs
        .iter()
        .map(|r| stability_report(r, c_min, window[0]..window[1]))
        .collect();
    let present: Vec<StabilityReport> = per_run.iter().flatten().cloned().collect();
    let aggregate = aggregate_reports(&present);
    (per_run, aggregate)
}
