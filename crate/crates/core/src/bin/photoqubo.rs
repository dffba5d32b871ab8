//! Command-line front end: problem generation, campaigns, post-processing
//! of exported records and the latency model.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use photoqubo::anneal::EvaluatorKind;
use photoqubo::harness::{
    self, ExperimentConfig, MeshSettings, ProblemSource, StabilityFile,
};
use photoqubo::timing::{self, TimingParams};
use photoqubo::{Error, Result};

#[derive(Parser)]
#[command(name = "photoqubo", version, about = "Photonic QUBO solver digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem file (and the mesh state for mesh problems).
    Gen(GenArgs),
    /// Run a campaign and export its records.
    Solve(SolveArgs),
    /// Recompute stability metrics from exported records.
    Stability(DirArgs),
    /// Re-derive curves.csv and evolution.csv from exported records.
    Curves(CurvesArgs),
    /// Print the latency breakdown and throughput.
    Timing(TimingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    RandomPsd,
    RandomMeshVoltages,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "random-mesh-voltages")]
    mode: Mode,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Problem file to write.
    #[arg(long)]
    out: PathBuf,
    /// Mesh state dump, for mesh problems.
    #[arg(long)]
    mesh_out: Option<PathBuf>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    e_ref: Option<f64>,
    #[arg(long)]
    topology: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Evaluator {
    Exact,
    PhotonicNoiseless,
    PhotonicNoisy,
}

impl From<Evaluator> for EvaluatorKind {
    fn from(e: Evaluator) -> Self {
        match e {
            Evaluator::Exact => EvaluatorKind::Exact,
            Evaluator::PhotonicNoiseless => EvaluatorKind::PhotonicNoiseless,
            Evaluator::PhotonicNoisy => EvaluatorKind::PhotonicNoisy,
        }
    }
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "PHOTOQUBO_OUT", default_value = "photoqubo-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Experiment configuration (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
    #[arg(long)]
    problem_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    evaluator: Option<Evaluator>,
    /// Calibrate the detector noise to this cost-function SNR.
    #[arg(long, conflicts_with = "detector_sigma")]
    snr_db: Option<f64>,
    /// Fixed detector noise; disables calibration.
    #[arg(long)]
    detector_sigma: Option<f64>,
    #[arg(long)]
    laser_sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long)]
    beta_start: Option<f64>,
    #[arg(long)]
    beta_end: Option<f64>,
}

#[derive(Args)]
struct DirArgs {
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    out: OutDir,
    /// Tolerance grid; the campaign's own grid when omitted.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    clock_hz: Option<f64>,
    #[arg(long)]
    mod_bandwidth_hz: Option<f64>,
    #[arg(long)]
    pd_bandwidth_hz: Option<f64>,
    #[arg(long)]
    path_length_m: Option<f64>,
    #[arg(long)]
    group_index: Option<f64>,
    #[arg(long)]
    rx_cycles: Option<u32>,
    #[arg(long)]
    iter_time_s: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    chip_area_mm2: Option<f64>,
    /// Replace the measured converter latency: DAC part, in ns.
    #[arg(long, requires = "adc_ns")]
    dac_ns: Option<f64>,
    /// Replace the measured converter latency: ADC part, in ns.
    #[arg(long, requires = "dac_ns")]
    adc_ns: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn problem_source(mode: Mode, n: usize) -> ProblemSource {
    match mode {
        Mode::RandomPsd => ProblemSource::RandomPsd { n },
        Mode::RandomMeshVoltages => ProblemSource::RandomMeshVoltages { n },
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn gen(a: GenArgs) -> Result<()> {
    let mut mesh = MeshSettings {
        topology: a.topology,
        ..Default::default()
    };
    set(&mut mesh.v_max, a.v_max);
    set(&mut mesh.e_ref, a.e_ref);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let g = harness::generate_problem(&problem_source(a.mode, a.n), &mesh, None, &mut rng)?;
    g.problem.save(&a.out)?;
    if let (Some(path), Some(m)) = (&a.mesh_out, &g.mesh) {
        write_json(path, &m.dump())?;
    }
    let gt = photoqubo::qubo::brute_force_min(&g.problem).ok();
    let summary = serde_json::json!({
        "problem": a.out,
        "n": g.problem.n(),
        "ground_truth": gt,
    });
    println!("{summary}");
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = a.problem_file {
        cfg.problem = ProblemSource::File { path };
    } else if a.mode.is_some() || a.n.is_some() {
        let n = a.n.unwrap_or(match cfg.problem {
            ProblemSource::RandomPsd { n } | ProblemSource::RandomMeshVoltages { n } => n,
            ProblemSource::File { .. } => 16,
        });
        let mode = a.mode.unwrap_or(match cfg.problem {
            ProblemSource::RandomPsd { .. } => Mode::RandomPsd,
            _ => Mode::RandomMeshVoltages,
        });
        cfg.problem = problem_source(mode, n);
    }
    set(&mut cfg.runs, a.runs);
    set(&mut cfg.iterations, a.iterations);
    set(&mut cfg.master_seed, a.seed);
    set(&mut cfg.evaluator, a.evaluator.map(Into::into));
    set(&mut cfg.noise.laser_rel_sigma, a.laser_sigma);
    set(&mut cfg.eta_grid, a.eta);
    set(&mut cfg.schedule.beta_start, a.beta_start);
    set(&mut cfg.schedule.beta_end, a.beta_end);
    if let Some(db) = a.snr_db {
        cfg.target_snr_db = Some(db);
    }
    if let Some(sigma) = a.detector_sigma {
        cfg.noise.detector_sigma = sigma;
        cfg.target_snr_db = None;
    }

    let result = harness::run_campaign(&cfg)?;
    harness::export(&result, &a.out.out)?;
    let summary = serde_json::json!({
        "out": a.out.out,
        "runs": result.runs.len(),
        "ground_truth": result.ground_truth,
        "detector_sigma": result.noise.as_ref().map(|n| n.detector_sigma),
        "final_success": result
            .curves
            .iter()
            .map(|c| serde_json::json!({"eta": c.eta, "probability": c.final_value()}))
            .collect::<Vec<_>>(),
        "stability": result.stability,
    });
    println!("{summary}");
    Ok(())
}

fn stability(a: DirArgs) -> Result<()> {
    let dir = &a.out.out;
    let res = harness::load(dir)?;
    let (runs, aggregate) =
        harness::stability_of(&res.runs, res.ground_truth.c_min, res.config.wrong_accept_window);
    harness::write_stability(&dir.join("stability.json"), &StabilityFile { aggregate: aggregate.clone(), runs })?;
    println!(
        "{}",
        serde_json::to_string_pretty(&aggregate).expect("stability report serializes")
    );
    Ok(())
}

fn curves(a: CurvesArgs) -> Result<()> {
    let dir = &a.out.out;
    let res = harness::load(dir)?;
    let c_min = res.ground_truth.c_min;
    let etas = a.eta.unwrap_or(res.config.eta_grid.clone());
    let curves = etas
        .iter()
        .map(|&eta| harness::success_curve(&res.runs, c_min, eta))
        .collect::<Result<Vec<_>>>()?;
    harness::write_curves(&dir.join("curves.csv"), &curves)?;
    harness::write_evolution(&dir.join("evolution.csv"), &res.runs, c_min)?;
    for c in &curves {
        println!("eta {}: final {:?}", c.eta, c.final_value());
    }
    Ok(())
}

fn timing_cmd(a: TimingArgs) -> Result<()> {
    let mut p = TimingParams::default();
    set(&mut p.clock_hz, a.clock_hz);
    set(&mut p.mod_bandwidth_hz, a.mod_bandwidth_hz);
    set(&mut p.pd_bandwidth_hz, a.pd_bandwidth_hz);
    set(&mut p.path_length_m, a.path_length_m);
    set(&mut p.group_index, a.group_index);
    set(&mut p.rx_latency_cycles, a.rx_cycles);
    set(&mut p.iter_time_s, a.iter_time_s);
    set(&mut p.n, a.n);
    set(&mut p.chip_area_mm2, a.chip_area_mm2);
    let mut b = timing::latency_breakdown(&p)?;
    if let (Some(dac), Some(adc)) = (a.dac_ns, a.adc_ns) {
        b = timing::with_converters(&b, dac * 1e-9, adc * 1e-9)?;
    }
    let t = timing::throughput(&p, &b);
    let rows = [
        ("t0_s", b.t0),
        ("tau_mod_s", b.tau_mod),
        ("tau_pd_s", b.tau_pd),
        ("tau_prop_s", b.tau_prop),
        ("tau_ovmm_s", b.tau_ovmm),
        ("tau_dacadc_s", b.tau_dacadc),
        ("tau_rx_s", b.tau_rx),
        ("tau_fpga_s", b.tau_fpga),
        ("tau_iter_s", b.tau_iter),
        ("loop_flops_per_s", t.loop_flops_per_s),
        ("ovmm_flops_per_s", t.ovmm_flops_per_s),
        ("area_gmac_per_mm2", t.area_gmac_mm2),
    ];
    match a.format {
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = rows
                .iter()
                .map(|(k, v)| (k.to_string(), serde_json::json!(timing::sig4(*v))))
                .collect();
            println!("{}", serde_json::to_string_pretty(&map).expect("map serializes"));
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let csv_err = |source| Error::Csv {
                path: PathBuf::from("<stdout>"),
                source,
            };
            w.write_record(["quantity", "value"]).map_err(csv_err)?;
            for (k, v) in rows {
                w.write_record([k, &format!("{:e}", timing::sig4(v))]).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Stability(a) => stability(a),
        Command::Curves(a) => curves(a),
        Command::Timing(a) => timing_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
