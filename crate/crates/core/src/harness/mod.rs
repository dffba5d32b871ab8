//! Experiment campaigns: problem generation, many seeded annealing runs,
//! success curves, stability statistics and their on-disk form.

mod campaign;
mod config;
mod export;
mod problem;

pub use campaign::{
    derive_seed, evolution, is_success, run_campaign, stability_of, success_curve,
    CampaignResult, SuccessCurve, CODE_VERSION,
};
pub use config::{BetaRamp, ExperimentConfig, MeshSettings, ProblemSource};
pub use export::{
    export, load, read_curves, write_curves, write_evolution, write_stability, StabilityFile,
};
pub use problem::{generate_problem, random_mesh, GeneratedProblem};
