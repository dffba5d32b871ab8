use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anneal::{AnnealConfig, AnnealSchedule, EvaluatorKind, FlipLaw, Ramp};
use crate::error::{Error, Result};
use crate::mesh::ThermoOpticParams;
use crate::noise::NoiseParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ProblemSource {
    File { path: PathBuf },
    RandomPsd { n: usize },
    RandomMeshVoltages { n: usize },
}

impl Default for ProblemSource {
    fn default() -> Self {
        ProblemSource::RandomMeshVoltages { n: 16 }
    }
}

/// Chip settings used by the mesh-based problem source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshSettings {
    /// Topology description; the built-in butterfly when absent.
    pub topology: Option<PathBuf>,
    pub v_max: f64,
    pub thermo: ThermoOpticParams,
    pub e_ref: f64,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self {
            topology: None,
            v_max: 5.0,
            thermo: ThermoOpticParams::default(),
            e_ref: 0.5,
        }
    }
}

/// β ramp without the iteration count, which lives on the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaRamp {
    pub beta_start: f64,
    pub beta_end: f64,
    pub ramp: Ramp,
    pub ramp_fraction: f64,
}

impl Default for BetaRamp {
    fn default() -> Self {
        let s = AnnealSchedule::default();
        Self {
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            ramp: s.ramp,
            ramp_fraction: s.ramp_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub mesh: MeshSettings,
    pub runs: usize,
    pub iterations: usize,
    pub eta_grid: Vec<f64>,
    pub evaluator: EvaluatorKind,
    pub noise: NoiseParams,
    /// When set, `noise.detector_sigma` is replaced by the value that
    /// gives this cost-function SNR on states from noiseless pilot runs.
    pub target_snr_db: Option<f64>,
    pub pilot_runs: usize,
    pub schedule: BetaRamp,
    pub flip_law: FlipLaw,
    pub warmup_samples: usize,
    pub master_seed: u64,
    /// Iteration window `[start, end)` for the wrong-acceptance analysis.
    pub wrong_accept_window: [usize; 2],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::default(),
            mesh: MeshSettings::default(),
            runs: 100,
            iterations: 1000,
            eta_grid: vec![0.96, 0.97, 0.98, 0.99],
            evaluator: EvaluatorKind::PhotonicNoisy,
            noise: NoiseParams {
                laser_rel_sigma: 0.005,
                ..Default::default()
            },
            target_snr_db: Some(26.6),
            pilot_runs: 4,
            schedule: BetaRamp::default(),
            flip_law: FlipLaw::default(),
            warmup_samples: AnnealConfig::default().warmup_samples,
            master_seed: 1,
            wrong_accept_window: [400, 600],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be >= 1".into()));
        }
        if let Some(eta) = self.eta_grid.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::InvalidParameter(format!("eta {eta} outside (0, 1]")));
        }
        if self.wrong_accept_window[0] >= self.wrong_accept_window[1] {
            return Err(Error::InvalidParameter("wrong_accept_window is empty".into()));
        }
        self.noise.validate()?;
        self.anneal_config().schedule.validate()
    }

    pub fn anneal_config(&self) -> AnnealConfig {
        AnnealConfig {
            schedule: AnnealSchedule {
                beta_start: self.schedule.beta_start,
                beta_end: self.schedule.beta_end,
                n_iterations: self.iterations,
                ramp: self.schedule.ramp,
                ramp_fraction: self.schedule.ramp_fraction,
            },
            flip_law: self.flip_law.clone(),
            warmup_samples: self.warmup_samples,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"mode": "random-psd", "n": 8}, "runs": 3, "evaluator": "exact"}"#,
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemSource::RandomPsd { n: 8 });
        assert_eq!(cfg.runs, 3);
        assert_eq!(cfg.iterations, 1000);
        assert_eq!(cfg.evaluator, EvaluatorKind::Exact);
    }

    #[test]
    fn bad_eta_rejected() {
        let cfg = ExperimentConfig {
            eta_grid: vec![0.5, 1.2],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            runs: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
