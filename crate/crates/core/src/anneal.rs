//! Simulated-annealing-like search driven by an optical or exact cost.
//!
//! Each iteration draws a flip count `m` (small values become more likely
//! as β grows), toggles `m` distinct random bits of the current state,
//! evaluates the proposal and accepts it with probability
//! `min(1, exp(β ΔC))`, where `ΔC = C_current − C_proposed` so that
//! improvements are always taken.
//!
//! β is dimensionless: costs are divided by a scale estimated from a
//! short warm-up of random states, so the optical readout's arbitrary
//! `(2|E_ref|)²` factor drops out.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ConfiguredMesh, ReadoutVector};
use crate::noise::{self, NoiseParams};
use crate::qubo::{self, BinaryState, QuboProblem, TransformMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ramp {
    Linear,
    Geometric,
}

/// β rises from `beta_start` to `beta_end` over the first
/// `ramp_fraction` of the run and then holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    pub n_iterations: usize,
    pub ramp: Ramp,
    #[serde(default = "full_ramp")]
    pub ramp_fraction: f64,
}

fn full_ramp() -> f64 {
    1.0
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            beta_start: 1.0,
            beta_end: 700.0,
            n_iterations: 1000,
            ramp: Ramp::Geometric,
            ramp_fraction: 0.3,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_start > 0.0) || !(self.beta_end > self.beta_start) {
            return Err(Error::InvalidParameter(format!(
                "schedule needs 0 < beta_start < beta_end, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        if self.n_iterations == 0 {
            return Err(Error::InvalidParameter("n_iterations must be >= 1".into()));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ramp_fraction {} outside (0, 1]",
                self.ramp_fraction
            )));
        }
        Ok(())
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        let span = ((self.n_iterations - 1) as f64 * self.ramp_fraction).round();
        if span < 1.0 {
            return if t == 0 { self.beta_start } else { self.beta_end };
        }
        let x = (t as f64 / span).min(1.0);
        match self.ramp {
            Ramp::Linear => self.beta_start + x * (self.beta_end - self.beta_start),
            Ramp::Geometric => self.beta_start * (self.beta_end / self.beta_start).powf(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipLawKind {
    /// `m = 1 + X`, `X ~ Geometric(1 − e^{−β·scale})` conditioned on `X ≤ n − 1`.
    GeometricTruncated,
    /// `m = 1 + ⌊X⌋`, `X ~ Exp` with mean `(n − 1) e^{−β·scale}`, capped at `n − 1`.
    ExponentialMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipLaw {
    pub law: FlipLawKind,
    pub scale: f64,
}

impl Default for FlipLaw {
    fn default() -> Self {
        Self {
            law: FlipLawKind::GeometricTruncated,
            scale: 0.001,
        }
    }
}

pub fn sample_flip_count<R: Rng + ?Sized>(beta: f64, fl: &FlipLaw, n: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if n <= 1 {
        return 1;
    }
    let rate = beta * fl.scale;
    let x = match fl.law {
        FlipLawKind::GeometricTruncated => {
            // Inverse CDF of the truncated geometric on {0, .., n−1}.
            let tail = (-rate * n as f64).exp();
            (-(1.0 - u * (1.0 - tail)).ln() / rate).floor()
        }
        FlipLawKind::ExponentialMean => {
            let mean = (n - 1) as f64 * (-rate).exp();
            (-mean * (1.0 - u).ln()).floor()
        }
    };
    let x = if x.is_finite() { x.max(0.0) as usize } else { 0 };
    1 + x.min(n - 1)
}

/// Toggles `m` distinct uniformly chosen positions.
pub fn propose<R: Rng + ?Sized>(s: &BinaryState, m: usize, rng: &mut R) -> Result<BinaryState> {
    let n = s.len();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("flip count {m} outside [1, {n}]")));
    }
    let mut next = s.clone();
    for i in rand::seq::index::sample(rng, n, m) {
        next.toggle(i);
    }
    Ok(next)
}

/// Metropolis test with `delta_c = C_previous − C_new`. Always consumes
/// one uniform draw so that evaluators with different cost scales stay on
/// the same random stream.
pub fn accept<R: Rng + ?Sized>(delta_c: f64, beta: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    delta_c >= 0.0 || u < (beta * delta_c).exp()
}

/// What produces the optical readout.
#[derive(Clone, Debug)]
pub enum Ovmm {
    /// A simulated chip read through its homodyne detectors.
    Mesh(Arc<ConfiguredMesh>),
    /// An ideal real multiplier, e.g. `A = √D·Q` from a decomposition.
    Matrix(TransformMatrix),
}

impl Ovmm {
    fn readout(&self, s: &BinaryState) -> Result<ReadoutVector> {
        match self {
            Ovmm::Mesh(mesh) => mesh.readout(s),
            Ovmm::Matrix(a) => a.apply(s).map(ReadoutVector::from),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    Exact,
    PhotonicNoiseless,
    PhotonicNoisy,
}

#[derive(Clone, Debug)]
pub struct CostEvaluator {
    problem: QuboProblem,
    optics: Option<Optics>,
}

#[derive(Clone, Debug)]
struct Optics {
    ovmm: Ovmm,
    theory: TransformMatrix,
    noise: Option<NoiseParams>,
}

/// One cost evaluation. `fidelity` and `scale` compare the measured
/// readout against the theoretical `A s` and are absent for the exact
/// evaluator or a zero theoretical vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub measured: f64,
    pub theoretical: f64,
    pub fidelity: Option<f64>,
    pub scale: Option<f64>,
}

impl CostEvaluator {
    pub fn exact(problem: QuboProblem) -> Self {
        Self {
            problem,
            optics: None,
        }
    }

    /// Optical evaluator. Theoretical costs always come from `problem`;
    /// the theoretical readout is `A s` with `A` the mesh's effective
    /// matrix or the given transform.
    pub fn photonic(problem: QuboProblem, ovmm: Ovmm, noise: Option<NoiseParams>) -> Result<Self> {
        let theory = match &ovmm {
            Ovmm::Mesh(mesh) => mesh.effective_matrix()?,
            Ovmm::Matrix(a) => a.clone(),
        };
        let n = problem.n();
        if theory.matrix().ncols() != n {
            return Err(Error::dim("optical multiplier inputs", n, theory.matrix().ncols()));
        }
        if let Some(np) = &noise {
            np.validate()?;
        }
        let noise = noise.filter(|np| !np.is_silent());
        Ok(Self {
            problem,
            optics: Some(Optics { ovmm, theory, noise }),
        })
    }

    pub fn kind(&self) -> EvaluatorKind {
        match &self.optics {
            None => EvaluatorKind::Exact,
            Some(o) if o.noise.is_some() => EvaluatorKind::PhotonicNoisy,
            Some(_) => EvaluatorKind::PhotonicNoiseless,
        }
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn problem(&self) -> &QuboProblem {
        &self.problem
    }

    pub fn theory(&self) -> Option<&TransformMatrix> {
        self.optics.as_ref().map(|o| &o.theory)
    }

    pub fn noise_seed(&self) -> u64 {
        self.optics
            .as_ref()
            .and_then(|o| o.noise.as_ref())
            .map_or(0, |np| np.seed)
    }

    pub fn evaluate<R: Rng + ?Sized>(&self, s: &BinaryState, noise_rng: &mut R) -> Result<Evaluation> {
        let theoretical = qubo::cost(&self.problem, s)?;
        let Some(optics) = &self.optics else {
            return Ok(Evaluation {
                measured: theoretical,
                theoretical,
                fidelity: None,
                scale: None,
            });
        };
        let clean = optics.ovmm.readout(s)?;
        let measured = match &optics.noise {
            Some(np) => noise::apply_noise(&clean, np, noise_rng),
            None => clean,
        };
        let expected = ReadoutVector::from(optics.theory.apply(s)?);
        Ok(Evaluation {
            measured: qubo::cost_from_readout(measured.as_slice()),
            theoretical,
            fidelity: noise::fidelity(&measured, &expected).ok(),
            scale: noise::scale_factor(&measured, &expected).ok(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub schedule: AnnealSchedule,
    pub flip_law: FlipLaw,
    /// Random states measured before the run to set the cost scale.
    pub warmup_samples: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            schedule: AnnealSchedule::default(),
            flip_law: FlipLaw::default(),
            warmup_samples: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub beta: f64,
    pub m: usize,
    pub proposed: BinaryState,
    pub accepted: bool,
    /// Measured cost of the proposal.
    pub measured_cost: f64,
    /// Theoretical cost of the proposal.
    pub theoretical_cost: f64,
    /// Theoretical cost of the current state after the decision.
    pub current_theoretical_cost: f64,
    /// Lowest measured cost among accepted states so far.
    pub best_measured_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale: Option<f64>,
}

/// Equality ignores `wall_clock`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub seed: u64,
    pub initial_state: BinaryState,
    pub initial_measured_cost: f64,
    pub initial_theoretical_cost: f64,
    /// Warm-up estimate of the cost magnitude that β is quoted against.
    pub cost_scale: f64,
    pub iterations: Vec<IterationRecord>,
    pub best_state: BinaryState,
    /// Theoretical cost of `best_state`.
    pub best_cost: f64,
    pub best_measured_cost: f64,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.run_index == other.run_index
            && self.seed == other.seed
            && self.initial_state == other.initial_state
            && self.initial_measured_cost == other.initial_measured_cost
            && self.initial_theoretical_cost == other.initial_theoretical_cost
            && self.cost_scale == other.cost_scale
            && self.iterations == other.iterations
            && self.best_state == other.best_state
            && self.best_cost == other.best_cost
            && self.best_measured_cost == other.best_measured_cost
    }
}

impl RunRecord {
    /// Current state after each iteration, rebuilt from the proposals.
    pub fn accepted_states(&self) -> Vec<BinaryState> {
        let mut current = self.initial_state.clone();
        self.iterations
            .iter()
            .map(|it| {
                if it.accepted {
                    current = it.proposed.clone();
                }
                current.clone()
            })
            .collect()
    }

    pub fn final_theoretical_cost(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_theoretical_cost, |it| it.current_theoretical_cost)
    }
}

/// One annealing run. `rng` drives initialization, proposals and
/// acceptance; the noise channel gets its own stream derived from it.
pub fn anneal<R: Rng + ?Sized>(ev: &CostEvaluator, cfg: &AnnealConfig, rng: &mut R) -> Result<RunRecord> {
    cfg.schedule.validate()?;
    if !(cfg.flip_law.scale > 0.0) {
        return Err(Error::InvalidParameter("flip law scale must be > 0".into()));
    }
    let started = Instant::now();
    let n = ev.n();
    let noise_stream: u64 = rng.random();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_stream ^ ev.noise_seed());
    let wrap = |iteration: usize| move |e: Error| Error::Evaluation {
        iteration,
        source: Box::new(e),
    };

    let initial = BinaryState::random(n, rng);
    let first = ev.evaluate(&initial, &mut noise_rng).map_err(wrap(0))?;

    let mut cost_scale = first.measured.abs();
    for _ in 0..cfg.warmup_samples {
        let s = BinaryState::random(n, rng);
        let e = ev.evaluate(&s, &mut noise_rng).map_err(wrap(0))?;
        cost_scale = cost_scale.max(e.measured.abs());
    }
    if !(cost_scale > 0.0) {
        cost_scale = 1.0;
    }

    let mut current = initial.clone();
    let mut current_measured = first.measured;
    let mut current_theoretical = first.theoretical;
    let mut best = (initial.clone(), first.measured, first.theoretical);
    let mut iterations = Vec::with_capacity(cfg.schedule.n_iterations);

    for t in 0..cfg.schedule.n_iterations {
        let beta = cfg.schedule.beta_at(t);
        let m = sample_flip_count(beta, &cfg.flip_law, n, rng);
        let proposed = propose(&current, m, rng).map_err(wrap(t))?;
        let e = ev.evaluate(&proposed, &mut noise_rng).map_err(wrap(t))?;
        let delta = (current_measured - e.measured) / cost_scale;
        let accepted = accept(delta, beta, rng);
        if accepted {
            current = proposed.clone();
            current_measured = e.measured;
            current_theoretical = e.theoretical;
            if e.measured < best.1 {
                best = (current.clone(), e.measured, e.theoretical);
            }
        }
        iterations.push(IterationRecord {
            iteration: t,
            beta,
            m,
            proposed,
            accepted,
            measured_cost: e.measured,
            theoretical_cost: e.theoretical,
            current_theoretical_cost: current_theoretical,
            best_measured_cost: best.1,
            fidelity: e.fidelity,
            scale: e.scale,
        });
    }

    Ok(RunRecord {
        run_index: 0,
        seed: 0,
        initial_state: initial,
        initial_measured_cost: first.measured,
        initial_theoretical_cost: first.theoretical,
        cost_scale,
        iterations,
        best_state: best.0,
        best_cost: best.2,
        best_measured_cost: best.1,
        wall_clock: started.elapsed(),
    })
}
