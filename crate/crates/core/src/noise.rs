//! Readout noise and the stability metrics of the optical multiplier.
//!
//! The channel is `r'_i = (1 + ε) r_i + η_i`: `ε ~ N(0, laser_rel_sigma)` is
//! drawn once per shot (laser power is common to all channels) and
//! `η_i ~ N(0, detector_sigma)` per detector. An optional ADC quantizer
//! rounds the result.
//!
//! Metrics: fidelity `F = |m·t| / (|m||t|)`, scale factor `P = |m|²/|t|²`,
//! cost-function SNR `mean(P)/std(P)` quoted as `20 log10`, resolution
//! `R = 1/SNR`, and the fraction of proposals whose true relative cost
//! increase lies inside the resolution.

use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::anneal::RunRecord;
use crate::error::{Error, Result};
use crate::mesh::ReadoutVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Additive Gaussian std per detector channel, in readout units.
    pub detector_sigma: f64,
    /// Relative std of the common-mode laser amplitude per shot.
    pub laser_rel_sigma: f64,
    pub adc_bits: Option<u8>,
    /// The ADC covers `[-adc_full_scale, adc_full_scale]`.
    pub adc_full_scale: f64,
    /// Heater DAC resolution over `[0, v_max]`.
    pub dac_bits: Option<u8>,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            detector_sigma: 0.0,
            laser_rel_sigma: 0.0,
            adc_bits: None,
            adc_full_scale: 4.0,
            dac_bits: None,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.detector_sigma >= 0.0) || !(self.laser_rel_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise sigmas must be >= 0".into()));
        }
        for bits in [self.adc_bits, self.dac_bits].into_iter().flatten() {
            if !(4..=16).contains(&bits) {
                return Err(Error::InvalidParameter(format!(
                    "quantizer resolution {bits} bits outside [4, 16]"
                )));
            }
        }
        if self.adc_bits.is_some() && !(self.adc_full_scale > 0.0) {
            return Err(Error::InvalidParameter("adc_full_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.detector_sigma == 0.0 && self.laser_rel_sigma == 0.0 && self.adc_bits.is_none()
    }
}

/// Symmetric mid-tread quantizer with `2^bits` codes over `[-fs, fs]`.
pub fn quantize(x: f64, bits: u8, full_scale: f64) -> f64 {
    let half = (1i64 << (bits - 1)) as f64;
    let step = full_scale / half;
    (x / step).round().clamp(-half, half - 1.0) * step
}

/// Rounds voltages onto a `2^bits`-level DAC grid over `[0, v_max]`.
pub fn quantize_voltages(v: &[f64], v_max: f64, bits: u8) -> Vec<f64> {
    let top = ((1u32 << bits) - 1) as f64;
    v.iter()
        .map(|&x| ((x / v_max) * top).round().clamp(0.0, top) / top * v_max)
        .collect()
}

pub fn apply_noise<R: Rng + ?Sized>(r: &ReadoutVector, np: &NoiseParams, rng: &mut R) -> ReadoutVector {
    let eps: f64 = StandardNormal.sample(rng);
    let gain = 1.0 + np.laser_rel_sigma * eps;
    let out = r
        .as_slice()
        .iter()
        .map(|&x| {
            let eta: f64 = StandardNormal.sample(rng);
            let y = gain * x + np.detector_sigma * eta;
            match np.adc_bits {
                Some(bits) => quantize(y, bits, np.adc_full_scale),
                None => y,
            }
        })
        .collect();
    ReadoutVector(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fidelity(measured: &ReadoutVector, theoretical: &ReadoutVector) -> Result<f64> {
    if measured.len() != theoretical.len() {
        return Err(Error::dim("fidelity", theoretical.len(), measured.len()));
    }
    let mm = measured.norm_sq();
    let tt = theoretical.norm_sq();
    if mm == 0.0 || tt == 0.0 {
        return Err(Error::UndefinedFidelity);
    }
    let f = dot(measured.as_slice(), theoretical.as_slice()).abs() / (mm * tt).sqrt();
    Ok(f.min(1.0))
}

pub fn scale_factor(measured: &ReadoutVector, theoretical: &ReadoutVector) -> Result<f64> {
    if measured.len() != theoretical.len() {
        return Err(Error::dim("scale factor", theoretical.len(), measured.len()));
    }
    let tt = theoretical.norm_sq();
    if tt == 0.0 {
        return Err(Error::UndefinedScale);
    }
    Ok(measured.norm_sq() / tt)
}

/// Cost-function SNR. `snr` is `+∞` (and `resolution` 0) when every scale
/// factor is identical.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrEstimate {
    pub snr: f64,
    pub snr_db: f64,
    pub resolution: f64,
}

impl SnrEstimate {
    pub fn from_snr(snr: f64) -> Self {
        Self {
            snr,
            snr_db: 20.0 * snr.log10(),
            resolution: 1.0 / snr,
        }
    }

    pub fn from_db(snr_db: f64) -> Self {
        Self::from_snr(10f64.powf(snr_db / 20.0))
    }

    pub fn is_infinite(&self) -> bool {
        self.snr.is_infinite()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn snr_and_resolution(scale_factors: &[f64]) -> Result<SnrEstimate> {
    if scale_factors.len() < 2 {
        return Err(Error::InvalidParameter(
            "SNR needs at least two scale factors".into(),
        ));
    }
    let sd = std_dev(scale_factors);
    let snr = if sd == 0.0 {
        f64::INFINITY
    } else {
        mean(scale_factors) / sd
    };
    Ok(SnrEstimate::from_snr(snr))
}

/// Fraction of relative cost changes with `R > C_r > 0`.
pub fn fraction_within_resolution(relative_changes: &[f64], resolution: f64) -> f64 {
    if relative_changes.is_empty() {
        return 0.0;
    }
    let hits = relative_changes
        .iter()
        .filter(|&&c| c > 0.0 && c < resolution)
        .count();
    hits as f64 / relative_changes.len() as f64
}

/// `C_r = (C_sampled − C_previous) / |C_min|` over the iterations in
/// `window`, using theoretical costs. Positive values are true increases.
pub fn relative_cost_changes(record: &RunRecord, window: Range<usize>, c_min: f64) -> Vec<f64> {
    let scale = c_min.abs();
    let end = window.end.min(record.iterations.len());
    (window.start..end)
        .map(|t| {
            let previous = if t == 0 {
                record.initial_theoretical_cost
            } else {
                record.iterations[t - 1].current_theoretical_cost
            };
            (record.iterations[t].theoretical_cost - previous) / scale
        })
        .collect()
}

pub fn wrong_acceptance_fraction(
    record: &RunRecord,
    window: Range<usize>,
    c_min: f64,
    resolution: f64,
) -> f64 {
    fraction_within_resolution(&relative_cost_changes(record, window, c_min), resolution)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mean_fidelity: f64,
    pub fidelity_std: f64,
    pub mean_scale: f64,
    pub scale_std: f64,
    /// `None` when the scale factor never varied (infinite SNR).
    pub snr_db: Option<f64>,
    pub resolution: f64,
    /// `None` when the run does not reach the analysis window.
    pub wrong_accept_fraction: Option<f64>,
}

/// Per-run report from the fidelities and scale factors recorded during
/// annealing. `None` if the run carried no photonic readouts.
pub fn stability_report(record: &RunRecord, c_min: f64, window: Range<usize>) -> Option<StabilityReport> {
    let fids: Vec<f64> = record.iterations.iter().filter_map(|it| it.fidelity).collect();
    let scales: Vec<f64> = record.iterations.iter().filter_map(|it| it.scale).collect();
    if fids.is_empty() || scales.len() < 2 {
        return None;
    }
    let snr = snr_and_resolution(&scales).ok()?;
    let wrong = (window.start < record.iterations.len() && c_min != 0.0)
        .then(|| wrong_acceptance_fraction(record, window, c_min, snr.resolution));
    Some(StabilityReport {
        mean_fidelity: mean(&fids),
        fidelity_std: std_dev(&fids),
        mean_scale: mean(&scales),
        scale_std: std_dev(&scales),
        snr_db: (!snr.is_infinite()).then_some(snr.snr_db),
        resolution: snr.resolution,
        wrong_accept_fraction: wrong,
    })
}

/// Campaign-level summary: means of the per-run values, with the spread
/// of per-run mean fidelities. SNR is averaged linearly, then converted.
pub fn aggregate_reports(reports: &[StabilityReport]) -> Option<StabilityReport> {
    if reports.is_empty() {
        return None;
    }
    let col = |f: &dyn Fn(&StabilityReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let fids = col(&|r| r.mean_fidelity);
    let scales = col(&|r| r.mean_scale);
    let snrs: Vec<f64> = reports
        .iter()
        .map(|r| r.snr_db.map_or(f64::INFINITY, |db| 10f64.powf(db / 20.0)))
        .collect();
    let snr = SnrEstimate::from_snr(mean(&snrs));
    let wrong: Vec<f64> = reports.iter().filter_map(|r| r.wrong_accept_fraction).collect();
    Some(StabilityReport {
        mean_fidelity: mean(&fids),
        fidelity_std: std_dev(&fids),
        mean_scale: mean(&scales),
        scale_std: std_dev(&scales),
        snr_db: (!snr.is_infinite()).then_some(snr.snr_db),
        resolution: snr.resolution,
        wrong_accept_fraction: (!wrong.is_empty()).then(|| mean(&wrong)),
    })
}

/// Scale-factor SNR of `theoretical` readouts pushed through the channel
/// once each, with fixed pre-drawn normals so the result is a smooth,
/// deterministic function of `detector_sigma`.
struct CalibrationDraws {
    targets: Vec<ReadoutVector>,
    laser: Vec<f64>,
    detector: Vec<Vec<f64>>,
}

impl CalibrationDraws {
    fn new(theoretical: &[ReadoutVector], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<ReadoutVector> = theoretical
            .iter()
            .filter(|t| t.norm_sq() > 0.0)
            .cloned()
            .collect();
        let laser = targets.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let detector = targets
            .iter()
            .map(|t| (0..t.len()).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Self {
            targets,
            laser,
            detector,
        }
    }

    fn snr(&self, detector_sigma: f64, laser_rel_sigma: f64) -> f64 {
        let scales: Vec<f64> = self
            .targets
            .iter()
            .zip(&self.laser)
            .zip(&self.detector)
            .map(|((t, &eps), etas)| {
                let gain = 1.0 + laser_rel_sigma * eps;
                let m: f64 = t
                    .as_slice()
                    .iter()
                    .zip(etas)
                    .map(|(&x, &eta)| {
                        let y = gain * x + detector_sigma * eta;
                        y * y
                    })
                    .sum();
                m / t.norm_sq()
            })
            .collect();
        let sd = std_dev(&scales);
        if sd == 0.0 {
            f64::INFINITY
        } else {
            mean(&scales) / sd
        }
    }
}

/// Inverse calibration: the detector sigma at which the scale-factor SNR
/// over `theoretical` readouts equals `target_snr_db`.
pub fn calibrate_detector_sigma(
    theoretical: &[ReadoutVector],
    laser_rel_sigma: f64,
    target_snr_db: f64,
    seed: u64,
) -> Result<f64> {
    let draws = CalibrationDraws::new(theoretical, seed);
    if draws.targets.len() < 2 {
        return Err(Error::InvalidParameter(
            "calibration needs at least two nonzero readouts".into(),
        ));
    }
    let target = 10f64.powf(target_snr_db / 20.0);
    if draws.snr(0.0, laser_rel_sigma) <= target {
        return Err(Error::InvalidParameter(format!(
            "laser noise alone is below {target_snr_db} dB SNR"
        )));
    }
    let scale = draws
        .targets
        .iter()
        .map(|t| t.norm_sq().sqrt())
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = scale;
    while draws.snr(hi, laser_rel_sigma) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if draws.snr(mid, laser_rel_sigma) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
