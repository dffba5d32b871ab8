//! Latency and throughput of one sampling iteration.
//!
//! The receive signal appears `rx_latency_cycles` clock cycles after the
//! transmit command. That span holds the DAC, the modulator response, the
//! optical propagation, the photodetector response and the ADC. Only the
//! three optical parts are modeled from physics; the converter share is
//! what remains of the measured span.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Rise time from a -3 dB bandwidth.
pub const RISE_TIME_FACTOR: f64 = 0.35;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    pub clock_hz: f64,
    pub mod_bandwidth_hz: f64,
    pub pd_bandwidth_hz: f64,
    pub path_length_m: f64,
    pub group_index: f64,
    pub rx_latency_cycles: u32,
    pub processed_cycles: u32,
    pub sample_rise_cycles: u32,
    pub sample_fall_cycles: u32,
    pub iter_time_s: f64,
    pub n: usize,
    pub chip_area_mm2: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            clock_hz: 245.76e6,
            mod_bandwidth_hz: 28.0e9,
            pd_bandwidth_hz: 41.3e9,
            path_length_m: 9.3e-3,
            group_index: 3.48,
            rx_latency_cycles: 40,
            processed_cycles: 45,
            sample_rise_cycles: 47,
            sample_fall_cycles: 51,
            iter_time_s: 265.1e-9,
            n: 16,
            chip_area_mm2: 37.5,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clock_hz", self.clock_hz),
            ("mod_bandwidth_hz", self.mod_bandwidth_hz),
            ("pd_bandwidth_hz", self.pd_bandwidth_hz),
            ("path_length_m", self.path_length_m),
            ("group_index", self.group_index),
            ("iter_time_s", self.iter_time_s),
            ("chip_area_mm2", self.chip_area_mm2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.n == 0 || self.rx_latency_cycles == 0 {
            return Err(Error::InvalidParameter(
                "n and rx_latency_cycles must be >= 1".into(),
            ));
        }
        if !(self.rx_latency_cycles < self.processed_cycles
            && self.processed_cycles < self.sample_rise_cycles
            && self.sample_rise_cycles < self.sample_fall_cycles)
        {
            return Err(Error::InvalidParameter(
                "cycle marks must satisfy rx < processed < sample rise < sample fall".into(),
            ));
        }
        Ok(())
    }

    pub fn clock_period(&self) -> f64 {
        1.0 / self.clock_hz
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t0: f64,
    pub tau_mod: f64,
    pub tau_pd: f64,
    pub tau_prop: f64,
    pub tau_ovmm: f64,
    pub tau_dacadc: f64,
    /// Transmit-to-receive span: converters plus optics.
    pub tau_rx: f64,
    pub tau_fpga: f64,
    pub tau_iter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub loop_flops_per_s: f64,
    pub ovmm_flops_per_s: f64,
    pub area_gmac_mm2: f64,
}

pub fn response_time(bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be > 0, got {bandwidth_hz}"
        )));
    }
    Ok(RISE_TIME_FACTOR / bandwidth_hz)
}

pub fn propagation_delay(length_m: f64, index: f64) -> Result<f64> {
    if !(length_m >= 0.0) || !(index > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "propagation needs length >= 0 and index > 0, got {length_m} and {index}"
        )));
    }
    Ok(length_m * index / SPEED_OF_LIGHT)
}

pub fn latency_breakdown(p: &TimingParams) -> Result<LatencyBreakdown> {
    p.validate()?;
    let t0 = p.clock_period();
    let tau_mod = response_time(p.mod_bandwidth_hz)?;
    let tau_pd = response_time(p.pd_bandwidth_hz)?;
    let tau_prop = propagation_delay(p.path_length_m, p.group_index)?;
    let tau_ovmm = tau_mod + tau_prop + tau_pd;
    let tau_rx = p.rx_latency_cycles as f64 * t0;
    let tau_fpga = p.iter_time_s - p.sample_fall_cycles as f64 * t0;
    if tau_rx <= tau_ovmm || tau_fpga <= 0.0 {
        return Err(Error::InvalidParameter(
            "measured spans are shorter than the modeled parts they contain".into(),
        ));
    }
    Ok(LatencyBreakdown {
        t0,
        tau_mod,
        tau_pd,
        tau_prop,
        tau_ovmm,
        tau_dacadc: tau_rx - tau_ovmm,
        tau_rx,
        tau_fpga,
        tau_iter: p.iter_time_s,
    })
}

/// Replaces the measured converter share with given DAC and ADC
/// latencies. The transmit-to-receive span becomes
/// `dac + optics + adc` and the iteration shrinks by the time saved.
pub fn with_converters(b: &LatencyBreakdown, dac_s: f64, adc_s: f64) -> Result<LatencyBreakdown> {
    if !(dac_s >= 0.0) || !(adc_s >= 0.0) {
        return Err(Error::InvalidParameter("converter latencies must be >= 0".into()));
    }
    let tau_dacadc = dac_s + adc_s;
    let tau_rx = tau_dacadc + b.tau_ovmm;
    Ok(LatencyBreakdown {
        tau_dacadc,
        tau_rx,
        tau_iter: b.tau_iter - (b.tau_rx - tau_rx),
        ..b.clone()
    })
}

/// `N²` FLOPs per multiplication (one per multiply-accumulate).
pub fn throughput(p: &TimingParams, b: &LatencyBreakdown) -> ThroughputReport {
    let flops = (p.n * p.n) as f64;
    let ovmm = flops / b.tau_ovmm;
    ThroughputReport {
        loop_flops_per_s: flops / b.tau_rx,
        ovmm_flops_per_s: ovmm,
        area_gmac_mm2: ovmm / p.chip_area_mm2 / 1e9,
    }
}

/// Rounds to four significant figures.
pub fn sig4(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.3e}").parse().expect("formatted float parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(got: f64, want: f64, rel: f64) -> bool {
        (got - want).abs() <= rel * want.abs()
    }

    #[test]
    fn response_time_examples() {
        assert!(close(response_time(28.0e9).unwrap(), 12.5e-12, 1e-12));
        assert!(close(response_time(41.3e9).unwrap(), 8.5e-12, 0.01));
        assert!(close(response_time(0.35).unwrap(), 1.0, 1e-15));
        assert!(response_time(0.0).is_err());
        assert!(response_time(-1.0).is_err());
    }

    #[test]
    fn propagation_examples() {
        let t = propagation_delay(9.3e-3, 3.48).unwrap();
        assert!((t - 107.9e-12).abs() < 0.5e-12);
        assert_eq!(propagation_delay(0.0, 3.48).unwrap(), 0.0);
        assert!(close(propagation_delay(1.0, 1.0).unwrap(), 3.3356e-9, 1e-4));
        assert!(propagation_delay(1.0, 0.0).is_err());
    }

    #[test]
    fn default_breakdown_reproduces_reported_latencies() {
        let b = latency_breakdown(&TimingParams::default()).unwrap();
        assert!(close(b.t0, 4.069e-9, 1e-3));
        assert!(close(b.tau_ovmm, 128.9e-12, 0.01));
        assert!(close(b.tau_dacadc, 162.6e-9, 0.01));
        assert!(close(b.tau_fpga, 57.6e-9, 0.01));
        assert!((b.tau_ovmm - (b.tau_mod + b.tau_prop + b.tau_pd)).abs() < 1e-24);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = TimingParams {
            rx_latency_cycles: 0,
            ..Default::default()
        };
        assert!(latency_breakdown(&p).is_err());
        let p = TimingParams {
            mod_bandwidth_hz: 0.0,
            ..Default::default()
        };
        assert!(latency_breakdown(&p).is_err());
        let p = TimingParams {
            sample_rise_cycles: 60,
            ..Default::default()
        };
        assert!(latency_breakdown(&p).is_err());
    }

    #[test]
    fn faster_converters() {
        let b = latency_breakdown(&TimingParams::default()).unwrap();
        let w = with_converters(&b, 3.5e-9, 3.4e-9).unwrap();
        assert!(close(w.tau_dacadc, 6.9e-9, 1e-12));
        // DAC-to-ADC span including the optics; reported as about 7.1 ns.
        assert!(close(w.tau_rx, 7.1e-9, 0.02));
        assert!(w.tau_iter < b.tau_iter);
    }

    #[test]
    fn default_throughput() {
        let p = TimingParams::default();
        let b = latency_breakdown(&p).unwrap();
        let t = throughput(&p, &b);
        assert!(close(t.loop_flops_per_s, 1.57e9, 0.01));
        assert!(close(t.ovmm_flops_per_s, 2.00e12, 0.01));
        assert!(close(t.area_gmac_mm2, 53.3, 0.01));
    }

    #[test]
    fn single_channel_loop_rate() {
        let p = TimingParams {
            n: 1,
            ..Default::default()
        };
        let b = latency_breakdown(&p).unwrap();
        let t = throughput(&p, &b);
        assert!(close(t.loop_flops_per_s, 1.0 / (40.0 * b.t0), 1e-12));
    }

    #[test]
    fn sig4_rounding() {
        assert_eq!(sig4(1.2345678e-10), 1.235e-10);
        assert_eq!(sig4(0.0), 0.0);
        assert_eq!(sig4(-53.2894), -53.29);
    }
}
