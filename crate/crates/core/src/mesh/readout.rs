//! Reference-arm mixers and balanced photodetectors.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::unitary::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::qubo::{BinaryState, TransformMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceArm {
    /// Common reference amplitude `|E_ref|`. Global optical loss folds in here.
    pub e_ref: f64,
    /// Per-mixer reference phase.
    pub phi_ref: Vec<f64>,
}

impl ReferenceArm {
    pub fn new(e_ref: f64, phi_ref: Vec<f64>) -> Result<Self> {
        if !(e_ref >= 0.0) || !e_ref.is_finite() {
            return Err(Error::InvalidParameter(format!("e_ref = {e_ref} must be >= 0")));
        }
        Ok(Self { e_ref, phi_ref })
    }

    /// All reference phases at zero, the calibration that makes the
    /// detector output proportional to `Re(U) s`.
    pub fn zero_phase(e_ref: f64, n: usize) -> Result<Self> {
        Self::new(e_ref, vec![0.0; n])
    }

    pub fn is_zero_phase(&self) -> bool {
        self.phi_ref.iter().all(|&p| p == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixerIntensities {
    pub i_plus: Vec<f64>,
    pub i_minus: Vec<f64>,
}

/// Differential detector signals `I_BPD`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutVector(pub Vec<f64>);

impl ReadoutVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

impl From<DVector<f64>> for ReadoutVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v.iter().copied().collect())
    }
}

/// `E_out = U s` for a binary input (sum of the selected columns).
pub fn output_field(u: &UnitaryMatrix, s: &BinaryState) -> Result<Vec<Complex64>> {
    let n = u.dim();
    if s.len() != n {
        return Err(Error::dim("mesh input", n, s.len()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, &b) in s.bits().iter().enumerate() {
        if b == 1 {
            for (o, x) in out.iter_mut().zip(u.0.column(j).iter()) {
                *o += x;
            }
        }
    }
    Ok(out)
}

/// Mixer intensities `I± = |E_ref|² + |E_out|² ± |E_ref||E_out| cos(φ_out − φ_ref)`
/// and the balanced difference `I_BPD = I+ − I−`.
pub fn homodyne_readout(
    u: &UnitaryMatrix,
    s: &BinaryState,
    reference: &ReferenceArm,
) -> Result<(MixerIntensities, ReadoutVector)> {
    let n = u.dim();
    if reference.phi_ref.len() != n {
        return Err(Error::dim("reference phases", n, reference.phi_ref.len()));
    }
    let e_out = output_field(u, s)?;
    let r2 = reference.e_ref * reference.e_ref;
    let mut i_plus = Vec::with_capacity(n);
    let mut i_minus = Vec::with_capacity(n);
    let mut i_bpd = Vec::with_capacity(n);
    for (e, &phi_ref) in e_out.iter().zip(&reference.phi_ref) {
        let amp = e.norm();
        let dc = r2 + amp * amp;
        let beat = reference.e_ref * amp * (e.arg() - phi_ref).cos();
        let (p, m) = (dc + beat, dc - beat);
        i_plus.push(p);
        i_minus.push(m);
        i_bpd.push(p - m);
    }
    Ok((MixerIntensities { i_plus, i_minus }, ReadoutVector(i_bpd)))
}

/// `A = 2 |E_ref| Re(U)`, valid only under zero reference phases.
pub fn effective_matrix(u: &UnitaryMatrix, reference: &ReferenceArm) -> Result<TransformMatrix> {
    if !reference.is_zero_phase() {
        return Err(Error::UnsupportedConfiguration(
            "effective real matrix requires all reference phases to be zero".into(),
        ));
    }
    TransformMatrix::new(u.0.map(|z| 2.0 * reference.e_ref * z.re))
}
