//! Voltages to phases to the mesh unitary.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;

use super::topology::MeshTopology;
use crate::error::{Error, Result};

/// Heater bias voltages, one per shifter, each in `[0, v_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoltageVector {
    v: Vec<f64>,
}

impl VoltageVector {
    pub fn new(v: Vec<f64>, v_max: f64) -> Result<Self> {
        if let Some(bad) = v.iter().find(|x| !(0.0..=v_max).contains(*x)) {
            return Err(Error::InvalidParameter(format!(
                "voltage {bad} outside [0, {v_max}]"
            )));
        }
        Ok(Self { v })
    }

    pub fn zeros(n: usize) -> Self {
        Self { v: vec![0.0; n] }
    }

    /// The experiment pattern: every designated shifter (one per MZI) drawn
    /// uniformly from `[0, v_max]`, all others left at zero.
    pub fn random_designated<R: Rng + ?Sized>(topo: &MeshTopology, v_max: f64, rng: &mut R) -> Self {
        let mut v = vec![0.0; topo.n_shifters];
        for id in topo.designated_shifters() {
            v[id] = rng.random::<f64>() * v_max;
        }
        Self { v }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Phenomenological thermo-optic law `φ = k V² + φ₀`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThermoOpticParams {
    pub phase_per_volt_sq: f64,
    /// Static per-shifter bias; empty means all zero.
    #[serde(default)]
    pub phase_offset: Vec<f64>,
}

impl Default for ThermoOpticParams {
    /// 2π of phase at 5 V.
    fn default() -> Self {
        Self {
            phase_per_volt_sq: 2.0 * std::f64::consts::PI / 25.0,
            phase_offset: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig {
    pub phi: Vec<f64>,
}

impl PhaseConfig {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite phase".into()));
        }
        Ok(Self { phi })
    }

    pub fn zeros(n: usize) -> Self {
        Self { phi: vec![0.0; n] }
    }
}

pub fn voltages_to_phases(v: &VoltageVector, p: &ThermoOpticParams) -> Result<PhaseConfig> {
    if p.phase_per_volt_sq <= 0.0 {
        return Err(Error::InvalidParameter("phase_per_volt_sq must be > 0".into()));
    }
    if !p.phase_offset.is_empty() && p.phase_offset.len() != v.len() {
        return Err(Error::dim("phase offsets", v.len(), p.phase_offset.len()));
    }
    let phi = v
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &vk)| {
            let offset = p.phase_offset.get(k).copied().unwrap_or(0.0);
            p.phase_per_volt_sq * vk * vk + offset
        })
        .collect();
    PhaseConfig::new(phi)
}

/// Symmetric 50:50 coupler `(1/√2) [[1, i], [i, 1]]`.
pub fn coupler() -> Matrix2<Complex64> {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let t = Complex64::new(0.0, FRAC_1_SQRT_2);
    Matrix2::new(r, t, t, r)
}

/// `BS · diag(e^{iφ_top}, e^{iφ_bottom}) · BS`.
pub fn mzi_transfer(phi_top: f64, phi_bottom: f64) -> Matrix2<Complex64> {
    let arms = Matrix2::new(
        Complex64::from_polar(1.0, phi_top),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(1.0, phi_bottom),
    );
    let bs = coupler();
    bs * arms * bs
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(pub DMatrix<Complex64>);

impl UnitaryMatrix {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let g = self.0.adjoint() * &self.0;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Left-multiplies rows `a` and `b` of `u` by the 2×2 block `m`.
fn apply_block(u: &mut DMatrix<Complex64>, a: usize, b: usize, m: &Matrix2<Complex64>) {
    for col in 0..u.ncols() {
        let x = u[(a, col)];
        let y = u[(b, col)];
        u[(a, col)] = m[(0, 0)] * x + m[(0, 1)] * y;
        u[(b, col)] = m[(1, 0)] * x + m[(1, 1)] * y;
    }
}

/// Propagates an identity through every layer: the MZI column, then the
/// external shifters that follow it.
pub fn compose_unitary(topo: &MeshTopology, phi: &PhaseConfig) -> Result<UnitaryMatrix> {
    if phi.phi.len() != topo.n_shifters {
        return Err(Error::dim("phase config", topo.n_shifters, phi.phi.len()));
    }
    let mut u = DMatrix::<Complex64>::identity(topo.n_ports, topo.n_ports);
    for layer in &topo.layers {
        for m in &layer.mzis {
            let t = mzi_transfer(phi.phi[m.shifters[0]], phi.phi[m.shifters[1]]);
            apply_block(&mut u, m.ports[0], m.ports[1], &t);
        }
        for e in &layer.external {
            let phase = Complex64::from_polar(1.0, phi.phi[e.shifter]);
            for x in u.row_mut(e.port).iter_mut() {
                *x *= phase;
            }
        }
    }
    Ok(UnitaryMatrix(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::topology::build_topology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed form of the coupler-phase-coupler product, worked by hand.
    fn mzi_closed_form(pt: f64, pb: f64) -> [[Complex64; 2]; 2] {
        let et = Complex64::from_polar(1.0, pt);
        let eb = Complex64::from_polar(1.0, pb);
        let half = c(0.5, 0.0);
        let ihalf = c(0.0, 0.5);
        [
            [half * (et - eb), ihalf * (et + eb)],
            [ihalf * (et + eb), half * (eb - et)],
        ]
    }

    #[test]
    fn zero_voltages_give_zero_phases() {
        let v = VoltageVector::zeros(6);
        let phi = voltages_to_phases(&v, &ThermoOpticParams::default()).unwrap();
        assert_eq!(phi.phi, vec![0.0; 6]);
    }

    #[test]
    fn pi_voltage_inverts() {
        let p = ThermoOpticParams {
            phase_per_volt_sq: 0.7,
            phase_offset: vec![],
        };
        let v = VoltageVector::new(vec![(PI / 0.7).sqrt()], 10.0).unwrap();
        let phi = voltages_to_phases(&v, &p).unwrap();
        assert!((phi.phi[0] - PI).abs() < 1e-12);
    }

    #[test]
    fn random_voltages_follow_square_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 3.0).collect();
        let v = VoltageVector::new(raw.clone(), 3.0).unwrap();
        let p = ThermoOpticParams {
            phase_per_volt_sq: 0.5,
            phase_offset: vec![],
        };
        let phi = voltages_to_phases(&v, &p).unwrap();
        for (got, x) in phi.phi.iter().zip(&raw) {
            assert!((got - 0.5 * x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn voltage_errors() {
        assert!(VoltageVector::new(vec![-0.1], 5.0).is_err());
        assert!(VoltageVector::new(vec![5.1], 5.0).is_err());
        let p = ThermoOpticParams {
            phase_per_volt_sq: 1.0,
            phase_offset: vec![0.0; 3],
        };
        assert!(matches!(
            voltages_to_phases(&VoltageVector::zeros(2), &p),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn mzi_cross_state_at_zero_phase() {
        let m = mzi_transfer(0.0, 0.0);
        assert!((m[(0, 0)]).norm() < 1e-15);
        assert!((m[(1, 1)]).norm() < 1e-15);
        assert!((m[(0, 1)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn mzi_bar_state_at_pi() {
        let m = mzi_transfer(PI, 0.0);
        let oracle = mzi_closed_form(PI, 0.0);
        assert!((m[(0, 0)].norm() - 1.0).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)] - oracle[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mzi_matches_closed_form_and_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let pt = rng.random::<f64>() * 20.0 - 10.0;
            let pb = rng.random::<f64>() * 20.0 - 10.0;
            let m = mzi_transfer(pt, pb);
            let oracle = mzi_closed_form(pt, pb);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m[(i, j)] - oracle[i][j]).norm() < 1e-12);
                }
            }
            let g = m.adjoint() * m;
            assert!((g - Matrix2::identity()).camax() < 1e-12);
        }
    }

    #[test]
    fn zero_phase_mesh_is_a_permutation() {
        let t = build_topology(16).unwrap();
        let u = compose_unitary(&t, &PhaseConfig::zeros(t.n_shifters)).unwrap();
        for i in 0..16 {
            let row: Vec<f64> = (0..16).map(|j| u.0[(i, j)].norm()).collect();
            assert_eq!(row.iter().filter(|x| (**x - 1.0).abs() < 1e-12).count(), 1);
            assert!(row.iter().all(|x| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn two_port_mesh_is_one_mzi() {
        let t = build_topology(2).unwrap();
        let phi = PhaseConfig::new(vec![0.3, 1.9]).unwrap();
        let u = compose_unitary(&t, &phi).unwrap();
        let m = mzi_transfer(0.3, 1.9);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(u.0[(i, j)], m[(i, j)]);
            }
        }
    }

    #[test]
    fn four_port_mesh_matches_dense_factor_product() {
        let t = build_topology(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi: Vec<f64> = (0..t.n_shifters).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let u = compose_unitary(&t, &PhaseConfig::new(phi.clone()).unwrap()).unwrap();

        // Dense oracle: embed each MZI column and each diagonal as a full
        // 4×4 matrix and multiply them in order.
        let mut expect = DMatrix::<Complex64>::identity(4, 4);
        for layer in &t.layers {
            let mut col = DMatrix::<Complex64>::zeros(4, 4);
            for m in &layer.mzis {
                let b = mzi_closed_form(phi[m.shifters[0]], phi[m.shifters[1]]);
                let [a, d] = m.ports;
                col[(a, a)] = b[0][0];
                col[(a, d)] = b[0][1];
                col[(d, a)] = b[1][0];
                col[(d, d)] = b[1][1];
            }
            let mut diag = DMatrix::<Complex64>::identity(4, 4);
            for e in &layer.external {
                diag[(e.port, e.port)] = Complex64::from_polar(1.0, phi[e.shifter]);
            }
            expect = diag * col * expect;
        }
        assert!((u.0 - expect).camax() < 1e-12);
    }

    #[test]
    fn compose_rejects_wrong_length() {
        let t = build_topology(4).unwrap();
        assert!(matches!(
            compose_unitary(&t, &PhaseConfig::zeros(3)),
            Err(Error::Dimension { .. })
        ));
    }
}
