//! The photonic chip: FFT-mesh MZI array plus homodyne readout.

mod readout;
mod topology;
mod unitary;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use readout::{
    effective_matrix, homodyne_readout, output_field, MixerIntensities, ReadoutVector,
    ReferenceArm,
};
pub use topology::{
    build_topology, ExternalShifter, MeshLayer, MeshTopology, MziSite, DEFAULT_FFT16_JSON,
};
pub use unitary::{
    compose_unitary, coupler, mzi_transfer, voltages_to_phases, PhaseConfig, ThermoOpticParams,
    UnitaryMatrix, VoltageVector,
};

use crate::error::{Error, Result};
use crate::qubo::{BinaryState, TransformMatrix};

/// A programmed chip. Immutable; reconfiguring builds a new value.
#[derive(Clone, Debug)]
pub struct ConfiguredMesh {
    topology: Arc<MeshTopology>,
    voltages: VoltageVector,
    phases: PhaseConfig,
    unitary: UnitaryMatrix,
    reference: ReferenceArm,
}

impl ConfiguredMesh {
    pub fn new(
        topology: Arc<MeshTopology>,
        voltages: VoltageVector,
        thermo: &ThermoOpticParams,
        reference: ReferenceArm,
    ) -> Result<Self> {
        if voltages.len() != topology.n_shifters {
            return Err(Error::dim("voltage vector", topology.n_shifters, voltages.len()));
        }
        if reference.phi_ref.len() != topology.n_ports {
            return Err(Error::dim("reference phases", topology.n_ports, reference.phi_ref.len()));
        }
        let phases = voltages_to_phases(&voltages, thermo)?;
        let unitary = compose_unitary(&topology, &phases)?;
        Ok(Self {
            topology,
            voltages,
            phases,
            unitary,
            reference,
        })
    }

    pub fn n(&self) -> usize {
        self.topology.n_ports
    }

    pub fn topology(&self) -> &MeshTopology {
        &self.topology
    }

    pub fn voltages(&self) -> &VoltageVector {
        &self.voltages
    }

    pub fn phases(&self) -> &PhaseConfig {
        &self.phases
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn reference(&self) -> &ReferenceArm {
        &self.reference
    }

    pub fn readout(&self, s: &BinaryState) -> Result<ReadoutVector> {
        homodyne_readout(&self.unitary, s, &self.reference).map(|(_, r)| r)
    }

    pub fn effective_matrix(&self) -> Result<TransformMatrix> {
        effective_matrix(&self.unitary, &self.reference)
    }

    pub fn dump(&self) -> MeshStateDump {
        let n = self.n();
        let mut u = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.unitary.0[(i, j)];
                u.push([z.re, z.im]);
            }
        }
        let a = self.effective_matrix().ok().map(|a| {
            let m = a.matrix();
            (0..n).flat_map(|i| (0..n).map(move |j| m[(i, j)])).collect()
        });
        MeshStateDump {
            n_ports: n,
            voltages: self.voltages.as_slice().to_vec(),
            phases: self.phases.phi.clone(),
            e_ref: self.reference.e_ref,
            phi_ref: self.reference.phi_ref.clone(),
            u,
            a,
        }
    }
}

/// JSON snapshot of a programmed mesh. Matrices are row-major; complex
/// entries are `[re, im]` pairs. `a` is absent when the reference phases
/// are not all zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshStateDump {
    pub n_ports: usize,
    pub voltages: Vec<f64>,
    pub phases: Vec<f64>,
    pub e_ref: f64,
    pub phi_ref: Vec<f64>,
    pub u: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub a: Option<Vec<f64>>,
}
