use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{MeshSettings, ProblemSource};
use crate::error::{Error, Result};
use crate::mesh::{build_topology, ConfiguredMesh, MeshTopology, ReferenceArm, VoltageVector};
use crate::noise;
use crate::qubo::{problem_from_transform, QuboProblem, TransformMatrix};

#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub problem: QuboProblem,
    pub mesh: Option<Arc<ConfiguredMesh>>,
}

fn mesh_topology(n: usize, settings: &MeshSettings) -> Result<MeshTopology> {
    let topo = match &settings.topology {
        Some(path) => MeshTopology::load(path)?,
        None => build_topology(n)?,
    };
    if topo.n_ports != n {
        return Err(Error::dim("mesh topology ports", n, topo.n_ports));
    }
    Ok(topo)
}

/// Programs a mesh with the experiment's random voltage pattern.
pub fn random_mesh<R: Rng + ?Sized>(
    n: usize,
    settings: &MeshSettings,
    dac_bits: Option<u8>,
    rng: &mut R,
) -> Result<ConfiguredMesh> {
    let topo = Arc::new(mesh_topology(n, settings)?);
    let mut v = VoltageVector::random_designated(&topo, settings.v_max, rng);
    if let Some(bits) = dac_bits {
        v = VoltageVector::new(
            noise::quantize_voltages(v.as_slice(), settings.v_max, bits),
            settings.v_max,
        )?;
    }
    let reference = ReferenceArm::zero_phase(settings.e_ref, n)?;
    ConfiguredMesh::new(topo, v, &settings.thermo, reference)
}

/// Builds a problem instance.
///
/// `random-mesh-voltages` programs a chip and takes `K = AᵀA` with
/// `A = 2|E_ref| Re(U)`; `random-psd` takes `K = BᵀB` for a standard
/// Gaussian `B`; `file` loads a problem file.
pub fn generate_problem<R: Rng + ?Sized>(
    source: &ProblemSource,
    settings: &MeshSettings,
    dac_bits: Option<u8>,
    rng: &mut R,
) -> Result<GeneratedProblem> {
    match source {
        ProblemSource::File { path } => Ok(GeneratedProblem {
            problem: QuboProblem::load(path)?,
            mesh: None,
        }),
        ProblemSource::RandomPsd { n } => {
            if *n == 0 {
                return Err(Error::InvalidParameter("n must be >= 1".into()));
            }
            let b = DMatrix::from_fn(*n, *n, |_, _| StandardNormal.sample(rng));
            Ok(GeneratedProblem {
                problem: problem_from_transform(&TransformMatrix(b)),
                mesh: None,
            })
        }
        ProblemSource::RandomMeshVoltages { n } => {
            let mesh = random_mesh(*n, settings, dac_bits, rng)?;
            let a = mesh.effective_matrix()?;
            Ok(GeneratedProblem {
                problem: problem_from_transform(&a),
                mesh: Some(Arc::new(mesh)),
            })
        }
    }
}
