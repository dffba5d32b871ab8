//! FFT (butterfly) mesh layout.
//!
//! Layer `l` couples port `i` with port `i + 2^l` for every `i` whose bit `l`
//! is clear, which is the crossing-waveguide butterfly. Every MZI carries two
//! internal shifters (one per arm). External shifters sit on single ports
//! between layers; the default layout places one on the upper port of every
//! MZI of each non-final layer, which gives 24 for a 16-port mesh.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The checked-in 16-port, 4-layer description.
pub const DEFAULT_FFT16_JSON: &str = include_str!("../../data/fft_mesh_16.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MziSite {
    /// Upper and lower port.
    pub ports: [usize; 2],
    /// Shifter ids on the upper and lower arm. The upper one is the
    /// designated shifter driven in random-voltage experiments.
    pub shifters: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalShifter {
    pub port: usize,
    pub shifter: usize,
}

/// One column of MZIs followed by the external shifters placed after it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshLayer {
    pub mzis: Vec<MziSite>,
    #[serde(default)]
    pub external: Vec<ExternalShifter>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshTopology {
    pub n_ports: usize,
    pub n_shifters: usize,
    pub layers: Vec<MeshLayer>,
}

impl MeshTopology {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_mzis(&self) -> usize {
        self.layers.iter().map(|l| l.mzis.len()).sum()
    }

    /// Two MMI couplers per MZI.
    pub fn n_couplers(&self) -> usize {
        2 * self.n_mzis()
    }

    pub fn n_internal_shifters(&self) -> usize {
        2 * self.n_mzis()
    }

    pub fn n_external_shifters(&self) -> usize {
        self.layers.iter().map(|l| l.external.len()).sum()
    }

    /// Upper-arm shifter of every MZI, in layer order.
    pub fn designated_shifters(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| l.mzis.iter().map(|m| m.shifters[0]))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_ports;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidTopology(format!(
                "n_ports = {n} is not a power of two >= 2"
            )));
        }
        let expected_layers = n.trailing_zeros() as usize;
        if self.layers.len() != expected_layers {
            return Err(Error::InvalidTopology(format!(
                "{} layers, expected log2({n}) = {expected_layers}",
                self.layers.len()
            )));
        }
        let mut seen_shifters = vec![false; self.n_shifters];
        let mut claim = |id: usize| -> Result<()> {
            match seen_shifters.get_mut(id) {
                Some(slot) if !*slot => {
                    *slot = true;
                    Ok(())
                }
                Some(_) => Err(Error::InvalidTopology(format!("shifter {id} used twice"))),
                None => Err(Error::InvalidTopology(format!(
                    "shifter {id} out of range 0..{}",
                    self.n_shifters
                ))),
            }
        };
        for (li, layer) in self.layers.iter().enumerate() {
            if layer.mzis.len() != n / 2 {
                return Err(Error::InvalidTopology(format!(
                    "layer {li} has {} MZIs, expected {}",
                    layer.mzis.len(),
                    n / 2
                )));
            }
            let mut covered = vec![false; n];
            for m in &layer.mzis {
                for &p in &m.ports {
                    if p >= n || covered[p] {
                        return Err(Error::InvalidTopology(format!(
                            "layer {li} does not pair every port exactly once (port {p})"
                        )));
                    }
                    covered[p] = true;
                }
                claim(m.shifters[0])?;
                claim(m.shifters[1])?;
            }
            let mut ext_ports = HashSet::new();
            for e in &layer.external {
                if e.port >= n || !ext_ports.insert(e.port) {
                    return Err(Error::InvalidTopology(format!(
                        "layer {li} has an invalid or repeated external port {}",
                        e.port
                    )));
                }
                claim(e.shifter)?;
            }
        }
        if let Some(missing) = seen_shifters.iter().position(|&s| !s) {
            return Err(Error::InvalidTopology(format!("shifter {missing} never placed")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let topo: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidTopology(format!("parse error: {e}")))?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The 16×4 mesh shipped with the crate.
    pub fn default_fft16() -> Self {
        Self::from_json(DEFAULT_FFT16_JSON).expect("bundled topology is valid")
    }
}

/// Butterfly mesh with `log2(n_ports)` layers and strides 1, 2, 4, ...
pub fn build_topology(n_ports: usize) -> Result<MeshTopology> {
    if !(2..=64).contains(&n_ports) || !n_ports.is_power_of_two() {
        return Err(Error::InvalidTopology(format!(
            "n_ports = {n_ports} must be a power of two in 2..=64"
        )));
    }
    let n_layers = n_ports.trailing_zeros() as usize;
    let mut next_id = 0;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let stride = 1 << l;
        let mut mzis = Vec::with_capacity(n_ports / 2);
        for top in (0..n_ports).filter(|i| i & stride == 0) {
            mzis.push(MziSite {
                ports: [top, top + stride],
                shifters: [next_id, next_id + 1],
            });
            next_id += 2;
        }
        let mut external = Vec::new();
        if l + 1 < n_layers {
            for m in &mzis {
                external.push(ExternalShifter {
                    port: m.ports[0],
                    shifter: next_id,
                });
                next_id += 1;
            }
        }
        layers.push(MeshLayer { mzis, external });
    }
    let topo = MeshTopology {
        n_ports,
        n_shifters: next_id,
        layers,
    };
    topo.validate()?;
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every port sequence an input can follow through the mesh.
    fn enumerate_paths(topo: &MeshTopology, input: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![vec![input]];
        for layer in &topo.layers {
            let mut next = Vec::new();
            for path in &paths {
                let here = *path.last().unwrap();
                let m = layer.mzis.iter().find(|m| m.ports.contains(&here)).unwrap();
                for &out in &m.ports {
                    let mut p = path.clone();
                    p.push(out);
                    next.push(p);
                }
            }
            paths = next;
        }
        paths
    }

    #[test]
    fn sixteen_port_counts() {
        let t = build_topology(16).unwrap();
        assert_eq!(t.n_layers(), 4);
        assert_eq!(t.n_mzis(), 32);
        assert_eq!(t.n_couplers(), 64);
        assert_eq!(t.n_shifters, 88);
        assert_eq!(t.n_internal_shifters(), 64);
        assert_eq!(t.n_external_shifters(), 24);
        assert_eq!(t.designated_shifters().len(), 32);
    }

    #[test]
    fn two_port_counts() {
        let t = build_topology(2).unwrap();
        assert_eq!(t.n_layers(), 1);
        assert_eq!(t.n_mzis(), 1);
        assert_eq!(t.n_couplers(), 2);
        assert_eq!(t.n_shifters, 2);
    }

    #[test]
    fn eight_port_paths_reach_everything_with_equal_length() {
        let t = build_topology(8).unwrap();
        assert_eq!(t.n_layers(), 3);
        assert_eq!(t.n_mzis(), 12);
        for input in 0..8 {
            let paths = enumerate_paths(&t, input);
            let reached: HashSet<usize> = paths.iter().map(|p| *p.last().unwrap()).collect();
            assert_eq!(reached.len(), 8);
            // One MZI (two couplers) per layer on every path.
            assert!(paths.iter().all(|p| p.len() - 1 == 3));
            // The butterfly gives a unique path per input/output pair.
            assert_eq!(paths.len(), 8);
        }
    }

    #[test]
    fn equal_length_up_to_sixteen() {
        for n in [2, 4, 8, 16] {
            let t = build_topology(n).unwrap();
            for input in 0..n {
                let paths = enumerate_paths(&t, input);
                assert!(paths.iter().all(|p| p.len() - 1 == t.n_layers()));
                let reached: HashSet<usize> = paths.iter().map(|p| *p.last().unwrap()).collect();
                assert_eq!(reached.len(), n);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        for n in [0, 1, 3, 12, 128] {
            assert!(matches!(build_topology(n), Err(Error::InvalidTopology(_))));
        }
    }

    #[test]
    fn bundled_file_matches_generator() {
        assert_eq!(MeshTopology::default_fft16(), build_topology(16).unwrap());
    }

    #[test]
    fn validation_catches_broken_layouts() {
        let mut t = build_topology(4).unwrap();
        t.layers[0].mzis[1].ports = [0, 3];
        assert!(t.validate().is_err());

        let mut t = build_topology(4).unwrap();
        t.layers[1].mzis[0].shifters[0] = 0;
        assert!(t.validate().is_err());

        let mut t = build_topology(4).unwrap();
        t.n_shifters += 1;
        assert!(t.validate().is_err());
    }
}
