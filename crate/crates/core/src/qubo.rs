//! QUBO problems and their mapping onto a real transform matrix.
//!
//! The cost of a binary state is `C(s) = -1/2 sᵀ K s`. A positive
//! semi-definite weight matrix factors as `K = Qᵀ D Q`, so the cost can be
//! read off the squared norm of `A s` with `A = √D · Q`. That is what makes
//! a single optical matrix-vector product enough to evaluate a state.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest dimension the exhaustive oracle will enumerate.
pub const BRUTE_FORCE_MAX_N: usize = 24;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_REL_TOL: f64 = 1e-9;

/// A vector in `{0,1}^N`.
///
/// Serialized as a bit string (`"0110"`), bit 0 first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryState(Vec<u8>);

impl BinaryState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "binary state element {b} is not 0 or 1"
            )));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random_range(0..2u8)).collect())
    }

    /// State with the given enumeration index; bit 0 is the most
    /// significant, so index order equals lexicographic order.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect())
    }

    pub fn index(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn toggle(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn ones_count(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&b| b as f64))
    }
}

impl fmt::Display for BinaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryState({self})")
    }
}

impl std::str::FromStr for BinaryState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidParameter(format!(
                    "invalid character {other:?} in bit string"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self(bits))
    }
}

impl Serialize for BinaryState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BinaryState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A QUBO instance with symmetric weight matrix `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    k: DMatrix<f64>,
}

/// On-disk form: `{"n": 3, "k": [row-major entries]}`.
#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    k: Vec<f64>,
}

impl QuboProblem {
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("problem dimension must be >= 1".into()));
        }
        if k.ncols() != n {
            return Err(Error::dim("weight matrix columns", n, k.ncols()));
        }
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("weight matrix has non-finite entries".into()));
        }
        let tol = SYMMETRY_TOL * k.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (k[(i, j)] - k[(j, i)]).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "weight matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { k })
    }

    pub fn from_row_major(n: usize, k: Vec<f64>) -> Result<Self> {
        if k.len() != n * n {
            return Err(Error::dim("weight matrix entries", n * n, k.len()));
        }
        Self::new(DMatrix::from_row_slice(n, n, &k))
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { k: &self.k * alpha }
    }

    pub fn to_json(&self) -> String {
        let file = ProblemFile {
            n: self.n(),
            k: self.k.transpose().iter().copied().collect(),
        };
        serde_json::to_string_pretty(&file).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::from_row_major(file.n, file.k).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|reason| Error::Malformed {
            path: path.to_path_buf(),
            reason,
        })
    }
}

/// The real OVMM matrix `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformMatrix(pub DMatrix<f64>);

impl TransformMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("transform matrix has non-finite entries".into()));
        }
        Ok(Self(a))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `A s` for a binary input.
    pub fn apply(&self, s: &BinaryState) -> Result<DVector<f64>> {
        let a = &self.0;
        if s.len() != a.ncols() {
            return Err(Error::dim("transform input", a.ncols(), s.len()));
        }
        let mut out = DVector::zeros(a.nrows());
        for (j, &b) in s.bits().iter().enumerate() {
            if b == 1 {
                out += a.column(j);
            }
        }
        Ok(out)
    }
}

/// Eigenvalues in descending order and the matching orthogonal `Q` whose
/// rows are eigenvectors, so that `K = Qᵀ diag(λ) Q`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        self.eigenvectors.transpose() * d * &self.eigenvectors
    }
}

/// Minimizer found by exhaustive enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub s_min: BinaryState,
    pub c_min: f64,
}

/// `C(s) = -1/2 sᵀ K s`.
pub fn cost(p: &QuboProblem, s: &BinaryState) -> Result<f64> {
    let n = p.n();
    if s.len() != n {
        return Err(Error::dim("cost state", n, s.len()));
    }
    let on: Vec<usize> = (0..n).filter(|&i| s.get(i) == 1).collect();
    let k = p.weights();
    let mut quad = 0.0;
    for &i in &on {
        for &j in &on {
            quad += k[(i, j)];
        }
    }
    Ok(-0.5 * quad)
}

/// Cost read from detector signals: `-1/2 Σ r_i²`.
pub fn cost_from_readout(r: &[f64]) -> f64 {
    -0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn spectral(p: &QuboProblem) -> SpectralData {
    let eig = SymmetricEigen::new(p.weights().clone());
    let n = p.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut q = DMatrix::zeros(n, n);
    for (row, &i) in order.iter().enumerate() {
        q.row_mut(row).copy_from(&eig.eigenvectors.column(i).transpose());
    }
    SpectralData {
        eigenvalues,
        eigenvectors: q,
    }
}

/// Eigendecomposition `K = Qᵀ D Q` and the transform `A = √D · Q`.
///
/// Tiny negative eigenvalues (at most `1e-9 · max(1, λ_max)` in magnitude)
/// are clamped to zero; anything more negative is rejected.
pub fn decompose(p: &QuboProblem) -> Result<(SpectralData, TransformMatrix)> {
    let mut spec = spectral(p);
    let lambda_max = spec.eigenvalues[0];
    let tol = PSD_REL_TOL * lambda_max.max(1.0);
    for l in spec.eigenvalues.iter_mut() {
        if *l < -tol {
            return Err(Error::NotPsd { eigenvalue: *l });
        }
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let mut a = spec.eigenvectors.clone();
    for (i, l) in spec.eigenvalues.iter().enumerate() {
        a.row_mut(i).scale_mut(l.sqrt());
    }
    Ok((spec, TransformMatrix(a)))
}

/// `K = Aᵀ A`, always positive semi-definite.
pub fn problem_from_transform(a: &TransformMatrix) -> QuboProblem {
    let k = a.0.transpose() * &a.0;
    // Symmetrize the rounding.
    let k = (&k + k.transpose()) * 0.5;
    QuboProblem::new(k).expect("AᵀA is square and symmetric")
}

/// Diagonal shift that makes an indefinite problem optically mappable.
///
/// `K' = K + c I` with `c = -λ_min`. Since `s_i² = s_i` for binary
/// variables, `C_K(s) = C_K'(s) + (c/2) Σ s_i` exactly.
#[derive(Clone, Debug)]
pub struct ShiftedProblem {
    pub shifted: QuboProblem,
    pub shift: f64,
}

impl ShiftedProblem {
    pub fn correct(&self, shifted_cost: f64, s: &BinaryState) -> f64 {
        shifted_cost + 0.5 * self.shift * s.ones_count() as f64
    }
}

/// Shift mode for non-PSD inputs. PSD inputs come back with `shift = 0`.
pub fn decompose_shifted(p: &QuboProblem) -> Result<(ShiftedProblem, SpectralData, TransformMatrix)> {
    let lambda_min = *spectral(p).eigenvalues.last().expect("n >= 1");
    let shift = if lambda_min < 0.0 { -lambda_min } else { 0.0 };
    let k = p.weights() + DMatrix::identity(p.n(), p.n()) * shift;
    let shifted = QuboProblem::new(k)?;
    let (spec, a) = decompose(&shifted)?;
    Ok((ShiftedProblem { shifted, shift }, spec, a))
}

/// Gray-code walk over all `2^n` states, calling `visit(index, cost)` for
/// each. Costs are accumulated incrementally.
fn gray_walk(p: &QuboProblem, mut visit: impl FnMut(u64, f64)) {
    let n = p.n();
    let k = p.weights();
    let mut s = vec![false; n];
    let mut field = vec![0.0; n]; // K s
    let mut quad = 0.0; // sᵀ K s
    let mut index: u64 = 0;
    visit(0, 0.0);
    for step in 1u64..(1u64 << n) {
        let bit = step.trailing_zeros() as usize;
        // Bit `bit` of the Gray counter is state element n-1-bit.
        let j = n - 1 - bit;
        if s[j] {
            quad += k[(j, j)] - 2.0 * field[j];
            for (f, kij) in field.iter_mut().zip(k.column(j).iter()) {
                *f -= kij;
            }
        } else {
            quad += k[(j, j)] + 2.0 * field[j];
            for (f, kij) in field.iter_mut().zip(k.column(j).iter()) {
                *f += kij;
            }
        }
        s[j] = !s[j];
        index ^= 1 << bit;
        visit(index, -0.5 * quad);
    }
}

/// Exhaustive minimizer. Ties go to the lexicographically smallest state.
pub fn brute_force_min(p: &QuboProblem) -> Result<GroundTruth> {
    let n = p.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::BudgetExceeded {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    // Incremental costs drift by rounding, so keep every state within a
    // small band of the running minimum and settle the winner exactly.
    let band = 1e-9 * p.weights().amax().max(1.0) * n as f64;
    let exact = |index: u64| cost(p, &BinaryState::from_index(index, n)).expect("dims match");
    let mut best = f64::INFINITY;
    let mut winner = (f64::INFINITY, u64::MAX);
    gray_walk(p, |index, c| {
        if c < best - band {
            best = c;
            winner = (exact(index), index);
        } else if c <= best + band {
            best = best.min(c);
            let e = exact(index);
            if e < winner.0 || (e == winner.0 && index < winner.1) {
                winner = (e, index);
            }
        }
    });
    let (c_min, index) = winner;
    Ok(GroundTruth {
        s_min: BinaryState::from_index(index, n),
        c_min,
    })
}

/// Cost of every state, indexed by [`BinaryState::index`].
pub fn cost_landscape(p: &QuboProblem) -> Result<Vec<f64>> {
    let n = p.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::BudgetExceeded {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let mut costs = vec![0.0; 1usize << n];
    gray_walk(p, |index, c| costs[index as usize] = c);
    Ok(costs)
}
