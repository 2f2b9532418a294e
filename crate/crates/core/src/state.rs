//! Validated quantum states in a fixed reference basis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix, C64, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const PROB_SUM_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-12;

/// A `d x d` Hermitian, positive semidefinite, unit-trace matrix.
///
/// Construction through [`DensityMatrix::new`] validates every invariant.
/// [`DensityMatrix::repair`] is the explicit opt-in for projecting a nearly
/// valid matrix back onto the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare(m.rows(), m.cols()));
        }
        if m.rows() == 0 {
            return Err(Error::Malformed("zero-dimensional state".into()));
        }
        let dev = m.hermitian_deviation();
        if !(dev <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(Error::InvalidTrace(tr.re));
        }
        let m = m.hermitize();
        let min = eigh(&m).min_value();
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { m })
    }

    /// Single repair pass: symmetrize, clip negative eigenvalues, renormalize
    /// the trace. Fails only if nothing positive is left.
    pub fn repair(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare(m.rows(), m.cols()));
        }
        let e = eigh(&m.hermitize());
        let clipped: Vec<f64> = e.values.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NotPsd(e.min_value()));
        }
        let vals: Vec<f64> = clipped.iter().map(|x| x / total).collect();
        Ok(Self {
            m: e.reconstruct_with(&vals).hermitize(),
        })
    }

    /// For matrices that are states up to rounding by construction (mixtures,
    /// channel outputs). Hermitizes and renormalizes the trace without a
    /// spectral check.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        let m = m.hermitize();
        let tr = m.trace().re;
        let m = if (tr - 1.0).abs() > 4.0 * f64::EPSILON * m.rows() as f64 {
            m.scale(1.0 / tr)
        } else {
            m
        };
        Self { m }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self::from_trusted(CMatrix::outer(psi.amplitudes()))
    }

    pub fn from_incoherent(delta: &IncoherentState) -> Self {
        Self {
            m: CMatrix::from_real_diag(delta.probs()),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::from_incoherent(&IncoherentState::uniform(d))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        Self::from_incoherent(&IncoherentState::basis(d, i))
    }

    /// Qubit state with Bloch vector `v` (`|v| ≤ 1`).
    pub fn from_bloch(v: [f64; 3]) -> Result<Self> {
        let m = CMatrix::from_vec(
            2,
            2,
            vec![
                C64::new((1.0 + v[2]) / 2.0, 0.0),
                C64::new(v[0] / 2.0, -v[1] / 2.0),
                C64::new(v[0] / 2.0, v[1] / 2.0),
                C64::new((1.0 - v[2]) / 2.0, 0.0),
            ],
        )?;
        Self::new(m)
    }

    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let off = self.m[(1, 0)];
        Some([
            2.0 * off.re,
            2.0 * off.im,
            self.m[(0, 0)].re - self.m[(1, 1)].re,
        ])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.m).values
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.m.data().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.m[(i, j)].norm() <= tol))
    }

    /// Convex combination `Σ w_i ρ_i` of equally sized states.
    pub fn mixture(weights: &[f64], states: &[DensityMatrix]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::Malformed("weights and states differ in length".into()));
        }
        check_probabilities(weights)?;
        let d = states[0].dim();
        let mut acc = CMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != d {
                return Err(Error::DimensionMismatch(d, s.dim()));
            }
            acc = acc.lin_comb(1.0, &s.m, *w);
        }
        Ok(Self::from_trusted(acc))
    }

    pub fn to_file(&self) -> StateFile {
        StateFile::from_matrix(&self.m)
    }

    pub fn from_file(f: &StateFile) -> Result<Self> {
        Self::new(f.to_matrix()?)
    }
}

/// Probability vector `δ_i`, embedded as the diagonal state `Σ δ_i |i⟩⟨i|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IncoherentState {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for IncoherentState {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IncoherentState> for Vec<f64> {
    fn from(s: IncoherentState) -> Self {
        s.probs
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidProbabilities(format!("negative or non-finite entry {x}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!("sum is {s}")));
    }
    Ok(())
}

impl IncoherentState {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probabilities(&probs)?;
        Ok(Self { probs })
    }

    /// Clips tiny negatives and renormalizes; used on solver output.
    pub(crate) fn from_weights(mut w: Vec<f64>) -> Self {
        for x in &mut w {
            if !(*x > 0.0) {
                *x = 0.0;
            }
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 4.0 * f64::EPSILON * w.len() as f64 {
            for x in &mut w {
                *x /= s;
            }
        }
        Self { probs: w }
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            probs: vec![1.0 / d as f64; d],
        }
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut probs = vec![0.0; d];
        probs[i] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_incoherent(self)
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Malformed("empty state vector".into()));
        }
        let n = norm(&amps);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { amps })
    }

    /// Scales a nonzero vector to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let n = norm(&amps);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / n).collect(),
        })
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut amps = vec![ZERO; d];
        amps[i] = C64::new(1.0, 0.0);
        Self { amps }
    }

    /// `|Ψ_M⟩ = Σ_{i<M} |i⟩/√M`, embedded in dimension `d ≥ M`.
    pub fn maximally_coherent(m: usize, d: usize) -> Result<Self> {
        if m == 0 || m > d {
            return Err(Error::InvalidRank { rank: m, dim: d });
        }
        let a = 1.0 / (m as f64).sqrt();
        Ok(Self {
            amps: (0..d)
                .map(|i| if i < m { C64::new(a, 0.0) } else { ZERO })
                .collect(),
        })
    }

    /// `cos θ |0⟩ + sin θ |1⟩`.
    pub fn qubit_rotated(theta: f64) -> Self {
        Self {
            amps: vec![C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0)],
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// On-disk state format: `{"dim": d, "matrix": [[[re, im], ...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dim: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl StateFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            dim: m.rows(),
            matrix: matrix_to_rows(m),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let m = rows_to_matrix(&self.matrix)?;
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(Error::Malformed(format!(
                "declared dim {} but matrix is {}x{}",
                self.dim,
                m.rows(),
                m.cols()
            )));
        }
        Ok(m)
    }
}

pub(crate) fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Err(Error::Malformed("empty matrix".into()));
    }
    let mut data = Vec::with_capacity(r * c);
    for row in rows {
        if row.len() != c {
            return Err(Error::Malformed("ragged matrix rows".into()));
        }
        for z in row {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(Error::Malformed("non-finite matrix entry".into()));
            }
            data.push(C64::new(z[0], z[1]));
        }
    }
    CMatrix::from_vec(r, c, data)
}

/// Deterministic source of random states and channels.
///
/// States are drawn from the induced (Ginibre) measure: `G G† / Tr(G G†)`
/// with `G` a `d x rank` matrix of standard complex normals. `rank = d` is
/// the Hilbert–Schmidt measure.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn complex_normal(&mut self) -> C64 {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        C64::new(re, im)
    }

    pub fn density(&mut self, d: usize, rank: usize) -> Result<DensityMatrix> {
        if rank == 0 || rank > d {
            return Err(Error::InvalidRank { rank, dim: d });
        }
        let g = CMatrix::from_fn(d, rank, |_, _| self.complex_normal());
        let w = &g * &g.adjoint();
        let tr = w.trace().re;
        Ok(DensityMatrix::from_trusted(w.scale(1.0 / tr)))
    }

    pub fn pure(&mut self, d: usize) -> PureState {
        loop {
            let v: Vec<C64> = (0..d).map(|_| self.complex_normal()).collect();
            if let Ok(p) = PureState::normalized(v) {
                return p;
            }
        }
    }

    /// Uniform point of the probability simplex.
    pub fn incoherent(&mut self, d: usize) -> IncoherentState {
        let w: Vec<f64> = (0..d).map(|_| Exp1.sample(&mut self.rng)).collect();
        let s: f64 = w.iter().sum();
        IncoherentState::from_weights(w.into_iter().map(|x| x / s).collect())
    }

    /// Uniform point of the probability simplex with `n` entries.
    pub fn weights(&mut self, n: usize) -> Vec<f64> {
        self.incoherent(n).probs
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn phase(&mut self) -> C64 {
        C64::from_polar(1.0, self.rng.random::<f64>() * std::f64::consts::TAU)
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.rng.random_range(0..=i);
            p.swap(i, j);
        }
        p
    }
}

pub fn random_density(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    crate::coverage::touch("random_density");
    Sampler::new(seed).density(d, rank)
}

pub fn random_pure(d: usize, seed: u64) -> PureState {
    crate::coverage::touch("random_pure");
    Sampler::new(seed).pure(d)
}

pub fn random_incoherent(d: usize, seed: u64) -> IncoherentState {
    crate::coverage::touch("random_incoherent");
    Sampler::new(seed).incoherent(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = CMatrix::from_real_diag(&[0.5, 0.5]);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian(_))));

        let m = CMatrix::from_real_diag(&[0.5, 0.6]);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidTrace(_))));

        let m = CMatrix::from_real_diag(&[1.2, -0.2]);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotPsd(_))));

        assert!(matches!(
            DensityMatrix::new(CMatrix::zeros(2, 3)),
            Err(Error::NotSquare(2, 3))
        ));
    }

    #[test]
    fn repair_is_explicit_and_projects() {
        let m = CMatrix::from_real_diag(&[1.2, -0.2]);
        let r = DensityMatrix::repair(m).unwrap();
        assert_eq!(r.eigenvalues(), vec![1.0, 0.0]);
    }

    #[test]
    fn incoherent_state_validation() {
        assert!(IncoherentState::new(vec![0.5, 0.5]).is_ok());
        assert!(IncoherentState::new(vec![0.5, 0.6]).is_err());
        assert!(IncoherentState::new(vec![1.5, -0.5]).is_err());
        let s: IncoherentState = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(s.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<IncoherentState>("[0.25,0.7]").is_err());
    }

    #[test]
    fn pure_state_validation() {
        assert!(PureState::new(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        let p = PureState::normalized(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!((p.amplitudes()[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(PureState::maximally_coherent(3, 2).is_err());
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = random_density(3, 3, 42).unwrap();
        let b = random_density(3, 3, 42).unwrap();
        assert_eq!(a, b);
        assert!(random_density(3, 0, 1).is_err());
        assert!(random_density(3, 4, 1).is_err());
    }

    #[test]
    fn rank_one_sample_is_pure() {
        let s = random_density(4, 1, 9).unwrap();
        assert!((s.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let v = [0.3, -0.2, 0.5];
        let r = DensityMatrix::from_bloch(v).unwrap();
        let w = r.bloch_vector().unwrap();
        for k in 0..3 {
            assert!((v[k] - w[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn state_file_rejects_shape_mismatch() {
        let f = StateFile {
            dim: 3,
            matrix: vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.0, 0.0]]],
        };
        assert!(DensityMatrix::from_file(&f).is_err());
    }
}
