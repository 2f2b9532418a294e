//! Kraus-form channels and incoherent-operation sampling.

use serde::{Deserialize, Serialize};

use crate::coverage::touch;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::state::{matrix_to_rows, rows_to_matrix, DensityMatrix, Sampler};

pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Entries with modulus at or below this count as structural zeros.
pub const STRUCTURAL_ZERO: f64 = 1e-12;
/// Selective branches with probability below this are dropped.
pub const BRANCH_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    incoherent: bool,
}

impl KrausChannel {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::Malformed("channel has no Kraus operators".into()))?;
        let (d_out, d_in) = (first.rows(), first.cols());
        let mut sum = CMatrix::zeros(d_in, d_in);
        for k in &operators {
            if k.rows() != d_out || k.cols() != d_in {
                return Err(Error::Malformed(format!(
                    "Kraus operator is {}x{}, expected {d_out}x{d_in}",
                    k.rows(),
                    k.cols()
                )));
            }
            sum = &sum + &(&k.adjoint() * k);
        }
        let dev = sum.max_abs_diff(&CMatrix::identity(d_in));
        if !(dev <= COMPLETENESS_TOL) {
            return Err(Error::IncompleteKraus(dev));
        }
        let incoherent = structurally_incoherent(&operators);
        Ok(Self {
            operators,
            incoherent,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(vec![CMatrix::identity(d)]).expect("identity is complete")
    }

    /// Kraus set `{|i⟩⟨i|}`.
    pub fn full_dephasing(d: usize) -> Self {
        Self::new((0..d).map(|i| CMatrix::unit(d, d, i, i)).collect()).expect("projectors are complete")
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// Structural certificate computed at construction.
    pub fn incoherent(&self) -> bool {
        self.incoherent
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.operators[0].rows(), self.operators[0].cols())
    }

    pub fn to_file(&self) -> ChannelFile {
        let (d_out, d_in) = self.dims();
        ChannelFile {
            kraus: self.operators.iter().map(matrix_to_rows).collect(),
            dims: [d_out, d_in],
        }
    }

    pub fn from_file(f: &ChannelFile) -> Result<Self> {
        let ops = f
            .kraus
            .iter()
            .map(|k| rows_to_matrix(k))
            .collect::<Result<Vec<_>>>()?;
        let ch = Self::new(ops)?;
        let (d_out, d_in) = ch.dims();
        if [d_out, d_in] != f.dims {
            return Err(Error::Malformed(format!(
                "declared dims {:?} but operators are {d_out}x{d_in}",
                f.dims
            )));
        }
        Ok(ch)
    }

    /// `Σ_k K_k X K_k†` on a raw matrix.
    pub(crate) fn apply_raw(&self, x: &CMatrix) -> CMatrix {
        let (d_out, _) = self.dims();
        self.operators
            .iter()
            .fold(CMatrix::zeros(d_out, d_out), |acc, k| &acc + &k.sandwich(x))
    }

    /// Heisenberg-picture map `Σ_k K_k† Y K_k`.
    pub(crate) fn apply_adjoint_raw(&self, y: &CMatrix) -> CMatrix {
        let (_, d_in) = self.dims();
        self.operators
            .iter()
            .fold(CMatrix::zeros(d_in, d_in), |acc, k| &acc + &k.adjoint().sandwich(y))
    }
}

/// On-disk channel format: `{"kraus": [matrix, ...], "dims": [d_out, d_in]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
    pub dims: [usize; 2],
}

fn structurally_incoherent(ops: &[CMatrix]) -> bool {
    ops.iter().all(|k| {
        (0..k.cols()).all(|j| (0..k.rows()).filter(|&i| k[(i, j)].norm() > STRUCTURAL_ZERO).count() <= 1)
    })
}

/// True iff every column of every Kraus operator has at most one nonzero
/// entry, which is sufficient for mapping incoherent states to incoherent
/// states.
pub fn is_incoherent_channel(ch: &KrausChannel) -> bool {
    touch("is_incoherent_channel");
    structurally_incoherent(&ch.operators)
}

pub fn apply_kraus(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    touch("apply_kraus");
    let (_, d_in) = ch.dims();
    if d_in != rho.dim() {
        return Err(Error::DimensionMismatch(d_in, rho.dim()));
    }
    Ok(DensityMatrix::from_trusted(ch.apply_raw(rho.matrix())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// Index of the Kraus operator producing this outcome.
    pub index: usize,
    pub prob: f64,
    pub state: DensityMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectiveOutcome {
    pub branches: Vec<Branch>,
    /// Kraus indices whose outcome probability fell below the cutoff.
    pub dropped: Vec<usize>,
}

/// Outcomes `(p_k, K_k ρ K_k† / p_k)` of a selective measurement.
pub fn selective_apply(ch: &KrausChannel, rho: &DensityMatrix) -> Result<SelectiveOutcome> {
    touch("selective_apply");
    let (_, d_in) = ch.dims();
    if d_in != rho.dim() {
        return Err(Error::DimensionMismatch(d_in, rho.dim()));
    }
    let mut out = SelectiveOutcome {
        branches: Vec::new(),
        dropped: Vec::new(),
    };
    for (index, k) in ch.operators.iter().enumerate() {
        let m = k.sandwich(rho.matrix());
        let prob = m.trace().re;
        if prob < BRANCH_CUTOFF {
            out.dropped.push(index);
            continue;
        }
        out.branches.push(Branch {
            index,
            prob,
            state: DensityMatrix::from_trusted(m.scale(1.0 / prob)),
        });
    }
    Ok(out)
}

impl Sampler {
    /// Random incoherent channel on dimension `d` with `n_perm` weighted
    /// permutation-times-phase operators plus one reset operator per input
    /// column. Column weights are split uniformly at random, so completeness
    /// holds by construction.
    pub fn incoherent_channel(&mut self, d: usize, n_perm: usize) -> KrausChannel {
        let n = n_perm.max(1);
        let perms: Vec<Vec<usize>> = (0..n).map(|_| self.permutation(d)).collect();
        let targets: Vec<usize> = (0..d).map(|_| self.index(d)).collect();
        let weights: Vec<Vec<f64>> = (0..d).map(|_| self.weights(n + 1)).collect();
        let mut ops = Vec::with_capacity(n + d);
        for (k, perm) in perms.iter().enumerate() {
            let mut m = CMatrix::zeros(d, d);
            for j in 0..d {
                let phase = self.phase();
                m[(perm[j], j)] = phase * weights[j][k].sqrt();
            }
            ops.push(m);
        }
        for j in 0..d {
            let w = weights[j][n];
            if w > 0.0 {
                let mut m = CMatrix::zeros(d, d);
                m[(targets[j], j)] = C64::new(w.sqrt(), 0.0);
                ops.push(m);
            }
        }
        KrausChannel::new(ops).expect("sampled Kraus set is complete")
    }
}

/// Permutation unitary `|π(j)⟩⟨j|` with diagonal phases applied on the output.
pub fn permutation_unitary(perm: &[usize], phases: &[C64]) -> CMatrix {
    let d = perm.len();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[(perm[j], j)] = phases.get(perm[j]).copied().unwrap_or(C64::new(1.0, 0.0));
    }
    m
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_vec(2, 2, vec![C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)])
        .expect("2x2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{dephase, tensor};
    use crate::state::{random_density, IncoherentState, PureState};

    #[test]
    fn identity_channel_single_branch() {
        let r = random_density(3, 3, 1).unwrap();
        let out = selective_apply(&KrausChannel::identity(3), &r).unwrap();
        assert_eq!(out.branches.len(), 1);
        assert!((out.branches[0].prob - 1.0).abs() < 1e-12);
        assert!(out.branches[0].state.matrix().max_abs_diff(r.matrix()) < 1e-14);
    }

    #[test]
    fn full_dephasing_gives_diagonal() {
        let r = random_density(3, 3, 4).unwrap();
        let out = apply_kraus(&KrausChannel::full_dephasing(3), &r).unwrap();
        assert!(out.is_diagonal(0.0));
        assert_eq!(dephase(&out), dephase(&r));
    }

    #[test]
    fn incompleteness_rejected() {
        let k = CMatrix::unit(2, 2, 0, 0);
        assert!(matches!(KrausChannel::new(vec![k]), Err(Error::IncompleteKraus(_))));
    }

    #[test]
    fn structural_criterion() {
        assert!(is_incoherent_channel(&KrausChannel::full_dephasing(4)));
        let perm = permutation_unitary(&[1, 2, 0], &[]);
        assert!(is_incoherent_channel(&KrausChannel::unitary(perm).unwrap()));
        let h = KrausChannel::unitary(hadamard()).unwrap();
        assert!(!is_incoherent_channel(&h));
        let out = apply_kraus(&h, &DensityMatrix::basis(2, 0)).unwrap();
        assert!(out.get(0, 1).norm() > 0.4);
    }

    #[test]
    fn sampled_channels_are_incoherent() {
        let mut s = Sampler::new(3);
        for d in 2..=4 {
            let ch = s.incoherent_channel(d, 3);
            assert!(ch.incoherent());
            let delta = s.incoherent(d).to_density();
            assert!(apply_kraus(&ch, &delta).unwrap().is_diagonal(1e-14));
        }
    }

    #[test]
    fn block_measurement_branches() {
        let eta = 0.05;
        let plus = PureState::maximally_coherent(2, 2).unwrap().density();
        let delta = IncoherentState::uniform(2).to_density();
        let a = tensor(&DensityMatrix::basis(2, 0), &plus);
        let b = tensor(&DensityMatrix::basis(2, 1), &delta);
        let rho = DensityMatrix::mixture(&[eta, 1.0 - eta], &[a.clone(), b.clone()]).unwrap();
        let p0 = CMatrix::unit(2, 2, 0, 0).kron(&CMatrix::identity(2));
        let p1 = CMatrix::unit(2, 2, 1, 1).kron(&CMatrix::identity(2));
        let out = selective_apply(&KrausChannel::new(vec![p0, p1]).unwrap(), &rho).unwrap();
        assert!((out.branches[0].prob - eta).abs() < 1e-15);
        assert!((out.branches[1].prob - (1.0 - eta)).abs() < 1e-15);
        assert!(out.branches[0].state.matrix().max_abs_diff(a.matrix()) < 1e-14);
        assert!(out.branches[1].state.matrix().max_abs_diff(b.matrix()) < 1e-14);
    }

    #[test]
    fn zero_probability_branch_flagged() {
        let out = selective_apply(&KrausChannel::full_dephasing(2), &DensityMatrix::basis(2, 0)).unwrap();
        assert_eq!(out.branches.len(), 1);
        assert_eq!(out.dropped, vec![1]);
    }

    #[test]
    fn channel_file_round_trip() {
        let ch = Sampler::new(8).incoherent_channel(3, 2);
        let text = serde_json::to_string(&ch.to_file()).unwrap();
        let back: ChannelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(KrausChannel::from_file(&back).unwrap(), ch);
    }
}
