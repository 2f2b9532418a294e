//! Distances, entropies and the elementary state maps.

use serde::{Deserialize, Serialize};

use crate::coverage::touch;
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix};
use crate::state::{DensityMatrix, IncoherentState};

/// Eigenvalues below this are outside the support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// Statistical distance used to build ε-balls.
///
/// Relative entropy is asymmetric; ball membership always reads
/// `S(center || candidate) ≤ ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Trace,
    #[serde(alias = "relent")]
    RelativeEntropy,
}

impl DistanceKind {
    pub fn eval(self, rho: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
        match self {
            DistanceKind::Trace => trace_distance(rho, tau),
            DistanceKind::RelativeEntropy => relative_entropy(rho, tau),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DistanceKind::Trace => "trace",
            DistanceKind::RelativeEntropy => "relative-entropy",
        }
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" | "tr" => Ok(DistanceKind::Trace),
            "relent" | "relative-entropy" => Ok(DistanceKind::RelativeEntropy),
            _ => Err(Error::Malformed(format!("unknown distance `{s}`"))),
        }
    }
}

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// `½ Σ |λ_i(ρ − τ)|`.
pub fn trace_distance(rho: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
    touch("trace_distance");
    same_dim(rho, tau)?;
    Ok(trace_distance_raw(rho.matrix(), tau.matrix()))
}

pub(crate) fn trace_distance_raw(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_norm_hermitian(&(a - b)) / 2.0
}

pub(crate) fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigh(m).values.iter().map(|x| x.abs()).sum()
}

/// Distance from a state to a diagonal matrix; avoids building the
/// `IncoherentState`.
pub(crate) fn trace_distance_to_diag(rho: &CMatrix, diag: &[f64]) -> f64 {
    let mut diff = rho.clone();
    for (i, p) in diag.iter().enumerate() {
        diff[(i, i)] -= p;
    }
    trace_norm_hermitian(&diff) / 2.0
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlog2x(x)).sum::<f64>()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    touch("von_neumann_entropy");
    shannon_entropy(&rho.eigenvalues()).max(0.0)
}

/// `S(ρ || τ) = Tr ρ (log₂ ρ − log₂ τ)`; `+∞` when the support of ρ is not
/// contained in that of τ.
pub fn relative_entropy(rho: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
    touch("relative_entropy");
    same_dim(rho, tau)?;
    Ok(relative_entropy_raw(rho.matrix(), tau.matrix()))
}

pub(crate) fn relative_entropy_raw(rho: &CMatrix, tau: &CMatrix) -> f64 {
    let neg_entropy: f64 = eigh(rho).values.iter().map(|&x| xlog2x(x)).sum();
    let et = eigh(tau);
    let d = rho.rows();
    let mut cross = 0.0;
    for k in 0..d {
        let v = et.vector(k);
        let mut w = 0.0;
        for i in 0..d {
            let mut row = crate::linalg::ZERO;
            for j in 0..d {
                row += rho[(i, j)] * v[j];
            }
            w += (v[i].conj() * row).re;
        }
        let lam = et.values[k];
        if lam < SUPPORT_CUTOFF {
            if w > SUPPORT_CUTOFF {
                return f64::INFINITY;
            }
            continue;
        }
        cross += w * lam.log2();
    }
    (neg_entropy - cross).max(0.0)
}

/// Diagonal of ρ in the reference basis.
pub fn dephase(rho: &DensityMatrix) -> IncoherentState {
    touch("dephase");
    let d = rho.dim();
    IncoherentState::from_weights((0..d).map(|i| rho.get(i, i).re).collect())
}

pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    touch("tensor");
    DensityMatrix::from_trusted(a.matrix().kron(b.matrix()))
}

/// `(1 − p) ρ + p δ`.
pub fn mixing_channel(rho: &DensityMatrix, delta: &IncoherentState, p: f64) -> Result<DensityMatrix> {
    touch("mixing_channel");
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter { name: "p", value: p });
    }
    if delta.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), delta.dim()));
    }
    if p == 0.0 {
        return Ok(rho.clone());
    }
    if p == 1.0 {
        return Ok(delta.to_density());
    }
    let m = rho
        .matrix()
        .lin_comb(1.0 - p, &CMatrix::from_real_diag(delta.probs()), p);
    Ok(DensityMatrix::from_trusted(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{random_density, PureState};

    #[test]
    fn trace_distance_examples() {
        let z0 = DensityMatrix::basis(2, 0);
        let z1 = DensityMatrix::basis(2, 1);
        assert!(trace_distance(&z0, &z0).unwrap().abs() < 1e-15);
        assert!((trace_distance(&z0, &z1).unwrap() - 1.0).abs() < 1e-14);
        let theta = std::f64::consts::FRAC_PI_6;
        let b = PureState::qubit_rotated(theta).density();
        assert!((trace_distance(&z0, &b).unwrap() - 0.5).abs() < 1e-12);
        assert!(trace_distance(&z0, &DensityMatrix::basis(3, 0)).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let z0 = DensityMatrix::basis(2, 0);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((relative_entropy(&z0, &mixed).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(relative_entropy(&mixed, &z0).unwrap(), f64::INFINITY);
        let r = random_density(3, 3, 5).unwrap();
        assert!(relative_entropy(&r, &r).unwrap() < 1e-10);
    }

    #[test]
    fn entropy_examples() {
        let p = DensityMatrix::from_incoherent(&IncoherentState::new(vec![0.7, 0.3]).unwrap());
        let expected = -(0.7f64 * 0.7f64.log2() + 0.3 * 0.3f64.log2());
        assert!((von_neumann_entropy(&p) - expected).abs() < 1e-12);
        assert!((expected - 0.881_290_899_230_281_6).abs() < 1e-12);
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(4)) - 2.0).abs() < 1e-12);
        assert!(von_neumann_entropy(&PureState::basis(3, 1).density()) < 1e-12);
    }

    #[test]
    fn dephase_is_idempotent() {
        let r = random_density(4, 4, 11).unwrap();
        let once = dephase(&r);
        let twice = dephase(&once.to_density());
        assert_eq!(once, twice);
        for i in 0..4 {
            assert_eq!(once.probs()[i], r.get(i, i).re);
        }
    }

    #[test]
    fn mixing_channel_endpoints() {
        let r = random_density(3, 3, 2).unwrap();
        let delta = IncoherentState::uniform(3);
        assert_eq!(mixing_channel(&r, &delta, 0.0).unwrap(), r);
        assert_eq!(mixing_channel(&r, &delta, 1.0).unwrap(), delta.to_density());
        assert!(mixing_channel(&r, &delta, 1.5).is_err());
        assert!(mixing_channel(&r, &delta, -0.1).is_err());
    }

    #[test]
    fn tensor_is_block_embedding() {
        let r = random_density(2, 2, 3).unwrap();
        let t = tensor(&DensityMatrix::basis(2, 0), &r);
        assert_eq!(t.dim(), 4);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(t.get(i, j), r.get(i, j));
                assert_eq!(t.get(i + 2, j + 2).norm(), 0.0);
            }
        }
        assert!((t.matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_kind_parses() {
        assert_eq!("trace".parse::<DistanceKind>().unwrap(), DistanceKind::Trace);
        assert_eq!("relent".parse::<DistanceKind>().unwrap(), DistanceKind::RelativeEntropy);
        assert!("bures".parse::<DistanceKind>().is_err());
    }
}
