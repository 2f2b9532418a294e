//! Coherence quantifiers and their optimal incoherent witnesses.

use serde::{Deserialize, Serialize};

use crate::coverage::touch;
use crate::ellipsoid::{self, Problem, Query};
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix};
use crate::metrics::{dephase, shannon_entropy, trace_distance_to_diag, von_neumann_entropy, DistanceKind};
use crate::state::{DensityMatrix, IncoherentState, PureState};

/// Purity threshold for the pure-state-only geometric measure.
pub const PURITY_TOL: f64 = 1e-10;
/// Target certified gap of the trace-distance-coherence solver.
pub const CD_GAP_TOL: f64 = 1e-10;
/// Tolerance declared for closed-form measures.
pub const CLOSED_FORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "relent", alias = "relative-entropy")]
    RelativeEntropy,
    #[serde(rename = "trace-distance", alias = "cd")]
    TraceDistanceCoherence,
    #[serde(rename = "geometric")]
    GeometricPure,
}

impl MeasureKind {
    pub fn tag(self) -> &'static str {
        match self {
            MeasureKind::L1 => "l1",
            MeasureKind::RelativeEntropy => "relent",
            MeasureKind::TraceDistanceCoherence => "trace-distance",
            MeasureKind::GeometricPure => "geometric",
        }
    }

    /// Largest value over all `d`-dimensional states.
    pub fn max_value(self, d: usize) -> f64 {
        let df = d as f64;
        match self {
            MeasureKind::L1 => df - 1.0,
            MeasureKind::RelativeEntropy => df.log2(),
            MeasureKind::TraceDistanceCoherence | MeasureKind::GeometricPure => 1.0 - 1.0 / df,
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(MeasureKind::L1),
            "relent" | "relative-entropy" => Ok(MeasureKind::RelativeEntropy),
            "trace-distance" | "cd" => Ok(MeasureKind::TraceDistanceCoherence),
            "geometric" => Ok(MeasureKind::GeometricPure),
            _ => Err(Error::Malformed(format!("unknown measure `{s}`"))),
        }
    }
}

/// Minimum distance to the incoherent set with the attaining state.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMeasureResult {
    pub value: f64,
    pub witness: IncoherentState,
    /// Certified bound on `value − true minimum`.
    pub gap: f64,
}

/// `Σ_{i≠j} |ρ_ij|`.
pub fn c_l1(rho: &DensityMatrix) -> f64 {
    touch("c_l1");
    l1_raw(rho.matrix())
}

pub(crate) fn l1_raw(m: &CMatrix) -> f64 {
    let d = m.rows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                acc += m[(i, j)].norm();
            }
        }
    }
    acc
}

/// `S(Δρ) − S(ρ)`.
pub fn c_rel_ent(rho: &DensityMatrix) -> f64 {
    touch("c_rel_ent");
    let diag: Vec<f64> = (0..rho.dim()).map(|i| rho.get(i, i).re.max(0.0)).collect();
    (shannon_entropy(&diag) - von_neumann_entropy(rho)).max(0.0)
}

pub(crate) fn rel_ent_raw(m: &CMatrix) -> f64 {
    let diag: Vec<f64> = (0..m.rows()).map(|i| m[(i, i)].re.max(0.0)).collect();
    let vals: Vec<f64> = eigh(m).values.iter().map(|x| x.max(0.0)).collect();
    (shannon_entropy(&diag) - shannon_entropy(&vals)).max(0.0)
}

/// `min_δ D_tr(ρ, δ)`.
///
/// Qubits use the exact value `|ρ₀₁|` attained at the dephased state. In
/// higher dimension a deep-cut ellipsoid method runs over the simplex and
/// certifies its gap.
pub fn c_trace_distance(rho: &DensityMatrix) -> Result<DistanceMeasureResult> {
    touch("c_trace_distance");
    let d = rho.dim();
    let deph = dephase(rho);
    if d == 1 {
        return Ok(DistanceMeasureResult {
            value: 0.0,
            witness: deph,
            gap: 0.0,
        });
    }
    if d == 2 {
        return Ok(DistanceMeasureResult {
            value: rho.get(0, 1).norm(),
            witness: deph,
            gap: 0.0,
        });
    }
    let at_deph = trace_distance_to_diag(rho.matrix(), deph.probs());
    if at_deph == 0.0 {
        return Ok(DistanceMeasureResult {
            value: 0.0,
            witness: deph,
            gap: 0.0,
        });
    }
    let problem = SimplexDistance { rho: rho.matrix() };
    let center = vec![1.0 / d as f64; d - 1];
    let settings = ellipsoid::Settings::for_dim(d - 1, CD_GAP_TOL);
    let out = ellipsoid::minimize(&problem, center, 1.0, &settings);
    let (value, witness) = match &out.x_best {
        Some(x) if out.f_best < at_deph => (out.f_best, IncoherentState::from_weights(full_simplex(x))),
        _ => (at_deph, deph),
    };
    let gap = (value - out.lower_bound).max(0.0);
    if gap > 1e-6 {
        return Err(Error::NoConvergence { best: value, residual: gap });
    }
    Ok(DistanceMeasureResult { value, witness, gap })
}

fn full_simplex(x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    p.push(1.0 - x.iter().sum::<f64>());
    p
}

/// `D_tr(ρ, diag(δ))` over the first `d − 1` simplex coordinates.
struct SimplexDistance<'a> {
    rho: &'a CMatrix,
}

impl Problem for SimplexDistance<'_> {
    fn query(&self, x: &[f64]) -> Query {
        let n = x.len();
        let mut worst = (0usize, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if -xi > worst.1 {
                worst = (i, -xi);
            }
        }
        let excess = x.iter().sum::<f64>() - 1.0;
        if excess > worst.1 {
            return Query::Infeasible {
                g: vec![1.0; n],
                violation: excess,
            };
        }
        if worst.1 > 0.0 {
            let mut g = vec![0.0; n];
            g[worst.0] = -1.0;
            return Query::Infeasible { g, violation: worst.1 };
        }
        let delta = full_simplex(x);
        let mut diff = self.rho.clone();
        for (i, p) in delta.iter().enumerate() {
            diff[(i, i)] -= p;
        }
        let e = eigh(&diff);
        let f = e.values.iter().map(|v| v.abs()).sum::<f64>() / 2.0;
        let s = e.map(sign);
        let g = (0..n).map(|i| 0.5 * (s[(n, n)].re - s[(i, i)].re)).collect();
        Query::Feasible { f, g }
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `1 − max_i |⟨i|ψ⟩|²`.
pub fn c_geometric_pure(psi: &PureState) -> f64 {
    touch("c_geometric_pure");
    1.0 - psi.amplitudes().iter().map(|a| a.norm_sqr()).fold(0.0, f64::max)
}

fn geometric_of_density(rho: &DensityMatrix) -> Result<f64> {
    let purity = rho.purity();
    if purity <= 1.0 - PURITY_TOL {
        return Err(Error::NotPure {
            measure: "geometric",
            purity,
        });
    }
    // for a pure state |ψ_i|² is the diagonal
    Ok(1.0 - (0..rho.dim()).map(|i| rho.get(i, i).re).fold(0.0, f64::max))
}

/// `min_δ D(ρ, δ)` for the selected distance. For relative entropy the
/// minimizer is the dephased state.
pub fn distance_based_measure(rho: &DensityMatrix, kind: DistanceKind) -> Result<DistanceMeasureResult> {
    touch("distance_based_measure");
    match kind {
        DistanceKind::Trace => c_trace_distance(rho),
        DistanceKind::RelativeEntropy => Ok(DistanceMeasureResult {
            value: c_rel_ent(rho),
            witness: dephase(rho),
            gap: 0.0,
        }),
    }
}

/// Value of any catalog measure with its witness where one exists.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureResult {
    pub measure: MeasureKind,
    pub value: f64,
    pub witness: Option<IncoherentState>,
    pub tolerance: f64,
}

pub fn evaluate(rho: &DensityMatrix, kind: MeasureKind) -> Result<MeasureResult> {
    let (value, witness, tolerance) = match kind {
        MeasureKind::L1 => (c_l1(rho), None, CLOSED_FORM_TOL),
        MeasureKind::RelativeEntropy => (c_rel_ent(rho), Some(dephase(rho)), CLOSED_FORM_TOL),
        MeasureKind::TraceDistanceCoherence => {
            let r = c_trace_distance(rho)?;
            (r.value, Some(r.witness), r.gap.max(CLOSED_FORM_TOL))
        }
        MeasureKind::GeometricPure => (geometric_of_density(rho)?, None, CLOSED_FORM_TOL),
    };
    Ok(MeasureResult {
        measure: kind,
        value,
        witness,
        tolerance,
    })
}

pub fn measure_value(rho: &DensityMatrix, kind: MeasureKind) -> Result<f64> {
    Ok(evaluate(rho, kind)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::random_density;

    fn plus() -> DensityMatrix {
        PureState::maximally_coherent(2, 2).unwrap().density()
    }

    #[test]
    fn l1_examples() {
        assert_eq!(c_l1(&IncoherentState::new(vec![0.2, 0.3, 0.5]).unwrap().to_density()), 0.0);
        assert!((c_l1(&plus()) - 1.0).abs() < 1e-15);
        for d in 2..=5 {
            let psi = PureState::maximally_coherent(d, d).unwrap().density();
            assert!((c_l1(&psi) - (d as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rel_ent_examples() {
        assert!(c_rel_ent(&IncoherentState::uniform(3).to_density()) < 1e-15);
        assert!((c_rel_ent(&plus()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_coherence_examples() {
        let r = c_trace_distance(&plus()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!(r.witness.probs().iter().all(|p| (p - 0.5).abs() < 1e-15));
        let delta = IncoherentState::new(vec![0.1, 0.6, 0.3]).unwrap();
        let r = c_trace_distance(&delta.to_density()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.witness, delta);
    }

    #[test]
    fn trace_distance_coherence_beats_dephasing_in_d3() {
        let rho = random_density(3, 1, 17).unwrap();
        let r = c_trace_distance(&rho).unwrap();
        let at_deph = trace_distance_to_diag(rho.matrix(), dephase(&rho).probs());
        assert!(r.value <= at_deph + 1e-15);
        assert!(r.gap < 1e-6);
        let recomputed = trace_distance_to_diag(rho.matrix(), r.witness.probs());
        assert!((recomputed - r.value).abs() < 1e-12);
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(c_geometric_pure(&PureState::basis(3, 2)), 0.0);
        let p = PureState::maximally_coherent(2, 2).unwrap();
        assert!((c_geometric_pure(&p) - 0.5).abs() < 1e-15);
        let b = PureState::qubit_rotated(std::f64::consts::FRAC_PI_6);
        assert!((c_geometric_pure(&b) - 0.25).abs() < 1e-15);
        assert!(matches!(
            evaluate(&DensityMatrix::maximally_mixed(2), MeasureKind::GeometricPure),
            Err(Error::NotPure { .. })
        ));
        let v = evaluate(&b.density(), MeasureKind::GeometricPure).unwrap();
        assert!((v.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn measure_tags_parse() {
        for k in [
            MeasureKind::L1,
            MeasureKind::RelativeEntropy,
            MeasureKind::TraceDistanceCoherence,
            MeasureKind::GeometricPure,
        ] {
            assert_eq!(k.tag().parse::<MeasureKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.tag()));
        }
    }
}

