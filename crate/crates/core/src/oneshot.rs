//! One-shot distillation and cost searches over a finite family of
//! incoherent operations.
//!
//! Both searches only ever see a restricted family, so distillation returns
//! a lower bound on the true one-shot rate and cost an upper bound on the
//! true one-shot cost.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::channel::{is_incoherent_channel, permutation_unitary, KrausChannel};
use crate::coverage::touch;
use crate::error::{Error, Result};
use crate::harness::{judge, Outcome, PropId, PropReport, Side};
use crate::linalg::{CMatrix, C64};
use crate::measures::{measure_value, MeasureKind};
use crate::metrics::{relative_entropy_raw, trace_distance_raw, DistanceKind};
use crate::simplex::simplex_grid;
use crate::smoothing::{image_ball_distance, smooth_max_with_candidates, smooth_min, BallSpec, SolverConfig};
use crate::state::{matrix_to_rows, DensityMatrix, PureState};

/// Feasibility slack on the distance constraint.
const FEASIBILITY_TOL: f64 = 1e-12;
/// Distance below which a state counts as an exact preimage of `Ψ_M`.
const PREIMAGE_TOL: f64 = 1e-6;

/// `|Ψ_M⟩` embedded in dimension `d` with its coherence `c_M`.
#[derive(Clone, Debug)]
pub struct MaxCoherentState {
    m: usize,
    state: PureState,
    density: DensityMatrix,
}

impl MaxCoherentState {
    pub fn new(m: usize, d: usize) -> Result<Self> {
        let state = PureState::maximally_coherent(m, d)?;
        let density = state.density();
        Ok(Self { m, state, density })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.state.dim()
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.density
    }

    /// `c_M = C(Ψ_M)`: `M − 1` for l1, `log₂ M` for relative entropy.
    pub fn c_m(&self, measure: MeasureKind) -> Result<f64> {
        match measure {
            MeasureKind::L1 => Ok(self.m as f64 - 1.0),
            MeasureKind::RelativeEntropy => Ok((self.m as f64).log2()),
            _ => measure_value(&self.density, measure),
        }
    }
}

/// A member of the search family, stored by its parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyChannel {
    Identity,
    /// `|π(j)⟩⟨j|` with phase `e^{iφ_k}` on output `k`.
    PermutePhase { perm: Vec<usize>, phases: Vec<f64> },
    /// `(1−s)ρ + s·Δ(ρ)`.
    Dephase { strength: f64 },
    /// `(1−p)ρ + p·δ`.
    Mix { delta: Vec<f64>, p: f64 },
    /// `then ∘ first`.
    Compose { first: Box<FamilyChannel>, then: Box<FamilyChannel> },
}

impl FamilyChannel {
    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        let d = m.rows();
        match self {
            FamilyChannel::Identity => m.clone(),
            FamilyChannel::PermutePhase { perm, phases } => {
                let mut out = CMatrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        let (a, b) = (perm[i], perm[j]);
                        out[(a, b)] = m[(i, j)] * C64::from_polar(1.0, phases[a] - phases[b]);
                    }
                }
                out
            }
            FamilyChannel::Dephase { strength } => CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    m[(i, i)]
                } else {
                    m[(i, j)] * (1.0 - strength)
                }
            }),
            FamilyChannel::Mix { delta, p } => {
                let tr = m.trace().re;
                CMatrix::from_fn(d, d, |i, j| {
                    let base = m[(i, j)] * (1.0 - p);
                    if i == j {
                        base + p * tr * delta[i]
                    } else {
                        base
                    }
                })
            }
            FamilyChannel::Compose { first, then } => then.apply(&first.apply(m)),
        }
    }

    /// Kraus representation on dimension `d`.
    pub fn to_kraus(&self, d: usize) -> KrausChannel {
        let ops = match self {
            FamilyChannel::Identity => vec![CMatrix::identity(d)],
            FamilyChannel::PermutePhase { perm, phases } => {
                let ph: Vec<C64> = phases.iter().map(|&t| C64::from_polar(1.0, t)).collect();
                vec![permutation_unitary(perm, &ph)]
            }
            FamilyChannel::Dephase { strength } => {
                let mut ops = vec![CMatrix::identity(d).scale((1.0 - strength).sqrt())];
                if *strength > 0.0 {
                    ops.extend((0..d).map(|i| CMatrix::unit(d, d, i, i).scale(strength.sqrt())));
                }
                ops
            }
            FamilyChannel::Mix { delta, p } => {
                let mut ops = vec![CMatrix::identity(d).scale((1.0 - p).sqrt())];
                for (i, &w) in delta.iter().enumerate() {
                    if p * w > 0.0 {
                        ops.extend((0..d).map(|j| CMatrix::unit(d, d, i, j).scale((p * w).sqrt())));
                    }
                }
                ops
            }
            FamilyChannel::Compose { first, then } => {
                let a = first.to_kraus(d);
                let b = then.to_kraus(d);
                b.operators()
                    .iter()
                    .flat_map(|kb| a.operators().iter().map(move |ka| kb * ka))
                    .collect()
            }
        };
        let ops: Vec<CMatrix> = ops.into_iter().filter(|k| k.frobenius_norm() > 0.0).collect();
        KrausChannel::new(ops).expect("family members are trace preserving")
    }
}

/// Enumeration grids; defaults follow the documented family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    /// Phase settings per diagonal entry for stand-alone unitaries.
    pub phase_steps: usize,
    /// Phase settings inside compositions.
    pub composition_phase_steps: usize,
    pub dephase_strengths: Vec<f64>,
    pub mix_p: Vec<f64>,
    /// `δ` grid resolution (`1/delta_steps`).
    pub delta_steps: usize,
    /// 1 disables compositions, 2 adds unitary/non-unitary pairs.
    pub depth: usize,
    /// Full symmetric group up to this dimension, cyclic shifts above it.
    pub max_permutation_dim: usize,
    pub budget: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            phase_steps: 8,
            composition_phase_steps: 8,
            dephase_strengths: vec![0.5, 1.0],
            mix_p: (1..=10).map(|k| k as f64 / 10.0).collect(),
            delta_steps: 4,
            depth: 2,
            max_permutation_dim: 4,
            budget: 150_000,
        }
    }
}

/// Enumeration limits as reported alongside search results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FamilyBudget {
    pub budget: usize,
    pub enumerated: usize,
    pub truncated: bool,
}

/// Finite family of incoherent operations on dimension `d`.
#[derive(Clone, Debug)]
pub struct OperationFamily {
    d: usize,
    members: Vec<FamilyChannel>,
    budget: FamilyBudget,
}

fn permutations(d: usize, full: bool) -> Vec<Vec<usize>> {
    if !full {
        return (0..d).map(|s| (0..d).map(|i| (i + s) % d).collect()).collect();
    }
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..d).collect();
    permute(&mut p, 0, &mut out);
    out.sort();
    out
}

fn permute(p: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == p.len() {
        out.push(p.clone());
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, out);
        p.swap(k, i);
    }
}

/// Phase vectors with `φ_0 = 0` and the rest on a grid of `steps` angles.
fn phase_settings(d: usize, steps: usize) -> Vec<Vec<f64>> {
    let steps = steps.max(1);
    let mut out = vec![vec![0.0]];
    for _ in 1..d {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..steps).map(move |k| {
                    let mut w = v.clone();
                    w.push(std::f64::consts::TAU * k as f64 / steps as f64);
                    w
                })
            })
            .collect();
    }
    out
}

fn unitaries(d: usize, steps: usize, cfg: &FamilyConfig) -> Vec<FamilyChannel> {
    let perms = permutations(d, d <= cfg.max_permutation_dim);
    let phases = phase_settings(d, steps);
    let mut out = Vec::new();
    for perm in &perms {
        for ph in &phases {
            let trivial = perm.iter().enumerate().all(|(i, &p)| i == p) && ph.iter().all(|&t| t == 0.0);
            if !trivial {
                out.push(FamilyChannel::PermutePhase {
                    perm: perm.clone(),
                    phases: ph.clone(),
                });
            }
        }
    }
    out
}

impl OperationFamily {
    pub fn new(d: usize, cfg: &FamilyConfig) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidRank { rank: 0, dim: 0 });
        }
        for &s in &cfg.dephase_strengths {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidParameter {
                    name: "dephase_strength",
                    value: s,
                });
            }
        }
        for &p in &cfg.mix_p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter { name: "mix_p", value: p });
            }
        }
        let mut all = vec![FamilyChannel::Identity];
        all.extend(unitaries(d, cfg.phase_steps, cfg));
        let mut lossy: Vec<FamilyChannel> = cfg
            .dephase_strengths
            .iter()
            .filter(|&&s| s > 0.0)
            .map(|&s| FamilyChannel::Dephase { strength: s })
            .collect();
        if cfg.delta_steps > 0 {
            for delta in simplex_grid(d, cfg.delta_steps) {
                for &p in cfg.mix_p.iter().filter(|&&p| p > 0.0) {
                    lossy.push(FamilyChannel::Mix { delta: delta.clone(), p });
                }
            }
        }
        all.extend(lossy.iter().cloned());
        if cfg.depth >= 2 && all.len() < cfg.budget {
            let coarse = unitaries(d, cfg.composition_phase_steps, cfg);
            'outer: for n in &lossy {
                for u in &coarse {
                    for pair in [(n, u), (u, n)] {
                        if all.len() > cfg.budget {
                            break 'outer;
                        }
                        all.push(FamilyChannel::Compose {
                            first: Box::new(pair.0.clone()),
                            then: Box::new(pair.1.clone()),
                        });
                    }
                }
            }
        }
        let truncated = all.len() > cfg.budget;
        all.truncate(cfg.budget);
        Self::from_members(d, all, cfg.budget, truncated)
    }

    /// Family from explicit members, in the given enumeration order.
    pub fn from_members(d: usize, members: Vec<FamilyChannel>, budget: usize, truncated: bool) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(Self {
            d,
            budget: FamilyBudget {
                budget,
                enumerated: members.len(),
                truncated,
            },
            members,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn members(&self) -> &[FamilyChannel] {
        &self.members
    }

    pub fn budget(&self) -> FamilyBudget {
        self.budget
    }

    /// Checks the structural incoherence criterion on every member.
    pub fn all_incoherent(&self) -> bool {
        self.members.par_iter().all(|c| is_incoherent_channel(&c.to_kraus(self.d)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Distill,
    Cost,
}

/// Best `(Λ, M)` found by a search.
#[derive(Clone, Debug)]
pub struct OneshotReport {
    pub mode: SearchMode,
    pub best_c_m: f64,
    pub m: usize,
    pub epsilon: f64,
    pub distance: DistanceKind,
    pub measure: MeasureKind,
    pub witness: FamilyChannel,
    pub witness_index: usize,
    pub achieved_distance: f64,
    pub family_budget: FamilyBudget,
    pub dim: usize,
}

impl Serialize for OneshotReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim;
        let kraus = self.witness.to_kraus(d).to_file();
        let mut st = s.serialize_struct("OneshotReport", 9)?;
        st.serialize_field("mode", &self.mode)?;
        st.serialize_field("best_cM", &self.best_c_m)?;
        st.serialize_field("M", &self.m)?;
        st.serialize_field("epsilon", &self.epsilon)?;
        st.serialize_field("distance", self.distance.tag())?;
        st.serialize_field("measure", &self.measure)?;
        st.serialize_field(
            "witness_channel",
            &serde_json::json!({
                "index": self.witness_index,
                "params": self.witness,
                "kraus": kraus.kraus,
                "dims": kraus.dims,
            }),
        )?;
        st.serialize_field("achieved_distance", &self.achieved_distance)?;
        st.serialize_field("family_budget", &self.family_budget)?;
        st.end()
    }
}

fn distance_raw(kind: DistanceKind, a: &CMatrix, b: &CMatrix) -> f64 {
    match kind {
        DistanceKind::Trace => trace_distance_raw(a, b),
        DistanceKind::RelativeEntropy => relative_entropy_raw(a, b),
    }
}

fn targets(d: usize, m_range: &RangeInclusive<usize>, measure: MeasureKind) -> Result<Vec<(MaxCoherentState, f64)>> {
    let (lo, hi) = (*m_range.start(), *m_range.end());
    if lo == 0 || hi > d || lo > hi {
        return Err(Error::InvalidRank {
            rank: if lo == 0 || lo > hi { lo } else { hi },
            dim: d,
        });
    }
    (lo..=hi)
        .map(|m| {
            let t = MaxCoherentState::new(m, d)?;
            let c = t.c_m(measure)?;
            Ok((t, c))
        })
        .collect()
}

struct Hit {
    index: usize,
    m: usize,
    c: f64,
    dist: f64,
}

fn search(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    m_range: RangeInclusive<usize>,
    mode: SearchMode,
) -> Result<OneshotReport> {
    let d = rho.dim();
    if family.dim() != d {
        return Err(Error::DimensionMismatch(family.dim(), d));
    }
    let ball = BallSpec::new(ball.distance, ball.epsilon)?;
    let mut ts = targets(d, &m_range, measure)?;
    // best candidate first within each channel
    match mode {
        SearchMode::Distill => ts.sort_by(|a, b| b.1.total_cmp(&a.1)),
        SearchMode::Cost => ts.sort_by(|a, b| a.1.total_cmp(&b.1)),
    }
    let limit = ball.epsilon + FEASIBILITY_TOL;
    let hits: Vec<Option<Hit>> = family
        .members
        .par_iter()
        .enumerate()
        .map(|(index, ch)| {
            let image = (mode == SearchMode::Distill).then(|| ch.apply(rho.matrix()));
            ts.iter().find_map(|(t, c)| {
                let dist = match &image {
                    Some(out) => distance_raw(ball.distance, out, t.density().matrix()),
                    None => distance_raw(ball.distance, rho.matrix(), &ch.apply(t.density().matrix())),
                };
                (dist <= limit).then_some(Hit {
                    index,
                    m: t.m(),
                    c: *c,
                    dist,
                })
            })
        })
        .collect();
    let better = |a: &Hit, b: &Hit| match mode {
        SearchMode::Distill => a.c > b.c,
        SearchMode::Cost => a.c < b.c,
    };
    let mut best: Option<Hit> = None;
    for h in hits.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| better(&h, b)) {
            best = Some(h);
        }
    }
    let Some(b) = best else {
        return Err(Error::Infeasible(format!(
            "no (channel, M) with M in {}..={} within ε = {} among {} family members",
            m_range.start(),
            m_range.end(),
            ball.epsilon,
            family.members.len()
        )));
    };
    Ok(OneshotReport {
        mode,
        best_c_m: b.c,
        m: b.m,
        epsilon: ball.epsilon,
        distance: ball.distance,
        measure,
        witness: family.members[b.index].clone(),
        witness_index: b.index,
        achieved_distance: b.dist,
        family_budget: family.budget,
        dim: d,
    })
}

/// Largest `c_M` with `D(Λ(ρ), Ψ_M) ≤ ε` over the family: a lower bound on
/// the one-shot distillable coherence.
pub fn distill_one_shot(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    m_range: RangeInclusive<usize>,
) -> Result<OneshotReport> {
    touch("distill_one_shot");
    search(rho, ball, family, measure, m_range, SearchMode::Distill)
}

/// Smallest `c_M` with `D(ρ, Λ(Ψ_M)) ≤ ε` over the family: an upper bound on
/// the one-shot coherence cost.
pub fn cost_one_shot(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    m_range: RangeInclusive<usize>,
) -> Result<OneshotReport> {
    touch("cost_one_shot");
    search(rho, ball, family, measure, m_range, SearchMode::Cost)
}

fn instance_json(rho: &DensityMatrix, ball: &BallSpec, measure: MeasureKind, r: Option<&OneshotReport>) -> serde_json::Value {
    serde_json::json!({
        "rho": matrix_to_rows(rho.matrix()),
        "epsilon": ball.epsilon,
        "distance": ball.distance.tag(),
        "measure": measure.tag(),
        "search": r,
    })
}

/// `distill ≤ C_{ε,max}(ρ)`.
///
/// The distillation value is a lower bound on the true rate and the
/// maximizer a lower bound on `C_{ε,max}`, so the comparison alone can only
/// pass when it is not tight. Otherwise the witness channel is audited: a
/// state `τ` in the ball with `Λ*(τ) = Ψ_M` has `C(τ) ≥ c_M` and is handed to
/// the maximizer as a candidate. When no such preimage exists the image-ball
/// hypothesis fails for this instance and it is skipped.
fn audit_distill(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    config: &SolverConfig,
    tol: f64,
) -> Result<Outcome> {
    let d = rho.dim();
    let r = distill_one_shot(rho, ball, family, measure, 1..=d)?;
    let witness = instance_json(rho, ball, measure, Some(&r));
    let mx = smooth_max_with_candidates(rho, ball, measure, config, &[])?;
    let first = judge(Side::exact(r.best_c_m), Side::new(mx.lower(), mx.upper()), tol, witness.clone());
    if first.passed() || r.best_c_m == 0.0 {
        return Ok(first);
    }
    let target = MaxCoherentState::new(r.m, d)?;
    let kraus = r.witness.to_kraus(d);
    let (dist, tau, lower) = image_ball_distance(rho, ball, &kraus, target.density().matrix(), config.gap_tol);
    if lower > PREIMAGE_TOL {
        return Ok(Outcome::skipped("image-ball-hypothesis-fails", witness));
    }
    if dist > PREIMAGE_TOL {
        return Ok(Outcome::skipped("preimage-unresolved", witness));
    }
    let mx = smooth_max_with_candidates(rho, ball, measure, config, &[tau])?;
    Ok(judge(Side::exact(r.best_c_m), Side::new(mx.lower(), mx.upper()), tol, witness))
}

/// `C_{ε,min}(ρ) ≤ cost`.
///
/// The cost search is an upper bound on the true cost, so the check is
/// `C_{ε,min}(ρ) ≤ C(Λ*(Ψ_M)) ≤ c_M`: the found image lies in the ball, which
/// makes `min(solver value, C(Λ*(Ψ_M)))` a valid upper estimate of the left
/// side.
fn audit_cost(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    config: &SolverConfig,
    tol: f64,
) -> Result<Outcome> {
    let d = rho.dim();
    let r = match cost_one_shot(rho, ball, family, measure, 1..=d) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => {
            return Ok(Outcome::skipped("cost-infeasible", instance_json(rho, ball, measure, None)));
        }
        Err(e) => return Err(e),
    };
    let witness = instance_json(rho, ball, measure, Some(&r));
    let mn = smooth_min(rho, ball, measure, config)?;
    let target = MaxCoherentState::new(r.m, d)?;
    let image = DensityMatrix::repair(r.witness.apply(target.density().matrix()))?;
    let via_image = measure_value(&image, measure)?;
    let upper = mn.upper().min(via_image);
    Ok(judge(Side::new(mn.lower().min(upper), upper), Side::exact(r.best_c_m), tol, witness))
}

/// Both audits at one `ε`: `(P9, P10)`.
pub(crate) fn bound_consistency_outcomes(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    config: &SolverConfig,
    tol: f64,
) -> Result<(Outcome, Outcome)> {
    touch("bound_consistency");
    let p9 = audit_distill(rho, ball, family, measure, config, tol)?;
    let p10 = audit_cost(rho, ball, family, measure, config, tol)?;
    Ok((p9, p10))
}

/// Runs both searches at one `ε` and reports the P9 and P10 verdicts.
pub fn bound_consistency(
    rho: &DensityMatrix,
    ball: &BallSpec,
    family: &OperationFamily,
    measure: MeasureKind,
    config: &SolverConfig,
) -> Result<Vec<PropReport>> {
    let tol = 2.0 * (config.gap_tol + crate::smoothing::ORACLE_AGREEMENT);
    let (p9, p10) = bound_consistency_outcomes(rho, ball, family, measure, config, tol)?;
    let cfg = serde_json::json!({
        "epsilon": ball.epsilon,
        "distance": ball.distance.tag(),
        "measure": measure.tag(),
        "family": family.budget,
    });
    Ok(vec![
        PropReport::from_outcomes(PropId::P9, vec![p9], tol, cfg.clone()),
        PropReport::from_outcomes(PropId::P10, vec![p10], tol, cfg),
    ])
}
