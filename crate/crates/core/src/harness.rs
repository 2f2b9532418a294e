//! Proposition campaigns: sampling, one-sided verdicts and reports.
//!
//! Every estimate enters a check as an interval `[lo, hi]` that is known to
//! contain the exact quantity. An inequality `lhs ≤ rhs` passes when
//! `lhs.hi ≤ rhs.lo + tol`, is a violation when `lhs.lo > rhs.hi + tol`, and
//! is skipped otherwise. Skipped instances never count as passed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channel::{apply_kraus, selective_apply, KrausChannel};
use crate::coverage::touch;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix};
use crate::measures::{c_geometric_pure, c_rel_ent, c_trace_distance, distance_based_measure, measure_value, MeasureKind};
use crate::metrics::{
    dephase, mixing_channel, relative_entropy, shannon_entropy, tensor, trace_distance, von_neumann_entropy, DistanceKind,
};
use crate::oneshot::{bound_consistency_outcomes, FamilyConfig, OperationFamily};
use crate::oracle::{bloch_measure, local_modulus, sweep, Bloch, Grid};
use crate::smoothing::{smooth_min, smooth_min_relent_ball, tensor_invariance_check, BallSpec, SmoothResult, SolverConfig};
use crate::state::{matrix_to_rows, random_density, random_incoherent, random_pure, DensityMatrix, IncoherentState, PureState, Sampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    P10,
    #[serde(rename = "ID_CD")]
    IdCd,
    #[serde(rename = "WSM")]
    Wsm,
    #[serde(rename = "CRE_BOUND")]
    CreBound,
}

impl PropId {
    pub const ALL: [PropId; 13] = [
        PropId::P1,
        PropId::P2,
        PropId::P3,
        PropId::P4,
        PropId::P5,
        PropId::P6,
        PropId::P7,
        PropId::P8,
        PropId::P9,
        PropId::P10,
        PropId::IdCd,
        PropId::Wsm,
        PropId::CreBound,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            PropId::P1 => "P1",
            PropId::P2 => "P2",
            PropId::P3 => "P3",
            PropId::P4 => "P4",
            PropId::P5 => "P5",
            PropId::P6 => "P6",
            PropId::P7 => "P7",
            PropId::P8 => "P8",
            PropId::P9 => "P9",
            PropId::P10 => "P10",
            PropId::IdCd => "ID_CD",
            PropId::Wsm => "WSM",
            PropId::CreBound => "CRE_BOUND",
        }
    }

    fn index(self) -> u64 {
        PropId::ALL.iter().position(|&p| p == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for PropId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for PropId {
    type Err = Error;

    /// Accepts `3`, `P3`, `p3`, `ID_CD`, `id-cd`, ...
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        let norm = if norm.chars().all(|c| c.is_ascii_digit()) { format!("P{norm}") } else { norm };
        PropId::ALL
            .iter()
            .copied()
            .find(|p| p.tag() == norm)
            .ok_or_else(|| Error::Malformed(format!("unknown proposition `{s}`")))
    }
}

/// Interval known to contain an exact quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Side {
    pub lo: f64,
    pub hi: f64,
}

impl Side {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo: lo.min(hi), hi }
    }

    pub fn exact(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn min_result(r: &SmoothResult) -> Self {
        Self::new(r.lower(), r.upper())
    }

    fn scale(self, k: f64) -> Self {
        if k >= 0.0 {
            Self::new(k * self.lo, k * self.hi)
        } else {
            Self::new(k * self.hi, k * self.lo)
        }
    }

    fn add(self, o: Side) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn sub(self, o: Side) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Violation,
    Skipped(&'static str),
}

/// Result of one sampled instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub verdict: Verdict,
    /// `lhs.hi − rhs.lo` for asserted instances.
    pub slack: Option<f64>,
    pub witness: Value,
}

impl Outcome {
    pub fn skipped(reason: &'static str, witness: Value) -> Self {
        Self {
            verdict: Verdict::Skipped(reason),
            slack: None,
            witness,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn rank(&self) -> u8 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Skipped(_) => 1,
            Verdict::Violation => 2,
        }
    }

    /// Conjunction of two checks on the same instance.
    fn and(self, other: Outcome) -> Outcome {
        let slack = match (self.slack, other.slack) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let mut worse = if other.rank() > self.rank() { other } else { self };
        if !matches!(worse.verdict, Verdict::Skipped(_)) {
            worse.slack = slack;
        }
        worse
    }
}

/// One-sided check of `lhs ≤ rhs`.
pub fn judge(lhs: Side, rhs: Side, tol: f64, witness: Value) -> Outcome {
    let slack = lhs.hi - rhs.lo;
    let verdict = if slack <= tol {
        Verdict::Pass
    } else if lhs.lo - rhs.hi > tol {
        Verdict::Violation
    } else {
        Verdict::Skipped("inconclusive")
    };
    let slack = (verdict != Verdict::Skipped("inconclusive")).then_some(slack);
    Outcome { verdict, slack, witness }
}

/// Two-sided check of `a = b`.
fn judge_eq(a: Side, b: Side, tol: f64, witness: Value) -> Outcome {
    judge(a, b, tol, witness.clone()).and(judge(b, a, tol, witness))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportVerdict {
    Pass,
    Fail,
    /// Nothing was asserted: every instance was skipped.
    Vacuous,
}

/// Verdict of a proposition campaign.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropReport {
    pub prop_id: PropId,
    pub verdict: ReportVerdict,
    /// The proposition asserts a failure, so violations are the goal.
    pub expect_violation: bool,
    pub samples: usize,
    pub passed: usize,
    pub violations: usize,
    pub skipped: usize,
    pub max_slack: Option<f64>,
    pub tolerance: f64,
    pub skip_reasons: BTreeMap<String, usize>,
    /// Which side of the inequality each estimate may safely occupy.
    pub audit: Vec<String>,
    pub worst_witness: Option<Value>,
    pub config: Value,
}

impl PropReport {
    pub fn from_outcomes(prop_id: PropId, outcomes: Vec<Outcome>, tolerance: f64, config: Value) -> Self {
        let mut r = PropReport {
            prop_id,
            verdict: ReportVerdict::Vacuous,
            expect_violation: prop_id == PropId::P3,
            samples: outcomes.len(),
            passed: 0,
            violations: 0,
            skipped: 0,
            max_slack: None,
            tolerance,
            skip_reasons: BTreeMap::new(),
            audit: audit_notes(prop_id).iter().map(|s| s.to_string()).collect(),
            worst_witness: None,
            config,
        };
        for o in outcomes {
            match o.verdict {
                Verdict::Pass => r.passed += 1,
                Verdict::Violation => r.violations += 1,
                Verdict::Skipped(reason) => {
                    r.skipped += 1;
                    *r.skip_reasons.entry(reason.to_string()).or_insert(0) += 1;
                    continue;
                }
            }
            if let Some(s) = o.slack {
                if r.max_slack.is_none_or(|m| s > m) {
                    r.max_slack = Some(s);
                    r.worst_witness = Some(o.witness);
                }
            }
        }
        let asserted = r.passed + r.violations;
        r.verdict = if asserted == 0 {
            ReportVerdict::Vacuous
        } else if r.expect_violation {
            if r.passed == 0 {
                ReportVerdict::Pass
            } else {
                ReportVerdict::Fail
            }
        } else if r.violations == 0 {
            ReportVerdict::Pass
        } else {
            ReportVerdict::Fail
        };
        r
    }

    /// Whether the report breaks a CI run.
    pub fn failed(&self) -> bool {
        self.verdict == ReportVerdict::Fail || (self.expect_violation && self.verdict != ReportVerdict::Pass)
    }

    /// Row for the CSV summary: prop_id, samples, violations, skipped, max_slack.
    pub fn csv_row(&self) -> [String; 5] {
        [
            self.prop_id.tag().to_string(),
            self.samples.to_string(),
            self.violations.to_string(),
            self.skipped.to_string(),
            self.max_slack.map(|s| format!("{s:e}")).unwrap_or_default(),
        ]
    }
}

pub const CSV_HEADER: [&str; 5] = ["prop_id", "samples", "violations", "skipped", "max_slack"];

fn audit_notes(p: PropId) -> &'static [&'static str] {
    match p {
        PropId::P1 => &[
            "C_{ε,min}: solver value is an upper bound, value − gap a certified lower bound",
            "qubit instances cross-checked by the Bloch oracle; disagreement skips the instance",
        ],
        PropId::P2 | PropId::P4 => &["both sides: certified minimum intervals [value − gap, value]"],
        PropId::P3 => &[
            "C_{ε,min}(ρ): upper bound (incoherent witness in the ball)",
            "Σ p_k C_{ε,min}(ρ_k): certified lower bound",
        ],
        PropId::P5 => &["|ΔC_{ε,min}|: upper from minimum intervals; bound: lower from minimum intervals"],
        PropId::P6 => &["C_D: closed form for qubits, certified interval for d ≥ 3"],
        PropId::P7 => &[
            "upper bound: C_{ε,min} upper vs bound lower (C_D interval)",
            "lower bound: level-set grid minimum plus local modulus vs C_{ε,min} lower; qubits only",
        ],
        PropId::P8 => &["image-ball maximum vs ball maximum on the same Bloch grid points"],
        PropId::P9 => &[
            "distillation search: lower bound on the one-shot rate (exact value of the found witness)",
            "C_{ε,max}: maximizer value is a lower bound; a pass needs distill ≤ that value + tol",
            "undecided instances audit the witness channel for a preimage of Ψ_M in the ball",
        ],
        PropId::P10 => &[
            "cost search: upper bound on the one-shot cost (exact value of the found witness)",
            "C_{ε,min}: min(solver value, C(Λ*(Ψ_M))) is an upper bound",
        ],
        PropId::IdCd => &["C_D closed form (qubits); C_{ε,min} certified interval; equality checked both ways"],
        PropId::Wsm => &[
            "C_{r,ε}(ρ_k): min(solver value, C_r(τ_k)) upper bound, valid when τ_k lies in the branch ball",
            "C_{r,ε}(ρ): certified lower bound",
        ],
        PropId::CreBound => &["C_{r,ε}: solver value is an upper bound; C_r(ρ) − ε exact"],
    }
}

/// Sampling and tolerance schedule for a campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Campaign {
    pub seed: u64,
    /// Dimensions for propositions not restricted to qubits.
    pub dims: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub samples: BTreeMap<PropId, usize>,
    pub channels_per_sample: usize,
    pub tol_closed_form: f64,
    pub tol_oracle: f64,
    pub tol_identity: f64,
    /// Slack of the P1 ordering bound.
    pub tol_ordering: f64,
    /// Slack of the P6 equality.
    pub tol_equality: f64,
    pub oracle_resolution: usize,
    pub gap_tol: f64,
    pub continuity_p: f64,
    pub mixing_p: Vec<f64>,
    /// Ball radius shared by the distillation and cost searches.
    pub oneshot_epsilon: f64,
    pub prop3_eta: f64,
    pub prop3_epsilon: f64,
    pub family: FamilyConfig,
}

impl Default for Campaign {
    fn default() -> Self {
        let samples = [
            (PropId::P1, 200),
            (PropId::P2, 50),
            (PropId::P3, 1),
            (PropId::P4, 100),
            (PropId::P5, 100),
            (PropId::P6, 50),
            (PropId::P7, 100),
            (PropId::P8, 50),
            (PropId::P9, 20),
            (PropId::P10, 20),
            (PropId::IdCd, 100),
            (PropId::Wsm, 50),
            (PropId::CreBound, 100),
        ]
        .into_iter()
        .collect();
        Self {
            seed: 0,
            dims: vec![2, 3],
            epsilons: vec![0.05, 0.1, 0.2],
            samples,
            channels_per_sample: 10,
            tol_closed_form: 1e-9,
            tol_oracle: 2e-3,
            tol_identity: 5e-3,
            tol_ordering: 1e-6,
            tol_equality: 5e-4,
            oracle_resolution: 81,
            gap_tol: 1e-9,
            continuity_p: 0.02,
            mixing_p: vec![0.1, 0.5, 0.9],
            oneshot_epsilon: 0.2,
            prop3_eta: 0.05,
            prop3_epsilon: 0.1,
            family: FamilyConfig::default(),
        }
    }
}

fn bad(name: &'static str, value: f64) -> Error {
    Error::InvalidParameter { name, value }
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Malformed("campaign needs at least one dimension".into()));
        }
        for &d in &self.dims {
            if !(2..=6).contains(&d) {
                return Err(bad("dims", d as f64));
            }
        }
        if self.epsilons.is_empty() {
            return Err(Error::Malformed("campaign needs at least one epsilon".into()));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                return Err(bad("epsilons", e));
            }
        }
        for (name, v) in [
            ("tol_closed_form", self.tol_closed_form),
            ("tol_oracle", self.tol_oracle),
            ("tol_identity", self.tol_identity),
            ("tol_ordering", self.tol_ordering),
            ("tol_equality", self.tol_equality),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(name, v));
            }
        }
        if !(self.gap_tol > 0.0) {
            return Err(bad("gap_tol", self.gap_tol));
        }
        if self.oracle_resolution < 3 {
            return Err(bad("oracle_resolution", self.oracle_resolution as f64));
        }
        if !(self.continuity_p > 0.0 && self.continuity_p <= 1.0) {
            return Err(bad("continuity_p", self.continuity_p));
        }
        for &p in &self.mixing_p {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad("mixing_p", p));
            }
        }
        if !(0.0..=1.0).contains(&self.oneshot_epsilon) {
            return Err(bad("oneshot_epsilon", self.oneshot_epsilon));
        }
        CounterexampleSpec::with_eta(self.prop3_eta, self.prop3_epsilon)?.validate()?;
        Ok(())
    }

    pub fn samples_for(&self, p: PropId) -> usize {
        self.samples
            .get(&p)
            .copied()
            .unwrap_or_else(|| Campaign::default().samples[&p])
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            gap_tol: self.gap_tol,
            oracle: true,
            oracle_resolution: self.oracle_resolution,
            ..SolverConfig::default()
        }
    }

    fn seed_for(&self, p: PropId, i: usize) -> u64 {
        splitmix(splitmix(self.seed ^ splitmix(p.index())) ^ i as u64)
    }

    fn epsilon_for(&self, i: usize) -> f64 {
        self.epsilons[i % self.epsilons.len()]
    }

    fn dim_for(&self, i: usize) -> usize {
        self.dims[i % self.dims.len()]
    }

    fn report_config(&self, p: PropId, tol: f64) -> Value {
        json!({
            "seed": self.seed,
            "samples": self.samples_for(p),
            "dims": self.dims,
            "epsilons": self.epsilons,
            "tolerance": tol,
            "oracle_resolution": self.oracle_resolution,
            "gap_tol": self.gap_tol,
        })
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const MEASURES: [MeasureKind; 2] = [MeasureKind::L1, MeasureKind::RelativeEntropy];

/// Strong-monotonicity counterexample: `ρ = η|0⟩⟨0|⊗ρ_c + (1−η)|1⟩⟨1|⊗δ`.
#[derive(Clone, Debug)]
pub struct CounterexampleSpec {
    pub eta: f64,
    pub rho_c: DensityMatrix,
    pub delta: IncoherentState,
    pub epsilon: f64,
    pub measure: MeasureKind,
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        Self::with_eta(0.05, 0.1).expect("default parameters are valid")
    }
}

impl CounterexampleSpec {
    /// `ρ_c = |+⟩⟨+|`, `δ = (½, ½)`, l1 measure.
    pub fn with_eta(eta: f64, epsilon: f64) -> Result<Self> {
        let plus = PureState::normalized(vec![crate::linalg::ONE, crate::linalg::ONE])?;
        Ok(Self {
            eta,
            rho_c: plus.density(),
            delta: IncoherentState::uniform(2),
            epsilon,
            measure: MeasureKind::L1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(bad("eta", self.eta));
        }
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(bad("epsilon", self.epsilon));
        }
        if self.eta > self.epsilon {
            return Err(Error::Infeasible(format!(
                "η = {} exceeds ε = {}: the incoherent product state leaves the ball",
                self.eta, self.epsilon
            )));
        }
        if self.rho_c.dim() != self.delta.dim() {
            return Err(Error::DimensionMismatch(self.rho_c.dim(), self.delta.dim()));
        }
        Ok(())
    }
}

fn block_projectors(d: usize) -> Result<KrausChannel> {
    let p0 = CMatrix::unit(2, 2, 0, 0).kron(&CMatrix::identity(d));
    let p1 = CMatrix::unit(2, 2, 1, 1).kron(&CMatrix::identity(d));
    KrausChannel::new(vec![p0, p1])
}

/// Builds the `2d`-dimensional block state and checks
/// `D_tr(ρ, |1⟩⟨1|⊗δ) = η` and its block spectrum.
pub fn build_prop3_state(spec: &CounterexampleSpec) -> Result<DensityMatrix> {
    touch("build_prop3_state");
    if !(spec.eta > 0.0 && spec.eta <= 1.0) {
        return Err(bad("eta", spec.eta));
    }
    let d = spec.rho_c.dim();
    if d != spec.delta.dim() {
        return Err(Error::DimensionMismatch(d, spec.delta.dim()));
    }
    let top = tensor(&DensityMatrix::basis(2, 0), &spec.rho_c);
    let far = tensor(&DensityMatrix::basis(2, 1), &spec.delta.to_density());
    let rho = DensityMatrix::mixture(&[spec.eta, 1.0 - spec.eta], &[top, far.clone()])?;
    let dist = trace_distance(&rho, &far)?;
    if (dist - spec.eta).abs() > 1e-10 {
        return Err(Error::Infeasible(format!("block distance {dist} differs from η = {}", spec.eta)));
    }
    let mut expected: Vec<f64> = spec
        .rho_c
        .eigenvalues()
        .iter()
        .map(|x| spec.eta * x)
        .chain(spec.delta.probs().iter().map(|x| (1.0 - spec.eta) * x))
        .collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    let got = hermitian_eig(rho.matrix())?.values;
    if got.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-10) {
        return Err(Error::Infeasible("block spectrum mismatch".into()));
    }
    Ok(rho)
}

fn p3_outcome(spec: &CounterexampleSpec, config: &SolverConfig, tol: f64) -> Result<(Outcome, bool)> {
    spec.validate()?;
    let rho = build_prop3_state(spec)?;
    let ball = BallSpec::trace(spec.epsilon)?;
    let whole = smooth_min(&rho, &ball, spec.measure, config)?;
    let branches = selective_apply(&block_projectors(spec.rho_c.dim())?, &rho)?;
    let mut sum = Side::exact(0.0);
    let mut parts = Vec::new();
    for b in &branches.branches {
        let r = smooth_min(&b.state, &ball, spec.measure, config)?;
        sum = sum.add(Side::min_result(&r).scale(b.prob));
        parts.push(json!({"prob": b.prob, "value": r.value, "gap": r.gap_estimate}));
    }
    let inv = tensor_invariance_check(&spec.rho_c, &ball, spec.measure, config)?;
    let witness = json!({
        "eta": spec.eta,
        "epsilon": spec.epsilon,
        "measure": spec.measure.tag(),
        "rho": matrix_to_rows(rho.matrix()),
        "c_min_rho": whole.value,
        "c_min_rho_flags": whole.flags,
        "branches": parts,
        "branch_sum": sum.lo,
        "tensor_invariance_slack": inv.slack,
    });
    // strong monotonicity claims Σ p_k C(ρ_k) ≤ C(ρ); the counterexample
    // needs the opposite with C_{ε,min}(ρ) itself below tolerance
    let mut o = judge(sum, Side::min_result(&whole), tol, witness);
    if whole.upper() > tol && o.verdict == Verdict::Violation {
        o.verdict = Verdict::Pass;
    }
    Ok((o, spec.eta == spec.epsilon))
}

/// Reproduces the failure of strong monotonicity for `C_{ε,min}`.
pub fn check_prop3(spec: &CounterexampleSpec, config: &SolverConfig) -> Result<PropReport> {
    touch("check_prop3");
    let tol = 1e-3;
    let (o, marginal) = p3_outcome(spec, config, tol)?;
    let mut r = PropReport::from_outcomes(
        PropId::P3,
        vec![o],
        tol,
        json!({"eta": spec.eta, "epsilon": spec.epsilon, "measure": spec.measure.tag(), "tolerance": tol}),
    );
    if marginal {
        r.audit.push("η = ε: the incoherent product state sits on the ball boundary".into());
    }
    Ok(r)
}

macro_rules! est {
    ($e:expr, $w:expr) => {
        match $e {
            Ok(v) => v,
            Err(reason) => return Ok(Outcome::skipped(reason, $w)),
        }
    };
}

/// Certified interval for `C_{ε,min}`, or the reason it is unusable.
fn min_side(rho: &DensityMatrix, ball: &BallSpec, measure: MeasureKind, c: &Campaign) -> Result<std::result::Result<Side, &'static str>> {
    match smooth_min(rho, ball, measure, &c.solver()) {
        Ok(r) if r.flags.iter().any(|f| f == "oracle-disagreement") => Ok(Err("oracle-disagreement")),
        Ok(r) => Ok(Ok(Side::min_result(&r))),
        Err(Error::NoConvergence { .. }) => Ok(Err("no-convergence")),
        Err(e) => Err(e),
    }
}

fn cd_side(rho: &DensityMatrix) -> Result<std::result::Result<Side, &'static str>> {
    match c_trace_distance(rho) {
        Ok(r) => Ok(Ok(Side::new(r.value - r.gap, r.value))),
        Err(Error::NoConvergence { .. }) => Ok(Err("no-convergence")),
        Err(e) => Err(e),
    }
}

fn base_witness(rho: &DensityMatrix, epsilon: f64, measure: MeasureKind, seed: u64) -> Value {
    json!({
        "seed": seed,
        "rho": matrix_to_rows(rho.matrix()),
        "epsilon": epsilon,
        "measure": measure.tag(),
    })
}

fn p1(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::P1, i);
    let rho = random_density(2, 2, seed)?;
    let measure = MEASURES[i % 2];
    let mut eps = c.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let k = if eps.len() > 1 { (i / 2) % (eps.len() - 1) } else { 0 };
    let (e, e_small) = (eps[k], eps.get(k + 1).copied().unwrap_or(0.0));
    let w = json!({"seed": seed, "rho": matrix_to_rows(rho.matrix()), "epsilon": e, "epsilon_small": e_small, "measure": measure.tag()});
    let big = est!(min_side(&rho, &BallSpec::trace(e)?, measure, c)?, w);
    let small = est!(min_side(&rho, &BallSpec::trace(e_small)?, measure, c)?, w);
    let cr = measure_value(&rho, measure)?;
    let order = judge(big, small, c.tol_ordering, w.clone());
    let gain = judge(small.sub(big), Side::exact((e - e_small) / e * cr), c.tol_ordering, w);
    Ok(order.and(gain))
}

fn p2(c: &Campaign, i: usize) -> Result<Outcome> {
    let s = i / c.channels_per_sample.max(1);
    let seed = c.seed_for(PropId::P2, s);
    let d = c.dim_for(s);
    let rho = random_density(d, d, seed)?;
    let measure = MEASURES[s % 2];
    let eps = c.epsilon_for(s / 2);
    let ch = Sampler::new(splitmix(seed ^ i as u64)).incoherent_channel(d, 2);
    let out = apply_kraus(&ch, &rho)?;
    let mut w = base_witness(&rho, eps, measure, seed);
    w["channel"] = serde_json::to_value(ch.to_file())?;
    let ball = BallSpec::trace(eps)?;
    let before = est!(min_side(&rho, &ball, measure, c)?, w);
    let after = est!(min_side(&out, &ball, measure, c)?, w);
    Ok(judge(after, before, c.tol_oracle, w))
}

fn p4(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::P4, i);
    let mut s = Sampler::new(seed);
    let k = 2 + i % 2;
    let states: Vec<DensityMatrix> = (0..k).map(|_| s.density(2, 2)).collect::<Result<_>>()?;
    let weights = s.weights(k);
    let mix = DensityMatrix::mixture(&weights, &states)?;
    let measure = MEASURES[i % 2];
    let eps = c.epsilon_for(i / 2);
    let ball = BallSpec::trace(eps)?;
    let w = json!({
        "seed": seed,
        "weights": weights,
        "states": states.iter().map(|r| matrix_to_rows(r.matrix())).collect::<Vec<_>>(),
        "epsilon": eps,
        "measure": measure.tag(),
    });
    let lhs = est!(min_side(&mix, &ball, measure, c)?, w);
    let mut rhs = Side::exact(0.0);
    for (r, &l) in states.iter().zip(&weights) {
        rhs = rhs.add(est!(min_side(r, &ball, measure, c)?, w).scale(l));
    }
    Ok(judge(lhs, rhs, c.tol_oracle, w))
}

fn p5(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::P5, i);
    let rho = random_density(2, 2, seed)?;
    let delta = random_incoherent(2, splitmix(seed));
    let moved = mixing_channel(&rho, &delta, c.continuity_p)?;
    let measure = MEASURES[i % 2];
    let eps = c.epsilon_for(i / 2);
    let ball = BallSpec::trace(eps)?;
    let eta = trace_distance(&rho, &moved)?;
    let mut w = base_witness(&rho, eps, measure, seed);
    w["rho_prime"] = json!(matrix_to_rows(moved.matrix()));
    w["eta"] = json!(eta);
    let a = est!(min_side(&rho, &ball, measure, c)?, w);
    let b = est!(min_side(&moved, &ball, measure, c)?, w);
    let (ca, cb) = (measure_value(&rho, measure)?, measure_value(&moved, measure)?);
    let m = Side::new(
        (ca - b.hi).max(cb - a.hi),
        (ca - b.lo).max(cb - a.lo),
    );
    let diff = Side::new(
        (b.lo - a.hi).max(a.lo - b.hi).max(0.0),
        (b.hi - a.lo).max(a.hi - b.lo),
    );
    Ok(judge(diff, m.scale(eta / (eps + eta)), c.tol_oracle, w))
}

fn p6(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::P6, i);
    let d = c.dim_for(i);
    let rho = random_density(d, d, seed)?;
    let w = base_witness(&rho, 0.0, MeasureKind::TraceDistanceCoherence, seed);
    let cd = c_trace_distance(&rho)?;
    let base = Side::new(cd.value - cd.gap, cd.value);
    let mut out: Option<Outcome> = None;
    for &p in &c.mixing_p {
        let mixed = mixing_channel(&rho, &cd.witness, p)?;
        let mut wp = w.clone();
        wp["p"] = json!(p);
        wp["delta_star"] = json!(cd.witness.probs());
        let lhs = est!(cd_side(&mixed)?, wp);
        let o = judge_eq(lhs, base.scale(1.0 - p), c.tol_equality, wp);
        out = Some(match out {
            Some(prev) => prev.and(o),
            None => o,
        });
    }
    Ok(out.unwrap_or_else(|| Outcome::skipped("no-mixing-parameters", w)))
}

/// Minimum of `C` over the level set `C_D(τ) = t` of the Bloch ball.
///
/// Every catalog measure and `C_D` are invariant under phase rotations, so
/// the level set reduces to the chord `x = 2t, y = 0`, swept in `z`; the
/// lower end subtracts the modulus over one grid step.
fn level_set_min(measure: MeasureKind, target: f64, res: usize) -> Option<Side> {
    if target <= 0.0 {
        return Some(Side::exact(0.0));
    }
    let x = 2.0 * target;
    if x > 1.0 {
        return None;
    }
    let z_max = (1.0 - x * x).max(0.0).sqrt();
    let n = (res * res).max(3);
    let dz = 2.0 * z_max / (n - 1) as f64;
    let (v, w) = (0..n)
        .map(|k| {
            let w = [x, 0.0, -z_max + dz * k as f64];
            (bloch_measure(measure, w).unwrap_or(f64::NAN), w)
        })
        .fold((f64::INFINITY, [0.0; 3]), |acc, c| if c.0 < acc.0 { c } else { acc });
    let lo = (v - local_modulus(measure, w, dz)).max(0.0);
    Some(Side::new(lo, v))
}

fn p7(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::P7, i);
    let d = c.dim_for(i);
    let rho = random_density(d, d, seed)?;
    let measures = [MeasureKind::L1, MeasureKind::RelativeEntropy, MeasureKind::TraceDistanceCoherence];
    let measure = measures[i % 3];
    let eps = c.epsilon_for(i / 3);
    let w = base_witness(&rho, eps, measure, seed);
    let cd = est!(cd_side(&rho)?, w);
    if cd.hi < 1e-12 {
        return Ok(Outcome::skipped("incoherent-state", w));
    }
    if eps > cd.lo {
        return Ok(Outcome::skipped("epsilon-exceeds-cd", w));
    }
    let cmin = est!(min_side(&rho, &BallSpec::trace(eps)?, measure, c)?, w);
    let cr = measure_value(&rho, measure)?;
    let bound = Side::new((1.0 - eps / cd.lo) * cr, (1.0 - eps / cd.hi) * cr);
    let upper = judge(cmin, bound, c.tol_oracle, w.clone());
    if d != 2 {
        return Ok(upper);
    }
    let level = est!(level_set_min(measure, cd.lo - eps, c.oracle_resolution).ok_or("empty-level-set"), w);
    let lower = judge(level, cmin, c.tol_identity, w);
    Ok(upper.and(lower))
}

/// Bloch-vector form `v ↦ A v + b` of a qubit channel.
fn bloch_affine(ch: &KrausChannel) -> ([[f64; 3]; 3], Bloch) {
    let image = |v: Bloch| {
        let tau = DensityMatrix::from_bloch(v).expect("unit Bloch vector");
        DensityMatrix::repair(ch.apply_raw(tau.matrix()))
            .expect("channel output")
            .bloch_vector()
            .expect("qubit")
    };
    let b = image([0.0; 3]);
    let mut a = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let col = image(e);
        for r in 0..3 {
            a[r][k] = col[r] - b[r];
        }
    }
    (a, b)
}

fn p8(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::P8, i);
    let rho = random_density(2, 2, seed)?;
    let measure = MEASURES[i % 2];
    let eps = c.epsilon_for(i / 2);
    let ch = Sampler::new(splitmix(seed)).incoherent_channel(2, 2);
    let mut w = base_witness(&rho, eps, measure, seed);
    w["channel"] = serde_json::to_value(ch.to_file())?;
    let v = rho.bloch_vector().expect("qubit");
    let r2 = (2.0 * eps).powi(2);
    let grid = Grid::around(v, 2.0 * eps, c.oracle_resolution);
    let member = |u: Bloch| {
        u[0] * u[0] + u[1] * u[1] + u[2] * u[2] <= 1.0 && (0..3).map(|a| (u[a] - v[a]).powi(2)).sum::<f64>() <= r2
    };
    let (a, b) = bloch_affine(&ch);
    let image = sweep(&grid, member, |u| {
        let out: Bloch = std::array::from_fn(|r| b[r] + (0..3).map(|k| a[r][k] * u[k]).sum::<f64>());
        bloch_measure(measure, out).unwrap_or(f64::NAN)
    });
    let ball = sweep(&grid, member, |u| bloch_measure(measure, u).unwrap_or(f64::NAN));
    if ball.count == 0 {
        return Ok(Outcome::skipped("empty-grid", w));
    }
    w["image_max"] = json!(image.max);
    w["ball_max"] = json!(ball.max);
    Ok(judge(Side::exact(image.max), Side::exact(ball.max), c.tol_oracle, w))
}

/// P9 and P10 share their instances.
fn oneshot_pair(c: &Campaign, i: usize, families: &BTreeMap<usize, OperationFamily>) -> Result<(Outcome, Outcome)> {
    let seed = c.seed_for(PropId::P9, i);
    let d = c.dim_for(i);
    let rho = random_density(d, d, seed)?;
    let measure = [MeasureKind::RelativeEntropy, MeasureKind::L1][(i / c.dims.len()) % 2];
    let family = &families[&d];
    let config = c.solver();
    let tol = 2.0 * (c.gap_tol + c.tol_oracle / 2.0);
    bound_consistency_outcomes(&rho, &BallSpec::trace(c.oneshot_epsilon)?, family, measure, &config, tol)
}

fn id_cd(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::IdCd, i);
    let pure = i % 10 == 9;
    let rho = if pure { random_pure(2, seed).density() } else { random_density(2, 2, seed)? };
    let cd = c_trace_distance(&rho)?.value;
    let via_distance = distance_based_measure(&rho, DistanceKind::Trace)?.value;
    let frac = [0.25, 0.5, 0.75][i % 3];
    let eps = frac * cd;
    let mut w = base_witness(&rho, eps, MeasureKind::TraceDistanceCoherence, seed);
    if cd < 1e-9 {
        return Ok(Outcome::skipped("incoherent-state", w));
    }
    let m = est!(min_side(&rho, &BallSpec::trace(eps)?, MeasureKind::TraceDistanceCoherence, c)?, w);
    let mut o = judge_eq(Side::exact(cd), m.add(Side::exact(eps)), c.tol_identity, w.clone());
    o = o.and(judge_eq(Side::exact(via_distance), Side::exact(cd), c.tol_closed_form, w.clone()));
    if pure {
        // pure qubits: C_g = (1 − sqrt(1 − 4 C_D²)) / 2
        let psi = random_pure(2, seed);
        let g = c_geometric_pure(&psi);
        let expected = (1.0 - (1.0 - 4.0 * cd * cd).max(0.0).sqrt()) / 2.0;
        w["geometric"] = json!(g);
        o = o.and(judge_eq(Side::exact(g), Side::exact(expected), 1e-8, w));
    }
    Ok(o)
}

fn cre(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::CreBound, i);
    let d = c.dim_for(i);
    let deficient = i % 10 == 9;
    let rho = random_density(d, if deficient { d - 1 } else { d }, seed)?;
    let eps = c.epsilon_for(i / c.dims.len());
    let w = base_witness(&rho, eps, MeasureKind::RelativeEntropy, seed);
    let cr = c_rel_ent(&rho);
    // C_r(ρ) = S(Δ(ρ)) − S(ρ)
    let split = shannon_entropy(dephase(&rho).probs()) - von_neumann_entropy(&rho);
    if (split - cr).abs() > c.tol_closed_form.max(1e-9) {
        return Ok(Outcome {
            verdict: Verdict::Violation,
            slack: Some((split - cr).abs()),
            witness: w,
        });
    }
    if rho.eigenvalues().iter().any(|&x| x < 1e-12) {
        return Ok(Outcome::skipped("rank-deficient-support", w));
    }
    if eps > cr {
        return Ok(Outcome::skipped("epsilon-exceeds-cr", w));
    }
    let r = smooth_min_relent_ball(&rho, eps, &c.solver())?;
    if r.flags.iter().any(|f| f == "oracle-disagreement") {
        return Ok(Outcome::skipped("oracle-disagreement", w));
    }
    Ok(judge(Side::min_result(&r), Side::exact(cr - eps), c.tol_oracle, w))
}

fn wsm(c: &Campaign, i: usize) -> Result<Outcome> {
    let seed = c.seed_for(PropId::Wsm, i);
    let d = c.dim_for(i);
    let rho = random_density(d, d, seed)?;
    let eps = c.epsilon_for(i / c.dims.len());
    let ch = Sampler::new(splitmix(seed)).incoherent_channel(d, 2);
    let mut w = base_witness(&rho, eps, MeasureKind::RelativeEntropy, seed);
    w["channel"] = serde_json::to_value(ch.to_file())?;
    let config = c.solver();
    let whole = smooth_min_relent_ball(&rho, eps, &config)?;
    if whole.flags.iter().any(|f| f == "oracle-disagreement") {
        return Ok(Outcome::skipped("oracle-disagreement", w));
    }
    let tau = &whole.witness;
    let on_rho = selective_apply(&ch, &rho)?;
    let on_tau = selective_apply(&ch, tau)?;
    let mut lhs = Side::exact(0.0);
    for b in &on_rho.branches {
        let Some(t) = on_tau.branches.iter().find(|t| t.index == b.index) else {
            return Ok(Outcome::skipped("branch-support", w));
        };
        if relative_entropy(&b.state, &t.state)? > eps + 1e-8 {
            return Ok(Outcome::skipped("branch-infeasible", w));
        }
        let r = smooth_min_relent_ball(&b.state, eps, &SolverConfig { oracle: false, ..config.clone() })?;
        let upper = r.upper().min(c_rel_ent(&t.state));
        lhs = lhs.add(Side::new(r.lower().min(upper), upper).scale(t.prob));
    }
    // branches of τ missing from ρ carry C_r(τ_k) ≥ 0 and only help the bound
    Ok(judge(lhs, Side::min_result(&whole), c.tol_oracle, w))
}

fn run_instances(n: usize, f: impl Fn(usize) -> Result<Outcome> + Sync + Send) -> Result<Vec<Outcome>> {
    (0..n).into_par_iter().map(f).collect()
}

fn families(c: &Campaign) -> Result<BTreeMap<usize, OperationFamily>> {
    let mut out = BTreeMap::new();
    for &d in &c.dims {
        let f = OperationFamily::new(d, &c.family)?;
        if !f.all_incoherent() {
            return Err(Error::Infeasible(format!("family on d = {d} has a coherence-generating member")));
        }
        out.insert(d, f);
    }
    Ok(out)
}

fn oneshot_reports(c: &Campaign, which: &[PropId]) -> Result<Vec<PropReport>> {
    let n = which.iter().map(|&p| c.samples_for(p)).max().unwrap_or(0);
    let fams = families(c)?;
    let pairs: Vec<(Outcome, Outcome)> = (0..n).into_par_iter().map(|i| oneshot_pair(c, i, &fams)).collect::<Result<_>>()?;
    let tol = 2.0 * (c.gap_tol + c.tol_oracle / 2.0);
    let mut out = Vec::new();
    for &p in which {
        let k = c.samples_for(p);
        let outcomes = pairs
            .iter()
            .take(k)
            .map(|(a, b)| if p == PropId::P9 { a.clone() } else { b.clone() })
            .collect();
        let mut cfg = c.report_config(p, tol);
        cfg["epsilon"] = json!(c.oneshot_epsilon);
        cfg["family"] = serde_json::to_value(&c.family)?;
        out.push(PropReport::from_outcomes(p, outcomes, tol, cfg));
    }
    Ok(out)
}

/// Runs one proposition campaign.
pub fn check_prop(p: PropId, c: &Campaign) -> Result<PropReport> {
    touch("check_prop");
    c.validate()?;
    let n = c.samples_for(p);
    let (outcomes, tol) = match p {
        PropId::P1 => (run_instances(n, |i| p1(c, i))?, c.tol_ordering),
        PropId::P2 => (run_instances(n * c.channels_per_sample.max(1), |i| p2(c, i))?, c.tol_oracle),
        PropId::P3 => {
            let spec = CounterexampleSpec::with_eta(c.prop3_eta, c.prop3_epsilon)?;
            let mut r = check_prop3(&spec, &c.solver())?;
            r.config["seed"] = json!(c.seed);
            return Ok(r);
        }
        PropId::P4 => (run_instances(n, |i| p4(c, i))?, c.tol_oracle),
        PropId::P5 => (run_instances(n, |i| p5(c, i))?, c.tol_oracle),
        PropId::P6 => (run_instances(n, |i| p6(c, i))?, c.tol_equality),
        PropId::P7 => (run_instances(n, |i| p7(c, i))?, c.tol_oracle),
        PropId::P8 => (run_instances(n, |i| p8(c, i))?, c.tol_oracle),
        PropId::P9 | PropId::P10 => return Ok(oneshot_reports(c, &[p])?.remove(0)),
        PropId::IdCd => return check_cd_identity(c),
        PropId::Wsm => (run_instances(n, |i| wsm(c, i))?, c.tol_oracle),
        PropId::CreBound => return check_cre_bound(c),
    };
    Ok(PropReport::from_outcomes(p, outcomes, tol, c.report_config(p, tol)))
}

/// `C_D(ρ) = C_{ε,min}(ρ) + ε` on qubits with the trace-distance measure.
pub fn check_cd_identity(c: &Campaign) -> Result<PropReport> {
    touch("check_cd_identity");
    c.validate()?;
    let outcomes = run_instances(c.samples_for(PropId::IdCd), |i| id_cd(c, i))?;
    Ok(PropReport::from_outcomes(
        PropId::IdCd,
        outcomes,
        c.tol_identity,
        c.report_config(PropId::IdCd, c.tol_identity),
    ))
}

/// `C_{r,ε}(ρ) ≤ C_r(ρ) − ε` on full-rank samples.
pub fn check_cre_bound(c: &Campaign) -> Result<PropReport> {
    touch("check_cre_bound");
    c.validate()?;
    let outcomes = run_instances(c.samples_for(PropId::CreBound), |i| cre(c, i))?;
    Ok(PropReport::from_outcomes(
        PropId::CreBound,
        outcomes,
        c.tol_oracle,
        c.report_config(PropId::CreBound, c.tol_oracle),
    ))
}

/// Runs the selected campaigns in `PropId` order; P9 and P10 share instances.
pub fn run_campaign(c: &Campaign, props: &[PropId]) -> Result<Vec<PropReport>> {
    c.validate()?;
    let mut wanted: Vec<PropId> = props.to_vec();
    wanted.sort();
    wanted.dedup();
    let shot: Vec<PropId> = wanted.iter().copied().filter(|p| matches!(p, PropId::P9 | PropId::P10)).collect();
    let mut shot_reports = if shot.is_empty() { Vec::new() } else { oneshot_reports(c, &shot)? };
    touch("check_prop");
    let mut out = Vec::new();
    for p in wanted {
        if matches!(p, PropId::P9 | PropId::P10) {
            out.push(shot_reports.remove(0));
        } else {
            out.push(check_prop(p, c)?);
        }
    }
    Ok(out)
}

/// Closed-form `C_r` against direct minimization of `S(ρ‖δ)` over the
/// simplex; returns the absolute difference.
pub fn rel_ent_cross_check(rho: &DensityMatrix) -> Result<f64> {
    let closed = c_rel_ent(rho);
    let d = rho.dim();
    let mut p: Vec<f64> = dephase(rho).probs().to_vec();
    // exponentiated-gradient descent on the simplex, started off-optimum
    for (i, x) in p.iter_mut().enumerate() {
        *x = 0.5 * *x + 0.5 / d as f64 + 1e-3 * i as f64;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let f = |q: &[f64]| -> Result<f64> {
        let delta = DensityMatrix::from_incoherent(&IncoherentState::new(q.to_vec())?);
        relative_entropy(rho, &delta)
    };
    let diag: Vec<f64> = (0..d).map(|i| rho.get(i, i).re).collect();
    for _ in 0..200 {
        let grad: Vec<f64> = diag.iter().zip(&p).map(|(r, q)| -r / (q * std::f64::consts::LN_2)).collect();
        let mut next: Vec<f64> = p.iter().zip(&grad).map(|(q, g)| q * (-0.5 * g).exp()).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        p = next;
    }
    let direct = f(&p)?;
    Ok((closed - direct).abs())
}
