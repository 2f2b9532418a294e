//! Minimum and maximum of a coherence measure over an ε-ball of states.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::coverage::touch;
use crate::channel::KrausChannel;
use crate::ellipsoid::{self, Problem, Query};
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix, Eigen, TracelessBasis, C64, ZERO};
use crate::measures::{c_rel_ent, c_trace_distance, l1_raw, measure_value, rel_ent_raw, sign, MeasureKind};
use crate::metrics::{dephase, relative_entropy_raw, tensor, trace_distance_raw, DistanceKind, SUPPORT_CUTOFF};
use crate::oracle::{qubit_bloch_oracle, OracleResult};
use crate::state::{matrix_to_rows, DensityMatrix, PureState, Sampler};

/// Witnesses must satisfy ball membership within this slack.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Allowed solver-versus-oracle disagreement on top of the grid error.
pub const ORACLE_AGREEMENT: f64 = 2e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub distance: DistanceKind,
    pub epsilon: f64,
}

impl BallSpec {
    pub fn new(distance: DistanceKind, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
            });
        }
        Ok(Self { distance, epsilon })
    }

    pub fn trace(epsilon: f64) -> Result<Self> {
        Self::new(DistanceKind::Trace, epsilon)
    }

    pub fn relent(epsilon: f64) -> Result<Self> {
        Self::new(DistanceKind::RelativeEntropy, epsilon)
    }

    /// `D(center, tau)` with the center first.
    pub fn distance_from(&self, center: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
        self.distance.eval(center, tau)
    }

    pub fn contains(&self, center: &DensityMatrix, tau: &DensityMatrix) -> Result<bool> {
        Ok(self.distance_from(center, tau)? <= self.epsilon + MEMBERSHIP_TOL)
    }

    fn raw_distance(&self, center: &CMatrix, tau: &CMatrix) -> f64 {
        match self.distance {
            DistanceKind::Trace => trace_distance_raw(center, tau),
            DistanceKind::RelativeEntropy => relative_entropy_raw(center, tau),
        }
    }

    /// Frobenius radius around the center that contains the ball.
    fn frobenius_radius(&self) -> f64 {
        let r = match self.distance {
            DistanceKind::Trace => 2.0 * self.epsilon,
            DistanceKind::RelativeEntropy => 2.0 * (self.epsilon * std::f64::consts::LN_2 / 2.0).sqrt(),
        };
        r.min(std::f64::consts::SQRT_2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    OracleExact,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Stop the minimizer once the certified gap drops below this.
    pub gap_tol: f64,
    /// Overrides the dimension-based iteration budget.
    pub max_iter: Option<usize>,
    /// Random pure-state probes for the maximizer.
    pub probes: usize,
    /// Probes refined by successive linearization.
    pub ascent_starts: usize,
    /// Linearization steps per start.
    pub ascent_iters: usize,
    pub seed: u64,
    /// Cross-check qubit instances against the Bloch grid.
    pub oracle: bool,
    pub oracle_resolution: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            max_iter: None,
            probes: 8,
            ascent_starts: 4,
            ascent_iters: 20,
            seed: 0,
            oracle: false,
            oracle_resolution: crate::oracle::DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothResult {
    pub mode: Mode,
    pub value: f64,
    pub ball: BallSpec,
    pub measure: MeasureKind,
    pub certification: Certification,
    /// For `min`, `value − gap_estimate` is a lower bound on the optimum;
    /// for `max`, `value + gap_estimate` is an upper bound.
    pub gap_estimate: f64,
    pub witness: DensityMatrix,
    pub flags: Vec<String>,
}

impl SmoothResult {
    /// Certified lower bound on the exact optimum.
    pub fn lower(&self) -> f64 {
        match self.mode {
            Mode::Min => self.value - self.gap_estimate,
            Mode::Max => self.value,
        }
    }

    /// Certified upper bound on the exact optimum.
    pub fn upper(&self) -> f64 {
        match self.mode {
            Mode::Min => self.value,
            Mode::Max => self.value + self.gap_estimate,
        }
    }
}

impl Serialize for SmoothResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SmoothResult", 9)?;
        st.serialize_field("mode", &self.mode)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("epsilon", &self.ball.epsilon)?;
        st.serialize_field("distance", &self.ball.distance)?;
        st.serialize_field("measure", &self.measure)?;
        st.serialize_field("certification", &self.certification)?;
        st.serialize_field("gap_estimate", &self.gap_estimate)?;
        st.serialize_field("witness", &matrix_to_rows(self.witness.matrix()))?;
        st.serialize_field("flags", &self.flags)?;
        st.end()
    }
}

fn check_measure(measure: MeasureKind) -> Result<()> {
    if measure == MeasureKind::GeometricPure {
        return Err(Error::Unsupported(
            "smoothing needs a measure defined on mixed states".into(),
        ));
    }
    Ok(())
}

fn exact(mode: Mode, rho: &DensityMatrix, ball: BallSpec, measure: MeasureKind, value: f64, gap: f64) -> SmoothResult {
    SmoothResult {
        mode,
        value,
        ball,
        measure,
        certification: Certification::Heuristic,
        gap_estimate: gap,
        witness: rho.clone(),
        flags: Vec::new(),
    }
}

/// Measure value on a raw state matrix.
fn value_raw(measure: MeasureKind, m: &CMatrix) -> f64 {
    match measure {
        MeasureKind::L1 => l1_raw(m),
        MeasureKind::RelativeEntropy => rel_ent_raw(m),
        MeasureKind::TraceDistanceCoherence => {
            if m.rows() == 2 {
                m[(0, 1)].norm()
            } else {
                c_trace_distance(&DensityMatrix::from_trusted(m.clone()))
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN)
            }
        }
        MeasureKind::GeometricPure => f64::NAN,
    }
}

fn l1_gradient(m: &CMatrix) -> CMatrix {
    let d = m.rows();
    CMatrix::from_fn(d, d, |i, j| {
        let z = m[(i, j)];
        let a = z.norm();
        if i == j || a == 0.0 {
            ZERO
        } else {
            z / a
        }
    })
}

/// `log₂ τ − diag(log₂ τ_ii)`, with eigenvalues clipped away from zero.
fn rel_ent_gradient(m: &CMatrix, e: &Eigen) -> CMatrix {
    let mut g = e.map(|x| x.max(1e-15).log2());
    for i in 0..m.rows() {
        g[(i, i)] -= m[(i, i)].re.max(1e-15).log2();
    }
    g
}

/// Derivative of `τ ↦ S(ρ || τ)`; `None` when the support condition fails,
/// together with the offending eigenvector.
fn relent_with_gradient(rho: &CMatrix, rho_neg_entropy: f64, e: &Eigen) -> std::result::Result<(f64, CMatrix), usize> {
    let d = rho.rows();
    let u = &e.vectors;
    let r = &(&u.adjoint() * rho) * u;
    let mut cross = 0.0;
    for k in 0..d {
        let w = r[(k, k)].re;
        let lam = e.values[k];
        if lam < SUPPORT_CUTOFF {
            if w > SUPPORT_CUTOFF {
                return Err(k);
            }
            continue;
        }
        cross += w * lam.log2();
    }
    let lnv: Vec<f64> = e.values.iter().map(|&x| x.max(SUPPORT_CUTOFF).ln()).collect();
    let lam: Vec<f64> = e.values.iter().map(|&x| x.max(SUPPORT_CUTOFF)).collect();
    let gp = CMatrix::from_fn(d, d, |i, j| {
        let l = if (lam[i] - lam[j]).abs() > 1e-12 * lam[i].max(lam[j]) {
            (lnv[i] - lnv[j]) / (lam[i] - lam[j])
        } else {
            1.0 / lam[i]
        };
        r[(i, j)] * l
    });
    let g = (&(u * &gp) * &u.adjoint()).scale(-1.0 / std::f64::consts::LN_2);
    Ok(((rho_neg_entropy - cross).max(0.0), g))
}

struct MinProblem<'a> {
    rho: &'a CMatrix,
    rho_neg_entropy: f64,
    basis: TracelessBasis,
    ball: BallSpec,
    measure: MeasureKind,
    /// `C_D` in dimension ≥ 3 optimizes jointly over `(τ, δ)`.
    joint: bool,
    /// Replaces the measure by the linear objective `−⟨c, x⟩`.
    linear: Option<Vec<f64>>,
    /// Replaces the measure by `½‖Λ(τ) − target‖₁`.
    image: Option<(&'a KrausChannel, &'a CMatrix)>,
}

impl MinProblem<'_> {
    fn n_tau(&self) -> usize {
        self.basis.dim()
    }

    fn pad(&self, g: Vec<f64>) -> Vec<f64> {
        let mut g = g;
        if self.joint {
            g.resize(self.n_tau() + self.rho.rows() - 1, 0.0);
        }
        g
    }

    fn delta(&self, x: &[f64]) -> Vec<f64> {
        let mut p = x[self.n_tau()..].to_vec();
        p.push(1.0 - p.iter().sum::<f64>());
        p
    }
}

impl Problem for MinProblem<'_> {
    fn query(&self, x: &[f64]) -> Query {
        let d = self.rho.rows();
        let nt = self.n_tau();
        if self.joint {
            let xs = &x[nt..];
            let mut worst = (0usize, 0.0);
            for (i, &v) in xs.iter().enumerate() {
                if -v > worst.1 {
                    worst = (i, -v);
                }
            }
            let excess = xs.iter().sum::<f64>() - 1.0;
            let mut g = vec![0.0; x.len()];
            if excess > worst.1 {
                for gi in &mut g[nt..] {
                    *gi = 1.0;
                }
                return Query::Infeasible { g, violation: excess };
            }
            if worst.1 > 0.0 {
                g[nt + worst.0] = -1.0;
                return Query::Infeasible { g, violation: worst.1 };
            }
        }
        let tau = self.basis.matrix(&x[..nt]);
        let e = eigh(&tau);
        let lmin = e.min_value();
        if lmin < 0.0 {
            let v = e.vector(d - 1);
            let g = self.basis.coords(&CMatrix::outer(&v)).iter().map(|a| -a).collect();
            return Query::Infeasible {
                g: self.pad(g),
                violation: -lmin,
            };
        }
        match self.ball.distance {
            DistanceKind::Trace => {
                let diff = &tau - self.rho;
                let ed = eigh(&diff);
                let dist = ed.values.iter().map(|v| v.abs()).sum::<f64>() / 2.0;
                if dist > self.ball.epsilon {
                    let g = self.basis.coords(&ed.map(sign).scale(0.5));
                    return Query::Infeasible {
                        g: self.pad(g),
                        violation: dist - self.ball.epsilon,
                    };
                }
            }
            DistanceKind::RelativeEntropy => match relent_with_gradient(self.rho, self.rho_neg_entropy, &e) {
                Err(k) => {
                    let v = e.vector(k);
                    let g = self.basis.coords(&CMatrix::outer(&v)).iter().map(|a| -a).collect();
                    return Query::Infeasible {
                        g: self.pad(g),
                        violation: 0.0,
                    };
                }
                Ok((s, grad)) => {
                    if s > self.ball.epsilon {
                        return Query::Infeasible {
                            g: self.pad(self.basis.coords(&grad)),
                            violation: s - self.ball.epsilon,
                        };
                    }
                }
            },
        }
        if let Some((ch, target)) = self.image {
            let diff = &ch.apply_raw(&tau) - target;
            let ed = eigh(&diff);
            let f = ed.values.iter().map(|v| v.abs()).sum::<f64>() / 2.0;
            let g = ch.apply_adjoint_raw(&ed.map(sign).scale(0.5));
            return Query::Feasible {
                f,
                g: self.basis.coords(&g),
            };
        }
        if let Some(c) = &self.linear {
            return Query::Feasible {
                f: -c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
                g: c.iter().map(|a| -a).collect(),
            };
        }
        match self.measure {
            MeasureKind::L1 => Query::Feasible {
                f: l1_raw(&tau),
                g: self.basis.coords(&l1_gradient(&tau)),
            },
            MeasureKind::RelativeEntropy => Query::Feasible {
                f: rel_ent_raw(&tau),
                g: self.basis.coords(&rel_ent_gradient(&tau, &e)),
            },
            MeasureKind::TraceDistanceCoherence if !self.joint => Query::Feasible {
                f: tau[(0, 1)].norm(),
                g: self.basis.coords(&l1_gradient(&tau).scale(0.5)),
            },
            _ => {
                let delta = self.delta(x);
                let mut diff = tau.clone();
                for (i, p) in delta.iter().enumerate() {
                    diff[(i, i)] -= p;
                }
                let ed = eigh(&diff);
                let f = ed.values.iter().map(|v| v.abs()).sum::<f64>() / 2.0;
                let s = ed.map(sign).scale(0.5);
                let mut g = self.basis.coords(&s);
                for i in 0..d - 1 {
                    g.push(s[(d - 1, d - 1)].re - s[(i, i)].re);
                }
                Query::Feasible { f, g }
            }
        }
    }
}

fn neg_entropy(m: &CMatrix) -> f64 {
    eigh(m)
        .values
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum()
}

/// `C_{ε,min}(ρ) = min_{τ ∈ B_ε(ρ)} C(τ)`.
///
/// The value is always attained by the returned witness, so it is an upper
/// bound on the optimum; `value − gap_estimate` is a certified lower bound
/// from the ellipsoid method.
pub fn smooth_min(rho: &DensityMatrix, ball: &BallSpec, measure: MeasureKind, config: &SolverConfig) -> Result<SmoothResult> {
    touch("smooth_min");
    check_measure(measure)?;
    let ball = BallSpec::new(ball.distance, ball.epsilon)?;
    let d = rho.dim();
    let c_rho = measure_value(rho, measure)?;
    let mut flags = Vec::new();
    if ball.distance == DistanceKind::RelativeEntropy {
        let cr = c_rel_ent(rho);
        if ball.epsilon > cr {
            flags.push("epsilon-exceeds-cr".to_string());
        }
        if rho.eigenvalues().iter().any(|&x| x < SUPPORT_CUTOFF) {
            flags.push("rank-deficient-center".to_string());
        }
    }
    if ball.epsilon == 0.0 || d == 1 {
        let gap = if measure == MeasureKind::TraceDistanceCoherence {
            c_trace_distance(rho)?.gap
        } else {
            0.0
        };
        let mut r = exact(Mode::Min, rho, ball, measure, c_rho, gap);
        r.flags = flags;
        return Ok(r);
    }
    // an incoherent state inside the ball forces the minimum to zero
    let incoherent_inside = match ball.distance {
        DistanceKind::Trace => {
            let cd = c_trace_distance(rho)?;
            (cd.value <= ball.epsilon).then(|| cd.witness)
        }
        DistanceKind::RelativeEntropy => (c_rel_ent(rho) <= ball.epsilon).then(|| dephase(rho)),
    };
    if let Some(delta) = incoherent_inside {
        flags.push("incoherent-state-in-ball".to_string());
        let mut r = exact(Mode::Min, rho, ball, measure, 0.0, 0.0);
        r.witness = delta.to_density();
        r.flags = flags;
        return finish_min(rho, r, config);
    }

    let basis = TracelessBasis::new(d);
    let joint = measure == MeasureKind::TraceDistanceCoherence && d >= 3;
    let problem = MinProblem {
        rho: rho.matrix(),
        rho_neg_entropy: neg_entropy(rho.matrix()),
        basis,
        ball,
        measure,
        joint,
        linear: None,
        image: None,
    };
    let mut center = problem.basis.coords(rho.matrix());
    let mut radius = ball.frobenius_radius();
    if joint {
        let cd = c_trace_distance(rho)?;
        center.extend_from_slice(&cd.witness.probs()[..d - 1]);
        radius = (radius * radius + 1.0).sqrt();
    }
    let n = center.len();
    let mut settings = ellipsoid::Settings::for_dim(n, config.gap_tol);
    if let Some(m) = config.max_iter {
        settings.max_iter = m;
    }
    let out = ellipsoid::minimize(&problem, center, radius, &settings);
    let (value, witness) = match &out.x_best {
        Some(x) if out.f_best < c_rho => {
            let tau = problem.basis.matrix(&x[..problem.n_tau()]);
            (out.f_best, DensityMatrix::new(tau)?)
        }
        _ => (c_rho, rho.clone()),
    };
    // the joint objective upper-bounds C_D(τ); report the measure itself
    let value = if joint { value_raw(measure, witness.matrix()).min(value) } else { value };
    let gap = (value - out.lower_bound).max(0.0);
    if !gap.is_finite() {
        return Err(Error::NoConvergence { best: value, residual: gap });
    }
    let r = SmoothResult {
        mode: Mode::Min,
        value,
        ball,
        measure,
        certification: Certification::Heuristic,
        gap_estimate: gap,
        witness,
        flags,
    };
    finish_min(rho, r, config)
}

fn oracle_for(rho: &DensityMatrix, r: &SmoothResult, config: &SolverConfig) -> Result<Option<OracleResult>> {
    if !config.oracle || rho.dim() != 2 {
        return Ok(None);
    }
    qubit_bloch_oracle(rho, &r.ball, r.measure, config.oracle_resolution).map(Some)
}

fn finish_min(rho: &DensityMatrix, mut r: SmoothResult, config: &SolverConfig) -> Result<SmoothResult> {
    if let Some(o) = oracle_for(rho, &r, config)? {
        if o.min < r.value {
            r.value = o.min;
            r.witness = DensityMatrix::from_bloch(o.min_witness)?;
            r.flags.push("oracle-improved".to_string());
        }
        let lower = o.min - o.min_error;
        if (r.value - o.min).abs() <= ORACLE_AGREEMENT + o.min_error {
            r.certification = Certification::OracleExact;
            r.gap_estimate = r.gap_estimate.min((r.value - lower).max(0.0));
        } else {
            r.flags.push("oracle-disagreement".to_string());
        }
    }
    if r.ball.distance == DistanceKind::RelativeEntropy && r.ball.epsilon > c_rel_ent(&r.witness) {
        r.flags.push("epsilon-exceeds-cr-witness".to_string());
    }
    Ok(r)
}

/// Relative-entropy ball variant: `min C_r(τ)` over `S(ρ || τ) ≤ ε`.
pub fn smooth_min_relent_ball(rho: &DensityMatrix, epsilon: f64, config: &SolverConfig) -> Result<SmoothResult> {
    touch("smooth_min_relent_ball");
    smooth_min(rho, &BallSpec::relent(epsilon)?, MeasureKind::RelativeEntropy, config)
}

/// Largest `λ ∈ [0, 1]` with `ρ + λ(σ − ρ)` in the ball, and that point.
fn retract(rho: &CMatrix, sigma: &CMatrix, ball: &BallSpec) -> CMatrix {
    let along = |lam: f64| rho.lin_comb(1.0 - lam, sigma, lam);
    let inside = |m: &CMatrix| ball.raw_distance(rho, m) <= ball.epsilon;
    if inside(sigma) {
        return sigma.clone();
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    if ball.distance == DistanceKind::Trace {
        // distance is linear along the segment
        let full = trace_distance_raw(rho, sigma);
        let mut lam = ball.epsilon / full;
        for _ in 0..8 {
            if inside(&along(lam)) {
                return along(lam);
            }
            lam *= 1.0 - 1e-12;
        }
        hi = lam;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(&along(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    along(lo)
}

fn ascent_direction(measure: MeasureKind, m: &CMatrix) -> CMatrix {
    match measure {
        MeasureKind::L1 => l1_gradient(m),
        MeasureKind::RelativeEntropy => rel_ent_gradient(m, &eigh(m)),
        _ => {
            if m.rows() == 2 {
                return l1_gradient(m).scale(0.5);
            }
            let rho = DensityMatrix::from_trusted(m.clone());
            match c_trace_distance(&rho) {
                Ok(cd) => {
                    let mut diff = m.clone();
                    for (i, p) in cd.witness.probs().iter().enumerate() {
                        diff[(i, i)] -= p;
                    }
                    eigh(&diff).map(sign).scale(0.5)
                }
                Err(_) => CMatrix::zeros(m.rows(), m.rows()),
            }
        }
    }
}

fn traceless(m: &CMatrix) -> CMatrix {
    let d = m.rows();
    let t = m.trace().re / d as f64;
    m.lin_comb(1.0, &CMatrix::identity(d), -t)
}

fn aligned_max_coherent(rho: &DensityMatrix) -> Vec<C64> {
    let d = rho.dim();
    let a = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|j| {
            let z = rho.get(j, 0);
            if j == 0 || z.norm() < 1e-14 {
                C64::new(a, 0.0)
            } else {
                z / z.norm() * a
            }
        })
        .collect()
}

fn top_eigvec(m: &CMatrix) -> Vec<C64> {
    eigh(&m.hermitize()).vector(0)
}

/// Pure states on the great circle from `psi` towards `phi`.
fn geodesic(psi: &[C64], phi: &[C64], t: f64) -> Option<Vec<C64>> {
    let overlap: C64 = psi.iter().zip(phi).map(|(a, b)| a.conj() * b).sum();
    let perp: Vec<C64> = phi.iter().zip(psi).map(|(b, a)| b - a * overlap).collect();
    let n = perp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n < 1e-12 {
        return None;
    }
    Some(psi.iter().zip(&perp).map(|(a, p)| a * t.cos() + p / n * t.sin()).collect())
}

/// `C_{ε,max}(ρ) = max_{τ ∈ B_ε(ρ)} C(τ)`: maximizing a convex function, so
/// the result is the best feasible point found and a lower bound.
pub fn smooth_max(rho: &DensityMatrix, ball: &BallSpec, measure: MeasureKind, config: &SolverConfig) -> Result<SmoothResult> {
    smooth_max_with_candidates(rho, ball, measure, config, &[])
}

/// [`smooth_max`] with extra caller-supplied probes, each retracted into the
/// ball before evaluation.
pub fn smooth_max_with_candidates(
    rho: &DensityMatrix,
    ball: &BallSpec,
    measure: MeasureKind,
    config: &SolverConfig,
    extra: &[DensityMatrix],
) -> Result<SmoothResult> {
    touch("smooth_max");
    check_measure(measure)?;
    let ball = BallSpec::new(ball.distance, ball.epsilon)?;
    let d = rho.dim();
    let c_rho = measure_value(rho, measure)?;
    let upper_trivial = measure.max_value(d);
    if ball.epsilon == 0.0 || d == 1 {
        return Ok(exact(Mode::Max, rho, ball, measure, c_rho, 0.0));
    }
    let center = rho.matrix();
    let mut sampler = Sampler::new(config.seed ^ 0x5eed_5a17);

    let mut probes: Vec<CMatrix> = vec![center.clone()];
    let aligned = aligned_max_coherent(rho);
    probes.push(CMatrix::outer(&aligned));
    probes.push(CMatrix::outer(&PureState::maximally_coherent(d, d)?.amplitudes().to_vec()));
    for _ in 0..4 {
        let v: Vec<C64> = aligned.iter().map(|a| a * sampler.phase()).collect();
        probes.push(CMatrix::outer(&v));
    }
    let top = top_eigvec(center);
    probes.push(CMatrix::outer(&top));
    let grad_top = top_eigvec(&traceless(&ascent_direction(measure, center)));
    probes.push(CMatrix::outer(&grad_top));
    for target in [&aligned, &grad_top] {
        for frac in [0.25, 0.5, 0.75, 1.0] {
            if let Some(v) = geodesic(&top, target, frac * std::f64::consts::FRAC_PI_2) {
                probes.push(CMatrix::outer(&v));
            }
        }
    }
    for _ in 0..config.probes {
        probes.push(CMatrix::outer(sampler.pure(d).amplitudes()));
    }
    for e in extra {
        if e.dim() != d {
            return Err(Error::DimensionMismatch(d, e.dim()));
        }
        probes.push(e.matrix().clone());
    }

    let mut scored: Vec<(f64, CMatrix)> = probes
        .iter()
        .map(|p| {
            let t = retract(center, p, &ball);
            (value_raw(measure, &t), t)
        })
        .filter(|(v, _)| v.is_finite())
        .collect();
    // stable: ties keep probe order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let starts: Vec<(f64, CMatrix)> = scored.iter().take(config.ascent_starts.max(1)).cloned().collect();
    let mut best = scored[0].clone();
    for (v0, t0) in starts {
        let (v, t) = linearize(rho, &ball, measure, (v0, t0), config.ascent_iters, config.gap_tol.max(1e-10));
        if v > best.0 {
            best = (v, t);
        }
    }
    let (value, witness) = if best.0 >= c_rho {
        let w = DensityMatrix::from_trusted(best.1);
        (measure_value(&w, measure)?, w)
    } else {
        (c_rho, rho.clone())
    };
    let radius_tr = match ball.distance {
        DistanceKind::Trace => ball.epsilon,
        DistanceKind::RelativeEntropy => (ball.epsilon * std::f64::consts::LN_2 / 2.0).sqrt(),
    };
    let lipschitz = match measure {
        MeasureKind::L1 => Some((d * (d - 1)) as f64),
        MeasureKind::TraceDistanceCoherence => Some(1.0),
        _ => None,
    };
    let upper = lipschitz.map_or(upper_trivial, |l| upper_trivial.min(c_rho + l * radius_tr));
    let mut r = SmoothResult {
        mode: Mode::Max,
        value,
        ball,
        measure,
        certification: Certification::Heuristic,
        gap_estimate: (upper - value).max(0.0),
        witness,
        flags: Vec::new(),
    };
    if let Some(o) = oracle_for(rho, &r, config)? {
        if o.max > r.value {
            r.value = o.max;
            r.witness = DensityMatrix::from_bloch(o.max_witness)?;
            r.flags.push("oracle-improved".to_string());
        }
        let upper = o.max + o.max_error;
        if (r.value - o.max).abs() <= ORACLE_AGREEMENT + o.max_error {
            r.certification = Certification::OracleExact;
            r.gap_estimate = r.gap_estimate.min((upper - r.value).max(0.0));
        } else {
            r.flags.push("oracle-disagreement".to_string());
        }
    }
    Ok(r)
}

/// Successive linearization: each step maximizes `⟨∇C(τ), ·⟩` over the ball,
/// which never decreases a convex `C`.
fn linearize(
    rho: &DensityMatrix,
    ball: &BallSpec,
    measure: MeasureKind,
    start: (f64, CMatrix),
    steps: usize,
    gap_tol: f64,
) -> (f64, CMatrix) {
    let (mut v, mut t) = start;
    let basis = TracelessBasis::new(rho.dim());
    let center = basis.coords(rho.matrix());
    let mut problem = MinProblem {
        rho: rho.matrix(),
        rho_neg_entropy: neg_entropy(rho.matrix()),
        basis,
        ball: *ball,
        measure,
        joint: false,
        linear: None,
        image: None,
    };
    let settings = ellipsoid::Settings::for_dim(center.len(), gap_tol);
    for _ in 0..steps {
        let c = problem.basis.coords(&traceless(&ascent_direction(measure, &t)));
        let scale = c.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(scale > 0.0) {
            break;
        }
        problem.linear = Some(c.iter().map(|a| a / scale).collect());
        let out = ellipsoid::minimize(&problem, center.clone(), ball.frobenius_radius(), &settings);
        let Some(x) = out.x_best else { break };
        let cand = problem.basis.matrix(&x);
        let cv = value_raw(measure, &cand);
        if cv > v + 1e-12 {
            v = cv;
            t = cand;
        } else {
            break;
        }
    }
    (v, t)
}

/// `min_{τ ∈ B} ½‖Λ(τ) − target‖₁` with a minimizer and a certified lower
/// bound.
pub(crate) fn image_ball_distance(
    rho: &DensityMatrix,
    ball: &BallSpec,
    channel: &KrausChannel,
    target: &CMatrix,
    gap_tol: f64,
) -> (f64, DensityMatrix, f64) {
    let basis = TracelessBasis::new(rho.dim());
    let center = basis.coords(rho.matrix());
    let problem = MinProblem {
        rho: rho.matrix(),
        rho_neg_entropy: neg_entropy(rho.matrix()),
        basis,
        ball: *ball,
        measure: MeasureKind::L1,
        joint: false,
        linear: None,
        image: Some((channel, target)),
    };
    let f_rho = trace_distance_raw(&channel.apply_raw(rho.matrix()), target);
    if ball.epsilon == 0.0 {
        return (f_rho, rho.clone(), f_rho);
    }
    let settings = ellipsoid::Settings::for_dim(center.len(), gap_tol);
    let out = ellipsoid::minimize(&problem, center, ball.frobenius_radius(), &settings);
    match out.x_best {
        Some(x) if out.f_best < f_rho => {
            let tau = DensityMatrix::repair(problem.basis.matrix(&x)).unwrap_or_else(|_| rho.clone());
            (out.f_best, tau, out.lower_bound.min(out.f_best))
        }
        _ => (f_rho, rho.clone(), out.lower_bound.min(f_rho)),
    }
}

/// Both sides of `C_{ε,min}(|0⟩⟨0| ⊗ ρ) = C_{ε,min}(ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorInvarianceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Combined certified gap of both minimizations.
    pub gap: f64,
}

pub fn tensor_invariance_check(
    rho: &DensityMatrix,
    ball: &BallSpec,
    measure: MeasureKind,
    config: &SolverConfig,
) -> Result<TensorInvarianceReport> {
    touch("tensor_invariance_check");
    let lifted = tensor(&DensityMatrix::basis(2, 0), rho);
    let lhs = smooth_min(&lifted, ball, measure, &SolverConfig { oracle: false, ..config.clone() })?;
    let rhs = smooth_min(rho, ball, measure, config)?;
    Ok(TensorInvarianceReport {
        lhs: lhs.value,
        rhs: rhs.value,
        slack: (lhs.value - rhs.value).abs(),
        gap: lhs.gap_estimate + rhs.gap_estimate,
    })
}
