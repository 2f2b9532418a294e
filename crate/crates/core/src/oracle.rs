//! Brute-force qubit certifier over a grid of Bloch vectors.

use rayon::prelude::*;
use serde::Serialize;

use crate::coverage::touch;
use crate::error::{Error, Result};
use crate::measures::MeasureKind;
use crate::metrics::DistanceKind;
use crate::smoothing::BallSpec;
use crate::state::DensityMatrix;

pub const DEFAULT_RESOLUTION: usize = 201;
const REFINE_RESOLUTION: usize = 21;
const REFINE_PASSES: usize = 4;

pub type Bloch = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub min: f64,
    pub max: f64,
    pub min_witness: Bloch,
    pub max_witness: Bloch,
    /// Discretization bound for `min` (true minimum ≥ `min − min_error`).
    pub min_error: f64,
    /// Discretization bound for `max` (true maximum ≤ `max + max_error`).
    pub max_error: f64,
    pub resolution: usize,
    pub points: usize,
}

fn norm(v: Bloch) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dist(a: Bloch, b: Bloch) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

fn h2(p: f64) -> f64 {
    let mut acc = 0.0;
    if p > 0.0 {
        acc -= p * p.log2();
    }
    if p < 1.0 {
        acc -= (1.0 - p) * (1.0 - p).log2();
    }
    acc
}

/// Closed-form measure of the qubit with Bloch vector `v`.
pub fn bloch_measure(kind: MeasureKind, v: Bloch) -> Result<f64> {
    let perp = v[0].hypot(v[1]);
    match kind {
        MeasureKind::L1 => Ok(perp),
        MeasureKind::TraceDistanceCoherence => Ok(perp / 2.0),
        MeasureKind::RelativeEntropy => {
            let r = norm(v).min(1.0);
            Ok((h2((1.0 + v[2].clamp(-1.0, 1.0)) / 2.0) - h2((1.0 + r) / 2.0)).max(0.0))
        }
        MeasureKind::GeometricPure => Err(Error::Unsupported(
            "the Bloch oracle covers l1, relent and trace-distance".into(),
        )),
    }
}

/// Closed-form `S(ρ_v || ρ_w)` for qubits.
pub fn bloch_relative_entropy(v: Bloch, w: Bloch) -> f64 {
    let r = norm(v).min(1.0);
    let s = norm(w).min(1.0);
    let neg_entropy = -h2((1.0 + r) / 2.0);
    let (a, b) = ((1.0 + s) / 2.0, (1.0 - s) / 2.0);
    let proj = if s > 0.0 {
        (v[0] * w[0] + v[1] * w[1] + v[2] * w[2]) / s
    } else {
        0.0
    };
    // ⟨log₂ τ⟩_ρ with τ's eigenprojectors (I ± ŝ·σ)/2
    let pa = (1.0 + proj) / 2.0;
    let pb = (1.0 - proj) / 2.0;
    let mut cross = 0.0;
    for (p, lam) in [(pa, a), (pb, b)] {
        if p > 1e-12 {
            if lam < 1e-12 {
                return f64::INFINITY;
            }
            cross += p * lam.log2();
        }
    }
    (neg_entropy - cross).max(0.0)
}

/// Whether the Bloch point `w` lies in the ball centered at `v`.
pub fn bloch_member(ball: &BallSpec, v: Bloch, w: Bloch) -> bool {
    if norm(w) > 1.0 {
        return false;
    }
    match ball.distance {
        DistanceKind::Trace => dist(v, w) / 2.0 <= ball.epsilon,
        DistanceKind::RelativeEntropy => bloch_relative_entropy(v, w) <= ball.epsilon,
    }
}

/// Euclidean Bloch radius containing the ball.
fn enclosing_radius(ball: &BallSpec) -> f64 {
    let r = match ball.distance {
        DistanceKind::Trace => 2.0 * ball.epsilon,
        // Pinsker: D_tr ≤ sqrt(S ln2 / 2)
        DistanceKind::RelativeEntropy => 2.0 * (ball.epsilon * std::f64::consts::LN_2 / 2.0).sqrt(),
    };
    r.min(2.0)
}

/// Axis-aligned grid of `res` points per axis.
#[derive(Clone, Debug)]
pub(crate) struct Grid {
    pub lo: Bloch,
    pub hi: Bloch,
    pub res: usize,
}

impl Grid {
    pub fn around(center: Bloch, radius: f64, res: usize) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = (center[a] - radius).max(-1.0);
            hi[a] = (center[a] + radius).min(1.0);
        }
        Self { lo, hi, res }
    }

    fn coord(&self, a: usize, i: usize) -> f64 {
        if self.res <= 1 || self.hi[a] == self.lo[a] {
            return 0.5 * (self.lo[a] + self.hi[a]);
        }
        self.lo[a] + (self.hi[a] - self.lo[a]) * i as f64 / (self.res - 1) as f64
    }

    pub fn step(&self) -> f64 {
        (0..3)
            .map(|a| (self.hi[a] - self.lo[a]) / (self.res.max(2) - 1) as f64)
            .fold(0.0, f64::max)
    }
}

/// Extremes of `f` over grid points accepted by `member`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Sweep {
    pub min: f64,
    pub argmin: Bloch,
    pub max: f64,
    pub argmax: Bloch,
    pub count: usize,
}

impl Sweep {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            argmin: [f64::NAN; 3],
            max: f64::NEG_INFINITY,
            argmax: [f64::NAN; 3],
            count: 0,
        }
    }

    /// Deterministic merge; ties keep `self`, which comes first in grid order.
    fn merge(mut self, o: Sweep) -> Sweep {
        if o.min < self.min {
            self.min = o.min;
            self.argmin = o.argmin;
        }
        if o.max > self.max {
            self.max = o.max;
            self.argmax = o.argmax;
        }
        self.count += o.count;
        self
    }
}

pub(crate) fn sweep(grid: &Grid, member: impl Fn(Bloch) -> bool + Sync, f: impl Fn(Bloch) -> f64 + Sync) -> Sweep {
    let res = grid.res;
    let slices: Vec<Sweep> = (0..res)
        .into_par_iter()
        .map(|i| {
            let x = grid.coord(0, i);
            let mut acc = Sweep::empty();
            for j in 0..res {
                let y = grid.coord(1, j);
                for k in 0..res {
                    let w = [x, y, grid.coord(2, k)];
                    if !member(w) {
                        continue;
                    }
                    let v = f(w);
                    acc.count += 1;
                    if v < acc.min {
                        acc.min = v;
                        acc.argmin = w;
                    }
                    if v > acc.max {
                        acc.max = v;
                        acc.argmax = w;
                    }
                }
            }
            acc
        })
        .collect();
    slices.into_iter().fold(Sweep::empty(), Sweep::merge)
}

/// [`sweep`] specialized to ball membership: prunes each z-column to the
/// chord of the enclosing spheres and caches the z-only part of the measure.
fn sweep_ball(grid: &Grid, ball: &BallSpec, v: Bloch, kind: MeasureKind) -> Sweep {
    let res = grid.res;
    let zs: Vec<f64> = (0..res).map(|k| grid.coord(2, k)).collect();
    let hz: Vec<f64> = zs.iter().map(|z| h2((1.0 + z.clamp(-1.0, 1.0)) / 2.0)).collect();
    let r2 = {
        let r = 2.0 * ball.epsilon;
        r * r
    };
    let trace = ball.distance == DistanceKind::Trace;
    let dz = if res > 1 { (grid.hi[2] - grid.lo[2]) / (res - 1) as f64 } else { 0.0 };
    let slices: Vec<Sweep> = (0..res)
        .into_par_iter()
        .map(|i| {
            let x = grid.coord(0, i);
            let mut acc = Sweep::empty();
            for j in 0..res {
                let y = grid.coord(1, j);
                let perp2 = x * x + y * y;
                if perp2 > 1.0 {
                    continue;
                }
                let (mut k_lo, mut k_hi) = (0usize, res - 1);
                if trace && dz > 0.0 {
                    let rest = r2 - (x - v[0]).powi(2) - (y - v[1]).powi(2);
                    if rest < 0.0 {
                        continue;
                    }
                    let a = (1.0 - perp2).sqrt();
                    let b = rest.sqrt();
                    let z_lo = (-a).max(v[2] - b);
                    let z_hi = a.min(v[2] + b);
                    if z_lo > z_hi + dz {
                        continue;
                    }
                    // one cell of margin; exact membership decides
                    k_lo = (((z_lo - grid.lo[2]) / dz).floor() as isize - 1).max(0) as usize;
                    k_hi = ((((z_hi - grid.lo[2]) / dz).ceil() as isize + 1).max(0) as usize).min(res - 1);
                }
                let perp = perp2.sqrt();
                for k in k_lo..=k_hi {
                    let z = zs[k];
                    let w = [x, y, z];
                    let inside = if trace {
                        perp2 + z * z <= 1.0 && (x - v[0]).powi(2) + (y - v[1]).powi(2) + (z - v[2]).powi(2) <= r2
                    } else {
                        bloch_member(ball, v, w)
                    };
                    if !inside {
                        continue;
                    }
                    let val = match kind {
                        MeasureKind::L1 => perp,
                        MeasureKind::TraceDistanceCoherence => perp / 2.0,
                        _ => {
                            let r = (perp2 + z * z).sqrt().min(1.0);
                            (hz[k] - h2((1.0 + r) / 2.0)).max(0.0)
                        }
                    };
                    acc.count += 1;
                    if val < acc.min {
                        acc.min = val;
                        acc.argmin = w;
                    }
                    if val > acc.max {
                        acc.max = val;
                        acc.argmax = w;
                    }
                }
            }
            acc
        })
        .collect();
    slices.into_iter().fold(Sweep::empty(), Sweep::merge)
}

/// Bound on `|C(w) − C(w')|` for `|w − w'| ≤ delta` near `w`.
pub(crate) fn local_modulus(kind: MeasureKind, w: Bloch, delta: f64) -> f64 {
    match kind {
        MeasureKind::L1 => delta,
        MeasureKind::TraceDistanceCoherence => delta / 2.0,
        _ => {
            let r_hi = (norm(w) + delta).min(1.0);
            let z_hi = (w[2].abs() + delta).min(1.0);
            let slope = |t: f64| 0.5 * ((1.0 + t) / (1.0 - t)).log2();
            let lipschitz = if r_hi < 1.0 { slope(z_hi) + slope(r_hi) } else { f64::INFINITY };
            // |h(p) − h(q)| ≤ h(|p − q|) for |p − q| ≤ 1/2
            let modulus = if delta <= 1.0 { 2.0 * h2(delta / 2.0) } else { 1.0 };
            (lipschitz * delta).min(modulus)
        }
    }
}

/// Grid distance bound: every point of the feasible lens lies within this
/// distance of an accepted grid point.
fn coverage_radius(ball: &BallSpec, v: Bloch, step: f64) -> f64 {
    let s = step * 3f64.sqrt() / 2.0;
    let radius = enclosing_radius(ball);
    let inscribed = match ball.distance {
        DistanceKind::Trace => {
            if norm(v) + radius <= 1.0 {
                radius
            } else {
                ((1.0 - norm(v) + radius) / 2.0).min(radius)
            }
        }
        // no closed-form inscribed ball; the lens shape is close to the
        // trace-distance case with the Pinsker radius halved
        DistanceKind::RelativeEntropy => ((1.0 - norm(v) + radius / 2.0) / 2.0).min(radius / 2.0),
    };
    if inscribed <= s {
        return 2.0 * radius;
    }
    s * (1.0 + 2.0 * radius / inscribed)
}

/// Exhaustive search over Bloch vectors `w` with `|w| ≤ 1` in the ball around
/// `rho`, followed by one local refinement pass around each extreme.
pub fn qubit_bloch_oracle(rho: &DensityMatrix, ball: &BallSpec, measure: MeasureKind, resolution: usize) -> Result<OracleResult> {
    touch("qubit_bloch_oracle");
    let v = rho
        .bloch_vector()
        .ok_or_else(|| Error::Unsupported(format!("Bloch oracle needs d = 2, got {}", rho.dim())))?;
    if resolution < 3 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
        });
    }
    bloch_measure(measure, v)?;
    if ball.epsilon == 0.0 {
        let c = bloch_measure(measure, v)?;
        return Ok(OracleResult {
            min: c,
            max: c,
            min_witness: v,
            max_witness: v,
            min_error: 0.0,
            max_error: 0.0,
            resolution,
            points: 1,
        });
    }
    let f = |w: Bloch| bloch_measure(measure, w).unwrap_or(f64::NAN);
    let member = |w: Bloch| bloch_member(ball, v, w);
    let grid = Grid::around(v, enclosing_radius(ball), resolution);
    let mut best = sweep_ball(&grid, ball, v, measure);
    // the center is always feasible
    let fc = f(v);
    if fc < best.min {
        best.min = fc;
        best.argmin = v;
    }
    if fc > best.max {
        best.max = fc;
        best.argmax = v;
    }
    let step = grid.step();
    let delta = coverage_radius(ball, v, step);
    let min_error = local_modulus(measure, best.argmin, delta);
    let max_error = local_modulus(measure, best.argmax, delta);
    let mut points = best.count;
    // zoom around each extreme; only ever improves the feasible values
    for pick_min in [true, false] {
        let mut radius = 2.0 * step;
        for _ in 0..REFINE_PASSES {
            let target = if pick_min { best.argmin } else { best.argmax };
            let local = sweep(&Grid::around(target, radius, REFINE_RESOLUTION), member, f);
            points += local.count;
            best = best.merge(Sweep { count: 0, ..local });
            radius /= 4.0;
        }
    }
    Ok(OracleResult {
        min: best.min,
        max: best.max,
        min_witness: best.argmin,
        max_witness: best.argmax,
        min_error,
        max_error,
        resolution,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::relative_entropy;

    #[test]
    fn zero_radius_is_exact() {
        let rho = DensityMatrix::from_bloch([0.3, 0.1, 0.2]).unwrap();
        let r = qubit_bloch_oracle(&rho, &BallSpec::trace(0.0).unwrap(), MeasureKind::L1, 11).unwrap();
        let c = 0.3f64.hypot(0.1);
        assert_eq!((r.min, r.max), (c, c));
    }

    #[test]
    fn whole_state_space_for_relent() {
        let rho = DensityMatrix::maximally_mixed(2);
        let r = qubit_bloch_oracle(&rho, &BallSpec::trace(1.0).unwrap(), MeasureKind::RelativeEntropy, 41).unwrap();
        assert_eq!(r.min, 0.0);
        assert!((r.max - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn closed_form_relative_entropy_matches_matrix_version() {
        let pts = [[0.3, -0.2, 0.5], [0.0, 0.0, 0.9], [-0.6, 0.1, 0.0]];
        for a in pts {
            for b in pts {
                let ra = DensityMatrix::from_bloch(a).unwrap();
                let rb = DensityMatrix::from_bloch(b).unwrap();
                let exact = relative_entropy(&ra, &rb).unwrap();
                assert!((bloch_relative_entropy(a, b) - exact).abs() < 1e-12);
            }
        }
        assert_eq!(bloch_relative_entropy([0.0; 3], [0.0, 0.0, 1.0]), f64::INFINITY);
    }

    #[test]
    fn rejects_non_qubits() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(qubit_bloch_oracle(&rho, &BallSpec::trace(0.1).unwrap(), MeasureKind::L1, 11).is_err());
    }
}
