//! Deep-cut ellipsoid method for small convex programs.
//!
//! Each feasible center with objective value `f(c)` and subgradient `g`
//! yields the certified bound `f* ≥ f(c) − sqrt(gᵀ P g)`, because the
//! optimum never leaves the current ellipsoid `{x : (x−c)ᵀ P⁻¹ (x−c) ≤ 1}`.

/// Answer of the problem oracle at a query point.
pub(crate) enum Query {
    /// The point violates a convex constraint `φ ≤ 0` with `φ(x) = violation`
    /// and subgradient `g`.
    Infeasible { g: Vec<f64>, violation: f64 },
    Feasible { f: f64, g: Vec<f64> },
}

pub(crate) trait Problem {
    fn query(&self, x: &[f64]) -> Query;
}

#[derive(Clone, Debug)]
pub(crate) struct Settings {
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Settings {
    pub fn for_dim(n: usize, gap_tol: f64) -> Self {
        Self {
            gap_tol,
            max_iter: 40 * n * (n + 1) + 500,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub x_best: Option<Vec<f64>>,
    pub f_best: f64,
    pub lower_bound: f64,
    pub iterations: usize,
}

impl Outcome {
    pub fn gap(&self) -> f64 {
        (self.f_best - self.lower_bound).max(0.0)
    }
}

/// Minimizes over the feasible set, which must lie inside the ball of radius
/// `radius` around `center`.
pub(crate) fn minimize(problem: &impl Problem, center: Vec<f64>, radius: f64, s: &Settings) -> Outcome {
    let n = center.len();
    let mut c = center;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        p[i * n + i] = radius * radius;
    }
    let mut out = Outcome {
        x_best: None,
        f_best: f64::INFINITY,
        lower_bound: f64::NEG_INFINITY,
        iterations: 0,
    };
    let nf = n as f64;
    let mut pg = vec![0.0; n];
    while out.iterations < s.max_iter {
        out.iterations += 1;
        let (g, depth) = match problem.query(&c) {
            Query::Infeasible { g, violation } => (g, violation.max(0.0)),
            Query::Feasible { f, g } => {
                if f < out.f_best {
                    out.f_best = f;
                    out.x_best = Some(c.clone());
                }
                let spread = quad(&p, &g, &mut pg).sqrt();
                out.lower_bound = out.lower_bound.max(f - spread);
                if out.gap() <= s.gap_tol || spread == 0.0 {
                    if spread == 0.0 {
                        out.lower_bound = out.lower_bound.max(f);
                    }
                    break;
                }
                (g, f - out.f_best)
            }
        };
        let mut gpg = quad(&p, &g, &mut pg);
        if !gpg.is_finite() || g.iter().all(|&x| x == 0.0) {
            break;
        }
        if gpg <= 0.0 {
            // rounding broke positive definiteness; enlarging keeps the
            // optimum inside
            let scale = (0..n).map(|i| p[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            for i in 0..n {
                p[i * n + i] += 1e-10 * scale;
            }
            gpg = quad(&p, &g, &mut pg);
            if !(gpg > 0.0) {
                break;
            }
        }
        let norm = gpg.sqrt();
        let alpha = depth / norm;
        if alpha >= 1.0 {
            // The cut removes the whole ellipsoid: nothing better than the
            // incumbent remains.
            if out.x_best.is_some() {
                out.lower_bound = out.lower_bound.max(out.f_best);
            }
            break;
        }
        if n == 1 {
            let b = pg[0] / norm;
            c[0] -= (1.0 + alpha) / 2.0 * b;
            p[0] = ((1.0 - alpha) / 2.0 * b).powi(2);
            continue;
        }
        let tau = (1.0 + nf * alpha) / (nf + 1.0);
        let sigma = 2.0 * tau / (1.0 + alpha);
        let delta = nf * nf * (1.0 - alpha * alpha) / (nf * nf - 1.0);
        for i in 0..n {
            c[i] -= tau * pg[i] / norm;
        }
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] = delta * (p[i * n + j] - sigma * pg[i] * pg[j] / gpg);
            }
        }
        // keep P symmetric against drift; the slight inflation only
        // enlarges the ellipsoid
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (p[i * n + j] + p[j * n + i]);
                p[i * n + j] = avg;
                p[j * n + i] = avg;
            }
            p[i * n + i] *= 1.0 + 1e-12;
        }
    }
    out
}

/// Returns `gᵀ P g` and writes `P g` into `pg`.
fn quad(p: &[f64], g: &[f64], pg: &mut [f64]) -> f64 {
    let n = g.len();
    let mut acc = 0.0;
    for i in 0..n {
        let row = &p[i * n..(i + 1) * n];
        let v: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
        pg[i] = v;
        acc += v * g[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `min |x − a|₁` over the box `[-1, 1]^n`.
    struct L1Box {
        a: Vec<f64>,
    }

    impl Problem for L1Box {
        fn query(&self, x: &[f64]) -> Query {
            if let Some(i) = (0..x.len()).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())) {
                if x[i].abs() > 1.0 {
                    let mut g = vec![0.0; x.len()];
                    g[i] = x[i].signum();
                    return Query::Infeasible {
                        g,
                        violation: x[i].abs() - 1.0,
                    };
                }
            }
            let f = x.iter().zip(&self.a).map(|(x, a)| (x - a).abs()).sum();
            let g = x.iter().zip(&self.a).map(|(x, a)| (x - a).signum()).collect();
            Query::Feasible { f, g }
        }
    }

    #[test]
    fn box_constrained_l1() {
        let p = L1Box {
            a: vec![2.0, 0.3, -0.5],
        };
        let out = minimize(&p, vec![0.0; 3], 2.0, &Settings::for_dim(3, 1e-9));
        assert!((out.f_best - 1.0).abs() < 1e-8, "{out:?}");
        assert!(out.lower_bound <= 1.0 + 1e-12);
        assert!(out.gap() < 1e-8);
    }

    #[test]
    fn one_dimensional() {
        let p = L1Box { a: vec![0.25] };
        let out = minimize(&p, vec![-0.5], 1.0, &Settings::for_dim(1, 1e-12));
        assert!(out.f_best < 1e-10, "{out:?}");
        assert!(out.lower_bound <= out.f_best);
    }
}
