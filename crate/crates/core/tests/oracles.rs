use cohsmooth::harness::rel_ent_cross_check;
use cohsmooth::linalg::{hermitian_eig, CMatrix, C64};
use cohsmooth::measures::MeasureKind;
use cohsmooth::oracle::qubit_bloch_oracle;
use cohsmooth::smoothing::{smooth_max, smooth_min, BallSpec, SolverConfig, ORACLE_AGREEMENT};
use cohsmooth::state::random_density;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut m = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    m = m.hermitize();
    m
}

fn mat_vec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= n);
    n
}

/// Largest eigenvalue by shifted power iteration with a Rayleigh quotient.
fn power_top(m: &CMatrix) -> f64 {
    let n = m.rows();
    let shift = m.frobenius_norm();
    let mut v: Vec<C64> = (0..n).map(|k| C64::new(1.0 + k as f64 * 0.1, 0.3)).collect();
    normalize(&mut v);
    for _ in 0..20_000 {
        let mut w = mat_vec(m, &v);
        w.iter_mut().zip(&v).for_each(|(a, b)| *a += b * shift);
        normalize(&mut w);
        v = w;
    }
    let mv = mat_vec(m, &v);
    v.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum()
}

#[test]
fn eigensolver_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let m = random_hermitian(4, &mut rng);
        let e = hermitian_eig(&m).unwrap();
        assert!((e.values[0] - power_top(&m)).abs() <= 1e-8);
        let back = e.reconstruct_with(&e.values);
        assert!(back.max_abs_diff(&m) <= 1e-12);
        let fro2: f64 = e.values.iter().map(|x| x * x).sum();
        assert!((fro2 - m.frobenius_norm().powi(2)).abs() <= 1e-10);
    }
}

#[test]
fn relative_entropy_of_coherence_matches_simplex_minimization() {
    for d in 2..=3 {
        for seed in 0..10 {
            let rho = random_density(d, d, 100 + seed).unwrap();
            assert!(rel_ent_cross_check(&rho).unwrap() <= 1e-5);
        }
    }
}

#[test]
fn qubit_smoothing_agrees_with_bloch_grid() {
    let cfg = SolverConfig::default();
    for seed in 0..12 {
        let rho = random_density(2, 2, 500 + seed).unwrap();
        for eps in [0.05, 0.1, 0.2] {
            let ball = BallSpec::trace(eps).unwrap();
            for m in [MeasureKind::L1, MeasureKind::RelativeEntropy] {
                let o = qubit_bloch_oracle(&rho, &ball, m, 81).unwrap();
                let lo = smooth_min(&rho, &ball, m, &cfg).unwrap();
                assert!((lo.value - o.min).abs() <= ORACLE_AGREEMENT + o.min_error, "min {seed} {eps} {m:?}");
                let hi = smooth_max(&rho, &ball, m, &cfg).unwrap();
                assert!((hi.value - o.max).abs() <= ORACLE_AGREEMENT + o.max_error, "max {seed} {eps} {m:?}");
            }
        }
    }
}
