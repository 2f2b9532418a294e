use cohsmooth::channel::{apply_kraus, is_incoherent_channel};
use cohsmooth::measures::{c_l1, c_rel_ent, c_trace_distance, measure_value, MeasureKind};
use cohsmooth::metrics::trace_distance;
use cohsmooth::oneshot::{cost_one_shot, distill_one_shot, FamilyConfig, OperationFamily};
use cohsmooth::smoothing::{smooth_max, smooth_min, BallSpec, SolverConfig};
use cohsmooth::state::{random_density, random_incoherent, DensityMatrix, Sampler, StateFile};
use cohsmooth::Error;
use proptest::prelude::*;

fn state(d: usize, rank: usize, seed: u64) -> DensityMatrix {
    random_density(d, rank.min(d), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn state_file_round_trip_is_exact(d in 1usize..=5, rank in 1usize..=5, seed in any::<u64>()) {
        let rho = state(d, rank, seed);
        let text = serde_json::to_string(&rho.to_file()).unwrap();
        let back: StateFile = serde_json::from_str(&text).unwrap();
        let m = back.to_matrix().unwrap();
        prop_assert_eq!(m.data(), rho.matrix().data());
    }

    #[test]
    fn closed_forms_are_bounded(d in 2usize..=5, rank in 1usize..=5, seed in any::<u64>()) {
        let rho = state(d, rank, seed);
        let (l1, cr) = (c_l1(&rho), c_rel_ent(&rho));
        prop_assert!(l1 >= 0.0 && l1 <= (d - 1) as f64 + 1e-12);
        prop_assert!(cr >= -1e-12 && cr <= (d as f64).log2() + 1e-12);
    }

    #[test]
    fn incoherent_states_have_zero_coherence(d in 2usize..=5, seed in any::<u64>()) {
        let rho = random_incoherent(d, seed).to_density();
        prop_assert!(c_l1(&rho).abs() <= 1e-12);
        prop_assert!(c_rel_ent(&rho).abs() <= 1e-12);
        prop_assert!(c_trace_distance(&rho).unwrap().value.abs() <= 1e-9);
    }

    #[test]
    fn qubit_trace_distance_coherence_is_off_diagonal(seed in any::<u64>()) {
        let rho = state(2, 2, seed);
        let c = c_trace_distance(&rho).unwrap().value;
        prop_assert!((c - rho.get(0, 1).norm()).abs() <= 1e-9);
    }

    #[test]
    fn qubit_trace_distance_is_half_bloch_distance(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (state(2, 2, s1), state(2, 2, s2));
        let (va, vb) = (a.bloch_vector().unwrap(), b.bloch_vector().unwrap());
        let e: f64 = (0..3).map(|i| (va[i] - vb[i]).powi(2)).sum::<f64>().sqrt() / 2.0;
        prop_assert!((trace_distance(&a, &b).unwrap() - e).abs() <= 1e-12);
    }

    #[test]
    fn incoherent_channels_do_not_increase_closed_forms(d in 2usize..=4, seed in any::<u64>()) {
        let rho = state(d, d, seed);
        let ch = Sampler::new(seed ^ 0x5eed).incoherent_channel(d, 2);
        prop_assert!(is_incoherent_channel(&ch));
        let out = apply_kraus(&ch, &rho).unwrap();
        prop_assert!(c_l1(&out) <= c_l1(&rho) + 1e-10);
        prop_assert!(c_rel_ent(&out) <= c_rel_ent(&rho) + 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn smoothing_brackets_the_measure(d in 2usize..=3, seed in any::<u64>(), eps in 0.02f64..0.3) {
        let rho = state(d, d, seed);
        let ball = BallSpec::trace(eps).unwrap();
        let cfg = SolverConfig::default();
        for m in [MeasureKind::L1, MeasureKind::RelativeEntropy] {
            let c = measure_value(&rho, m).unwrap();
            let lo = smooth_min(&rho, &ball, m, &cfg).unwrap();
            let hi = smooth_max(&rho, &ball, m, &cfg).unwrap();
            prop_assert!(lo.value <= c + 1e-9);
            prop_assert!(hi.value >= c - 1e-9);
            prop_assert!(ball.contains(&rho, &lo.witness).unwrap());
            prop_assert!(ball.contains(&rho, &hi.witness).unwrap());
            prop_assert!((measure_value(&lo.witness, m).unwrap() - lo.value).abs() <= 1e-9);
        }
    }

    #[test]
    fn smooth_min_is_monotone_in_epsilon(d in 2usize..=3, seed in any::<u64>()) {
        let rho = state(d, d, seed);
        let cfg = SolverConfig::default();
        let mut prev: Option<f64> = None;
        for eps in [0.05, 0.1, 0.2] {
            let r = smooth_min(&rho, &BallSpec::trace(eps).unwrap(), MeasureKind::L1, &cfg).unwrap();
            if let Some(p) = prev {
                prop_assert!(r.lower() <= p + 1e-9);
            }
            prev = Some(r.upper());
        }
    }
}

fn small_family(d: usize) -> OperationFamily {
    let cfg = FamilyConfig {
        phase_steps: 4,
        composition_phase_steps: 2,
        mix_p: vec![0.5, 1.0],
        delta_steps: 2,
        ..FamilyConfig::default()
    };
    OperationFamily::new(d, &cfg).unwrap()
}

#[test]
fn family_members_are_incoherent() {
    for d in 2..=3 {
        let fam = small_family(d);
        assert!(fam.all_incoherent());
        let delta = random_incoherent(d, 7).to_density();
        for ch in fam.members() {
            let out = apply_kraus(&ch.to_kraus(d), &delta).unwrap();
            assert!(out.is_diagonal(1e-12), "{ch:?}");
        }
    }
}

fn feasible(r: cohsmooth::Result<f64>) -> Option<f64> {
    match r {
        Ok(v) => Some(v),
        Err(Error::Infeasible(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn one_shot_searches_are_monotone_in_epsilon() {
    for (d, seed) in [(2, 1u64), (2, 2), (3, 3)] {
        let rho = state(d, d, seed);
        let fam = small_family(d);
        let mut last_distill = f64::NEG_INFINITY;
        let mut last_cost = f64::INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let ball = BallSpec::trace(eps).unwrap();
            let dist = feasible(distill_one_shot(&rho, &ball, &fam, MeasureKind::L1, 1..=d).map(|r| r.best_c_m));
            let cost = feasible(cost_one_shot(&rho, &ball, &fam, MeasureKind::L1, 1..=d).map(|r| r.best_c_m));
            if let Some(v) = dist {
                assert!(v >= last_distill, "distill dropped at ε={eps}");
                last_distill = v;
            } else {
                assert_eq!(last_distill, f64::NEG_INFINITY, "distill became infeasible at ε={eps}");
            }
            if let Some(v) = cost {
                assert!(v <= last_cost, "cost rose at ε={eps}");
                last_cost = v;
            } else {
                assert_eq!(last_cost, f64::INFINITY, "cost became infeasible at ε={eps}");
            }
        }
    }
}
