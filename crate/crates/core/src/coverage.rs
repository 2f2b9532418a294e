//! Call-coverage ledger: public operations record their name on entry so a
//! campaign can prove it exercised the whole library surface.

use std::collections::BTreeSet;
use std::sync::Mutex;

static LEDGER: Mutex<BTreeSet<&'static str>> = Mutex::new(BTreeSet::new());

/// Every operation name that [`touch`] may record.
pub const PUBLIC_OPS: &[&str] = &[
    "hermitian_eig",
    "trace_distance",
    "relative_entropy",
    "von_neumann_entropy",
    "dephase",
    "tensor",
    "mixing_channel",
    "apply_kraus",
    "selective_apply",
    "is_incoherent_channel",
    "random_density",
    "random_pure",
    "random_incoherent",
    "c_l1",
    "c_rel_ent",
    "c_trace_distance",
    "c_geometric_pure",
    "distance_based_measure",
    "smooth_min",
    "smooth_min_relent_ball",
    "smooth_max",
    "qubit_bloch_oracle",
    "tensor_invariance_check",
    "distill_one_shot",
    "cost_one_shot",
    "bound_consistency",
    "build_prop3_state",
    "check_prop3",
    "check_prop",
    "check_cd_identity",
    "check_cre_bound",
];

pub fn touch(op: &'static str) {
    debug_assert!(PUBLIC_OPS.contains(&op), "unknown op {op}");
    LEDGER.lock().unwrap_or_else(|e| e.into_inner()).insert(op);
}

pub fn snapshot() -> BTreeSet<&'static str> {
    LEDGER.lock().unwrap_or_else(|e| e.into_inner()).clone()
}

/// Operations in [`PUBLIC_OPS`] not yet recorded.
pub fn missing() -> Vec<&'static str> {
    let seen = snapshot();
    PUBLIC_OPS.iter().copied().filter(|op| !seen.contains(op)).collect()
}
