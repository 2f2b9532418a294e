//! Flag structs shared by clap and the JSON config file.
//!
//! Config keys are the long flag names with `-` replaced by `_`. A file may
//! also carry `"command"`, which must match the subcommand being run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use cohsmooth::harness::Campaign;
use cohsmooth::oneshot::FamilyConfig;

pub const SEED_ENV: &str = "COHSMOOTH_SEED";

#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<cohsmooth::Error> for CliError {
    fn from(e: cohsmooth::Error) -> Self {
        CliError(e.to_string())
    }
}

/// Fills every unset field of `self` from `file`.
pub trait Merge {
    fn merge(self, file: Self) -> Self;
}

macro_rules! merge_fields {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl Merge for $t {
            fn merge(mut self, file: Self) -> Self {
                $( if self.$f.is_none() { self.$f = file.$f; } )*
                self
            }
        }
    };
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct MeasureArgs {
    /// State file `{"dim", "matrix"}`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// l1, relent, trace-distance or geometric.
    #[arg(long)]
    pub measure: Option<String>,
    /// Project the input onto the state space instead of rejecting it.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub repair: Option<bool>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(MeasureArgs { state, measure, repair, out });

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct SmoothArgs {
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// min or max.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub measure: Option<String>,
    /// trace (default) or relent.
    #[arg(long)]
    pub distance: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Replace the solver value by the Bloch grid optimum on qubits.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
    #[arg(long)]
    pub oracle_resolution: Option<usize>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Random starts for the maximizer.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Falls back to COHSMOOTH_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub repair: Option<bool>,
    /// Also write the optimizing state as a state file.
    #[arg(long)]
    pub witness_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(SmoothArgs {
    state,
    mode,
    measure,
    distance,
    epsilon,
    oracle,
    oracle_resolution,
    gap_tol,
    max_iter,
    probes,
    seed,
    repair,
    witness_out,
    out,
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct OneshotArgs {
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// distill or cost.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub distance: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Smallest target rank M (default 1).
    #[arg(long)]
    pub m_min: Option<usize>,
    /// Largest target rank M (default d).
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Cap on enumerated family members.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Family enumeration grids; config file only.
    #[arg(skip)]
    pub family: Option<FamilyConfig>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub repair: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(OneshotArgs {
    state,
    mode,
    measure,
    distance,
    epsilon,
    m_min,
    m_max,
    budget,
    family,
    repair,
    out,
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct PropcheckArgs {
    /// Propositions to check (3, P3, ID_CD, wsm, ...); all when absent.
    #[arg(long, value_delimiter = ',')]
    pub prop: Option<Vec<String>>,
    /// Weight of the coherent block in the strong-monotonicity counterexample.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Ball radius of the strong-monotonicity counterexample.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Radius grid of the sampled campaigns.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Instance count for every sampled proposition.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub oracle_resolution: Option<usize>,
    /// Falls back to the campaign seed, then COHSMOOTH_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Full campaign schedule; config file only.
    #[arg(skip)]
    pub campaign: Option<Campaign>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json (report array) or csv (summary).
    #[arg(long)]
    pub format: Option<String>,
    /// Also write the CSV summary here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

merge_fields!(PropcheckArgs {
    prop,
    eta,
    epsilon,
    epsilons,
    dims,
    samples,
    oracle_resolution,
    seed,
    campaign,
    out,
    format,
    csv,
});

fn read_file<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let mut v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| CliError(format!("{}: config must be a JSON object", path.display())))?;
    if let Some(c) = obj.remove("command") {
        if c.as_str() != Some(command) {
            return Err(CliError(format!("{}: config is for command {c}, not `{command}`", path.display())));
        }
    }
    serde_json::from_value(v).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

/// Command-line flags layered over the optional config file.
pub fn resolve<T: Merge + DeserializeOwned>(flags: T, file: Option<&Path>, command: &str) -> Result<T, CliError> {
    match file {
        Some(p) => Ok(flags.merge(read_file(p, command)?)),
        None => Ok(flags),
    }
}

pub fn seed_or_env(seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let flags = SmoothArgs {
            epsilon: Some(0.2),
            ..Default::default()
        };
        let file: SmoothArgs = serde_json::from_str(r#"{"epsilon": 0.1, "measure": "l1"}"#).unwrap();
        let m = flags.merge(file);
        assert_eq!(m.epsilon, Some(0.2));
        assert_eq!(m.measure.as_deref(), Some("l1"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<MeasureArgs>(r#"{"measure": "l1", "epsilon": 0.1}"#).is_err());
        assert!(serde_json::from_str::<PropcheckArgs>(r#"{"campaign": {"seeds": 1}}"#).is_err());
    }

    #[test]
    fn command_key_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"command": "smooth", "measure": "l1"}"#).unwrap();
        assert!(read_file::<MeasureArgs>(&p, "measure").is_err());
        assert!(read_file::<SmoothArgs>(&p, "smooth").is_ok());
    }
}
