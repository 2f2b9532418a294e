use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cohsmooth::measures::MeasureKind;
use cohsmooth::oracle::{qubit_bloch_oracle, DEFAULT_RESOLUTION};
use cohsmooth::smoothing::{BallSpec, ORACLE_AGREEMENT};
use cohsmooth::state::{random_density, DensityMatrix, StateFile};
use serde_json::Value;

const PLUS: &str = r#"{"dim":2,"matrix":[[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]]}"#;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohsmooth"))
        .current_dir(dir)
        .args(args)
        .env_remove("COHSMOOTH_SEED")
        .output()
        .unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn write_state(dir: &Path, name: &str, rho: &DensityMatrix) {
    fs::write(dir.join(name), serde_json::to_string(&rho.to_file()).unwrap()).unwrap();
}

#[test]
fn measure_plus_state() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("plus.json"), PLUS).unwrap();
    let o = cli(dir.path(), &["measure", "--state", "plus.json", "--measure", "l1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["value"], 1.0);
}

#[test]
fn smooth_with_oracle_matches_bloch_grid() {
    let dir = tempfile::tempdir().unwrap();
    let rho = random_density(2, 2, 42).unwrap();
    write_state(dir.path(), "s.json", &rho);
    let o = cli(
        dir.path(),
        &["smooth", "--state", "s.json", "--mode", "min", "--measure", "relent", "--distance", "trace", "--epsilon", "0.1", "--oracle"],
    );
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    let grid = qubit_bloch_oracle(&rho, &BallSpec::trace(0.1).unwrap(), MeasureKind::RelativeEntropy, DEFAULT_RESOLUTION).unwrap();
    let v = r["value"].as_f64().unwrap();
    assert!((v - grid.min).abs() <= ORACLE_AGREEMENT + grid.min_error);
    assert_eq!(r["certification"], "oracle-exact");
    for key in ["mode", "value", "epsilon", "distance", "measure", "certification", "gap_estimate", "witness"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn propcheck_counterexample_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["propcheck", "--prop", "3", "--eta", "0.05", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r[0]["prop_id"], "P3");
    assert_eq!(r[0]["verdict"], "pass");
    assert_eq!(r[0]["violations"], 1);
}

#[test]
fn propcheck_exits_two_when_counterexample_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["propcheck", "--prop", "3", "--eta", "0.001", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)[0]["verdict"], "fail");
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), r#"{"dim":2,"matrix":[[[0.5,0],[0.9,0]],[[0.9,0],[0.5,0]]]}"#).unwrap();
    fs::write(d.join("garbage.json"), "{not json").unwrap();
    fs::write(d.join("plus.json"), PLUS).unwrap();
    for args in [
        &["measure", "--state", "bad.json", "--measure", "l1"][..],
        &["measure", "--state", "garbage.json", "--measure", "l1"],
        &["measure", "--state", "missing.json", "--measure", "l1"],
        &["measure", "--state", "plus.json", "--measure", "nope"],
        &["smooth", "--state", "plus.json", "--mode", "min", "--measure", "l1", "--epsilon", "-0.1"],
        &["propcheck", "--prop", "3", "--eta", "0.2", "--epsilon", "0.1"],
        &["propcheck", "--prop", "P42"],
        &["measure", "--unknown-flag"],
    ] {
        assert_eq!(cli(d, args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn repair_is_explicit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("off.json"), r#"{"dim":2,"matrix":[[[0.6,0],[0.5,0]],[[0.5,0],[0.4,0]]]}"#).unwrap();
    let args = ["measure", "--state", "off.json", "--measure", "l1"];
    assert_eq!(cli(dir.path(), &args).status.code(), Some(1));
    let mut repaired = args.to_vec();
    repaired.push("--repair");
    assert_eq!(cli(dir.path(), &repaired).status.code(), Some(0));
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("plus.json"), PLUS).unwrap();
    fs::write(d.join("cfg.json"), r#"{"command":"measure","state":"plus.json","measure":"relent"}"#).unwrap();
    let from_file = json(&cli(d, &["measure", "--config", "cfg.json"]));
    assert_eq!(from_file["measure"], "relent");
    assert!((from_file["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let overridden = json(&cli(d, &["measure", "--config", "cfg.json", "--measure", "l1"]));
    assert_eq!(overridden["measure"], "l1");

    fs::write(d.join("typo.json"), r#"{"state":"plus.json","measrue":"l1"}"#).unwrap();
    assert_eq!(cli(d, &["measure", "--config", "typo.json"]).status.code(), Some(1));
    fs::write(d.join("other.json"), r#"{"command":"smooth","state":"plus.json","measure":"l1"}"#).unwrap();
    assert_eq!(cli(d, &["measure", "--config", "other.json"]).status.code(), Some(1));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cohsmooth"));
        c.current_dir(dir.path()).args(["propcheck", "--prop", "1", "--samples", "2"]).args(extra);
        c.env_remove("COHSMOOTH_SEED");
        if let Some(s) = env {
            c.env("COHSMOOTH_SEED", s);
        }
        json(&c.output().unwrap())[0]["config"]["seed"].clone()
    };
    assert_eq!(run(None, &[]), 0);
    assert_eq!(run(Some("17"), &[]), 17);
    assert_eq!(run(Some("17"), &["--seed", "5"]), 5);
}

#[test]
fn witness_file_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rho = random_density(3, 3, 9).unwrap();
    write_state(d, "s.json", &rho);
    let o = cli(
        d,
        &["smooth", "--state", "s.json", "--mode", "min", "--measure", "l1", "--epsilon", "0.1", "--witness-out", "w.json", "--out", "r.json"],
    );
    assert_eq!(o.status.code(), Some(0));
    let file: StateFile = serde_json::from_str(&fs::read_to_string(d.join("w.json")).unwrap()).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let tau = DensityMatrix::from_file(&file).unwrap();
    let rewritten = serde_json::to_string(&tau.to_file()).unwrap();
    assert_eq!(serde_json::from_str::<StateFile>(&rewritten).unwrap(), file);
    assert_eq!(serde_json::to_value(&file.matrix).unwrap(), report["witness"]);

    let again = cli(d, &["measure", "--state", "w.json", "--measure", "l1"]);
    assert!((json(&again)["value"].as_f64().unwrap() - report["value"].as_f64().unwrap()).abs() <= 1e-12);
}

#[test]
fn oneshot_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("plus.json"), PLUS).unwrap();
    let o = cli(dir.path(), &["oneshot", "--state", "plus.json", "--mode", "distill", "--measure", "l1", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["mode"], "distill");
    assert_eq!(r["M"], 2);
    assert_eq!(r["best_cM"], 1.0);
    for key in ["epsilon", "witness_channel", "achieved_distance", "family_budget"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn propcheck_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["propcheck", "--prop", "3,6", "--samples", "3", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prop_id,samples,violations,skipped,max_slack"));
    assert!(lines.next().unwrap().starts_with("P3,1,1,0,"));
    assert!(lines.next().unwrap().starts_with("P6,3,0,"));
}
