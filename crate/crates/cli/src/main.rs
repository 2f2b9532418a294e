//! `cohsmooth` command-line front end.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cohsmooth::harness::{run_campaign, Campaign, PropId, PropReport, CSV_HEADER};
use cohsmooth::measures::{evaluate, MeasureKind};
use cohsmooth::metrics::DistanceKind;
use cohsmooth::oneshot::{cost_one_shot, distill_one_shot, OperationFamily};
use cohsmooth::smoothing::{smooth_max, smooth_min, BallSpec, Mode, SolverConfig};
use cohsmooth::state::{DensityMatrix, StateFile};

use config::{resolve, seed_or_env, CliError, MeasureArgs, OneshotArgs, PropcheckArgs, SmoothArgs};

#[derive(Parser, Debug)]
#[command(name = "cohsmooth", version, about = "Epsilon-smoothed coherence quantifiers")]
struct Cli {
    /// JSON file supplying any flag of the chosen command; flags on the
    /// command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a coherence measure on a state file.
    Measure(MeasureArgs),
    /// Minimum or maximum of a measure over an ε-ball.
    Smooth(SmoothArgs),
    /// One-shot distillation or cost search over the operation family.
    Oneshot(OneshotArgs),
    /// Run proposition campaigns; exits 2 on any violation.
    Propcheck(PropcheckArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Measure(a) => measure(resolve(a, file, "measure")?),
        Command::Smooth(a) => smooth(resolve(a, file, "smooth")?),
        Command::Oneshot(a) => oneshot(resolve(a, file, "oneshot")?),
        Command::Propcheck(a) => propcheck(resolve(a, file, "propcheck")?),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError(format!("missing required flag --{flag}")))
}

fn parse<T: std::str::FromStr<Err = cohsmooth::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(CliError::from)
}

fn load_state(path: &Path, repair: bool) -> Result<DensityMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let file: StateFile = serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let m = file.to_matrix()?;
    let rho = if repair { DensityMatrix::repair(m)? } else { DensityMatrix::new(m)? };
    Ok(rho)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| CliError(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError(e.to_string()))
}

fn emit<T: Serialize>(out: Option<&Path>, v: &T) -> Result<(), CliError> {
    write_text(out, &to_json(v)?)
}

fn measure(a: MeasureArgs) -> Result<u8, CliError> {
    let rho = load_state(&required(a.state, "state")?, a.repair.unwrap_or(false))?;
    let kind: MeasureKind = parse(&required(a.measure, "measure")?)?;
    let r = evaluate(&rho, kind)?;
    emit(a.out.as_deref(), &r)?;
    Ok(0)
}

fn ball(distance: Option<String>, epsilon: Option<f64>) -> Result<BallSpec, CliError> {
    let kind: DistanceKind = match distance {
        Some(s) => parse(&s)?,
        None => DistanceKind::Trace,
    };
    Ok(BallSpec::new(kind, required(epsilon, "epsilon")?)?)
}

fn smooth(a: SmoothArgs) -> Result<u8, CliError> {
    let rho = load_state(&required(a.state, "state")?, a.repair.unwrap_or(false))?;
    let kind: MeasureKind = parse(&required(a.measure, "measure")?)?;
    let ball = ball(a.distance, a.epsilon)?;
    let defaults = SolverConfig::default();
    let cfg = SolverConfig {
        gap_tol: a.gap_tol.unwrap_or(defaults.gap_tol),
        max_iter: a.max_iter.or(defaults.max_iter),
        probes: a.probes.unwrap_or(defaults.probes),
        seed: seed_or_env(a.seed)?,
        oracle: a.oracle.unwrap_or(false),
        oracle_resolution: a.oracle_resolution.unwrap_or(defaults.oracle_resolution),
        ..defaults
    };
    if !(cfg.gap_tol > 0.0) {
        return Err(CliError(format!("--gap-tol must be positive, got {}", cfg.gap_tol)));
    }
    if cfg.oracle_resolution < 3 {
        return Err(CliError(format!("--oracle-resolution must be at least 3, got {}", cfg.oracle_resolution)));
    }
    let mode = match required(a.mode, "mode")?.as_str() {
        "min" => Mode::Min,
        "max" => Mode::Max,
        other => return Err(CliError(format!("unknown mode `{other}` (expected min or max)"))),
    };
    let r = match mode {
        Mode::Min => smooth_min(&rho, &ball, kind, &cfg)?,
        Mode::Max => smooth_max(&rho, &ball, kind, &cfg)?,
    };
    if let Some(p) = a.witness_out.as_deref() {
        write_text(Some(p), &to_json(&r.witness.to_file())?)?;
    }
    emit(a.out.as_deref(), &r)?;
    Ok(0)
}

fn oneshot(a: OneshotArgs) -> Result<u8, CliError> {
    let rho = load_state(&required(a.state, "state")?, a.repair.unwrap_or(false))?;
    let kind: MeasureKind = parse(&required(a.measure, "measure")?)?;
    let ball = ball(a.distance, a.epsilon)?;
    let d = rho.dim();
    let mut family_cfg = a.family.unwrap_or_default();
    if let Some(b) = a.budget {
        family_cfg.budget = b;
    }
    let family = OperationFamily::new(d, &family_cfg)?;
    let range = a.m_min.unwrap_or(1)..=a.m_max.unwrap_or(d);
    let r = match required(a.mode, "mode")?.as_str() {
        "distill" => distill_one_shot(&rho, &ball, &family, kind, range)?,
        "cost" => cost_one_shot(&rho, &ball, &family, kind, range)?,
        other => return Err(CliError(format!("unknown mode `{other}` (expected distill or cost)"))),
    };
    emit(a.out.as_deref(), &r)?;
    Ok(0)
}

fn csv_summary(reports: &[PropReport]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| CliError(e.to_string()))?;
    for r in reports {
        w.write_record(r.csv_row()).map_err(|e| CliError(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError(e.to_string()))
}

fn campaign(a: &PropcheckArgs) -> Result<Campaign, CliError> {
    let mut c = a.campaign.clone().unwrap_or_default();
    c.seed = match a.seed {
        Some(s) => s,
        None if a.campaign.is_some() => c.seed,
        None => seed_or_env(None)?,
    };
    if let Some(v) = &a.dims {
        c.dims = v.clone();
    }
    if let Some(v) = &a.epsilons {
        c.epsilons = v.clone();
    }
    if let Some(n) = a.samples {
        for p in PropId::ALL {
            if p != PropId::P3 {
                c.samples.insert(p, n);
            }
        }
    }
    if let Some(r) = a.oracle_resolution {
        c.oracle_resolution = r;
    }
    if let Some(e) = a.eta {
        c.prop3_eta = e;
    }
    if let Some(e) = a.epsilon {
        c.prop3_epsilon = e;
    }
    c.validate()?;
    Ok(c)
}

fn propcheck(a: PropcheckArgs) -> Result<u8, CliError> {
    let format = a.format.clone().unwrap_or_else(|| "json".into());
    if format != "json" && format != "csv" {
        return Err(CliError(format!("unknown format `{format}` (expected json or csv)")));
    }
    let c = campaign(&a)?;
    let props: Vec<PropId> = match &a.prop {
        Some(list) if !list.is_empty() => list.iter().map(|s| parse(s)).collect::<Result<_, _>>()?,
        _ => PropId::ALL.to_vec(),
    };
    let reports = run_campaign(&c, &props)?;
    let summary = csv_summary(&reports)?;
    if format == "csv" {
        write_text(a.out.as_deref(), summary.trim_end())?;
    } else {
        emit(a.out.as_deref(), &reports)?;
    }
    if let Some(p) = a.csv.as_deref() {
        fs::write(p, &summary).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
    }
    for r in &reports {
        eprintln!(
            "{:<10} {:<9} samples={} passed={} violations={} skipped={}",
            r.prop_id.tag(),
            format!("{:?}", r.verdict).to_lowercase(),
            r.samples,
            r.passed,
            r.violations,
            r.skipped
        );
    }
    Ok(if reports.iter().any(PropReport::failed) { 2 } else { 0 })
}
