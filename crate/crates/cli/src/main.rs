//! `wigner`: run, compare and inspect relativistic Wigner-friend scenarios.
//!
//! Exit codes: 0 success, 1 runtime error, 2 invalid input, 3 frames
//! inconsistent (`compare` only).

mod output;
mod scenario_file;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wigner::analysis::{
    compare_frames, joint_distribution, recover_theta, AnalysisError, JointDistribution, Variable,
};
use wigner::protocol::build_signaling;
use wigner::runner::{run, sample, EmissionSemantics, RunReport, SampledPath, UpdatePolicy};

use output::{branch_table, comparison_table, joint_table, recovery_table, round12, run_header, to_json};
use scenario_file::{check_betas, load, Loaded, Mode, ScenarioFile, ScenarioSource, SCHEMA_VERSION};

/// Input that fails parsing or validation; maps to exit code 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "wigner", version, about = "Frame-dependent Wigner-friend protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    #[default]
    Table,
}

#[derive(Args)]
struct Output {
    /// Also write the JSON report to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct RunOverrides {
    /// Frame velocity; repeat for several frames. Replaces `run.betas`.
    #[arg(long = "beta", allow_negative_numbers = true)]
    betas: Vec<f64>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<UpdatePolicy>,
    #[arg(long, value_parser = parse_semantics)]
    semantics: Option<EmissionSemantics>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate (or sample) the branches of a scenario in one or more frames.
    Run {
        file: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Number of samples in sample mode.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Compare the joint outcome distributions of two frames; exit 3 when
    /// they differ.
    Compare {
        file: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
        #[command(flatten)]
        output: Output,
    },
    /// Recover A's measurement angle from the friend's record.
    Signal {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 2)]
        n_qubits: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Parse and validate a scenario file.
    Validate { file: PathBuf },
    /// List the built-in scenario builders with an example file for each.
    ListScenarios {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str, options: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected one of {options}"))
}

fn parse_policy(s: &str) -> Result<UpdatePolicy, String> {
    parse_enum(s, "unitary-lab, projective-all")
}

fn parse_semantics(s: &str) -> Result<EmissionSemantics, String> {
    parse_enum(s, "fixed-unitary, record-adaptive")
}

fn apply_overrides(loaded: &mut Loaded, o: &RunOverrides) -> Result<(), Invalid> {
    let run = &mut loaded.file.run;
    if !o.betas.is_empty() {
        check_betas(&o.betas)?;
        run.betas = o.betas.clone();
    }
    if let Some(p) = o.policy {
        run.policy = p;
    }
    if let Some(s) = o.semantics {
        run.semantics = s;
    }
    Ok(())
}

fn emit(command: &str, body: &impl Serialize, table: impl FnOnce() -> String, output: &Output) -> Result<()> {
    let json = to_json(command, body)?;
    if let Some(path) = &output.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    match output.format {
        Format::Json => print!("{json}"),
        Format::Table => print!("{}", table()),
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleInfo {
    n: u64,
    seed: u64,
    paths: Vec<SampledPath>,
}

#[derive(Serialize)]
struct FrameRun {
    report: RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample: Option<SampleInfo>,
    joint: JointDistribution,
}

#[derive(Serialize)]
struct RunOutput {
    scenario_id: String,
    mode: Mode,
    variables: Vec<Variable>,
    frames: Vec<FrameRun>,
}

fn cmd_run(
    file: &Path,
    overrides: &RunOverrides,
    mode: Option<Mode>,
    n: Option<u64>,
    seed: Option<u64>,
    output: &Output,
) -> Result<ExitCode> {
    let mut loaded = load(file)?;
    apply_overrides(&mut loaded, overrides)?;
    let cfg = &mut loaded.file.run;
    cfg.mode = mode.unwrap_or(cfg.mode);
    cfg.n = n.unwrap_or(cfg.n);
    cfg.seed = seed.unwrap_or(cfg.seed);
    if cfg.mode == Mode::Sample && cfg.n == 0 {
        return Err(Invalid("n: sample size must be at least 1".into()).into());
    }
    let cfg = loaded.file.run.clone();
    let variables = loaded.variables();
    let s = &loaded.scenario;

    let mut frames = Vec::new();
    for &beta in &cfg.betas {
        let (report, info) = match cfg.mode {
            Mode::Enumerate => (run(s, beta, cfg.policy, cfg.semantics)?, None),
            Mode::Sample => {
                let sr = sample(s, beta, cfg.policy, cfg.semantics, cfg.n, cfg.seed)?;
                let info = SampleInfo {
                    n: sr.n,
                    seed: sr.seed,
                    paths: sr.paths,
                };
                (sr.report, Some(info))
            }
        };
        let joint = joint_distribution(&report, &variables)?;
        frames.push(FrameRun {
            report,
            sample: info,
            joint,
        });
    }
    let body = RunOutput {
        scenario_id: s.id.clone(),
        mode: cfg.mode,
        variables,
        frames,
    };
    emit(
        "run",
        &body,
        || {
            let mut out = String::new();
            for (i, f) in body.frames.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                run_header(&mut out, &f.report);
                if let Some(info) = &f.sample {
                    out.push_str(&format!("sampled n {} seed {}\n", info.n, info.seed));
                }
                branch_table(&mut out, &f.report);
                joint_table(&mut out, &f.joint);
            }
            out
        },
        output,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(file: &Path, overrides: &RunOverrides, output: &Output) -> Result<ExitCode> {
    let mut loaded = load(file)?;
    apply_overrides(&mut loaded, overrides)?;
    let cfg = &loaded.file.run;
    let [b1, b2] = cfg.betas[..] else {
        return Err(Invalid(format!("compare needs exactly two betas, got {}", cfg.betas.len())).into());
    };
    let cmp = compare_frames(&loaded.scenario, b1, b2, cfg.policy, cfg.semantics, &loaded.variables())?;
    emit("compare", &cmp, || comparison_table(&cmp), output)?;
    Ok(if cmp.consistent { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn cmd_signal(theta: f64, beta: f64, n_qubits: usize, output: &Output) -> Result<ExitCode> {
    check_betas(&[beta])?;
    let s = build_signaling(theta, n_qubits).map_err(|e| Invalid(e.to_string()))?;
    match recover_theta(&s, beta) {
        Ok(rec) => {
            emit("signal", &rec, || recovery_table(&rec), output)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ AnalysisError::NoDefiniteRecord(_)) => Err(anyhow::Error::new(e).context(format!(
            "beta {}: the environment still holds the friend's own record (basis angle 0), not one set by A",
            round12(beta)
        ))),
        Err(e) => Err(e.into()),
    }
}

fn cmd_validate(file: &Path) -> Result<ExitCode> {
    let loaded = load(file)?;
    println!(
        "ok: scenario `{}` ({} events, register dimension {})",
        loaded.scenario.id,
        loaded.scenario.events.len(),
        loaded.scenario.register.total_dimension()
    );
    Ok(ExitCode::SUCCESS)
}

fn builtin_examples() -> Vec<(&'static str, &'static str, ScenarioFile)> {
    use wigner::Complex64 as C;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let file = |scenario, betas: Vec<f64>| ScenarioFile {
        schema_version: SCHEMA_VERSION,
        scenario,
        run: scenario_file::RunBlock {
            betas,
            ..Default::default()
        },
    };
    vec![
        (
            "paper",
            "Bell pair, sealed-lab friend, reset, qubit emission, spacelike A; n_qubits in 2..=12",
            file(ScenarioSource::Paper { n_qubits: 3 }, vec![0.0, 0.2]),
        ),
        (
            "basic_wfs",
            "single-spin friend, W measures the whole lab in (L+ ± L-)/√2",
            file(
                ScenarioSource::BasicWfs {
                    alpha: C::new(h, 0.0),
                    beta: C::new(h, 0.0),
                },
                vec![0.0],
            ),
        ),
        (
            "bipartite",
            "two bare spins measured at spacelike separation; order A_first or B_first",
            file(
                ScenarioSource::Bipartite {
                    alpha: C::new(0.6, 0.0),
                    beta: C::new(0.0, 0.8),
                    gamma: C::new(0.0, 0.0),
                    u_theta: 0.0,
                    v_theta: std::f64::consts::FRAC_PI_2,
                    order: wigner::protocol::MeasurementOrder::AFirst,
                },
                vec![0.0, 0.5],
            ),
        ),
        (
            "signaling",
            "A measures at angle theta in [0, π) before the emission; record-adaptive friend",
            file(
                ScenarioSource::Signaling {
                    theta: std::f64::consts::FRAC_PI_3,
                    n_qubits: 2,
                },
                vec![0.0],
            ),
        ),
    ]
}

fn cmd_list(format: Format) -> Result<ExitCode> {
    let examples = builtin_examples();
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Entry<'a> {
                name: &'a str,
                description: &'a str,
                example: &'a ScenarioFile,
            }
            let entries: Vec<Entry> = examples
                .iter()
                .map(|(name, description, example)| Entry {
                    name,
                    description,
                    example,
                })
                .collect();
            print!("{}", to_json("list-scenarios", &serde_json::json!({ "builders": entries }))?);
        }
        Format::Table => {
            for (name, description, _) in &examples {
                println!("{name:<10} {description}");
            }
            println!("{:<10} a full scenario (register, events, lab_x) given inline", "explicit");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            file,
            overrides,
            mode,
            n,
            seed,
            output,
        } => cmd_run(&file, &overrides, mode, n, seed, &output),
        Command::Compare {
            file,
            overrides,
            output,
        } => cmd_compare(&file, &overrides, &output),
        Command::Signal {
            theta,
            beta,
            n_qubits,
            output,
        } => cmd_signal(theta, beta, n_qubits, &output),
        Command::Validate { file } => cmd_validate(&file),
        Command::ListScenarios { format } => cmd_list(format),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Invalid>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_examples_round_trip_and_validate() {
        for (name, _, file) in builtin_examples() {
            let text = serde_json::to_string(&file).unwrap();
            let back = scenario_file::parse(&text).unwrap();
            assert_eq!(back, file, "{name}");
            let s = back.scenario.build().unwrap();
            wigner::protocol::validate(&s).unwrap();
        }
    }

    #[test]
    fn explicit_scenarios_round_trip() {
        let s = wigner::protocol::build_paper_scenario(2).unwrap();
        let file = ScenarioFile {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioSource::Explicit(Box::new(s.clone())),
            run: Default::default(),
        };
        let back = scenario_file::parse(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(back.scenario.build().unwrap(), s);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = scenario_file::parse(r#"{"schema_version":1,"scenario":{"builder":"paper","n_qubits":2,"x":1}}"#)
            .unwrap_err();
        assert!(err.0.contains("unknown field `x`"), "{err}");
        let err = scenario_file::parse(r#"{"schema_version":1,"scenario":{"builder":"paper","n_qubits":2},"run":{"beta":[0]}}"#)
            .unwrap_err();
        assert!(err.0.contains("unknown field `beta`"), "{err}");
        assert!(scenario_file::parse(r#"{"schema_version":2,"scenario":{"builder":"paper","n_qubits":2}}"#).is_err());
    }
}
