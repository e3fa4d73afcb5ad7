use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shapestore_cli::{
    cmd_analyze, cmd_certify, cmd_drift_check, cmd_simulate, cmd_validate, CliError, CmdResult,
    DriftCases, SimOverrides,
};

/// Shape-stability toolkit for neighborhood storage networks: exact
/// feasibility analysis, drift verification, transience certificates, and
/// Monte Carlo recurrence diagnostics.
#[derive(Parser)]
#[command(name = "shapestore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for sidecar output files (created if missing).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Timestamp recorded in the manifest (defaults to now, RFC 3339).
    /// Fixing it makes reruns byte-identical.
    #[arg(long, global = true)]
    timestamp: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact feasibility analysis: subset condition, allocations,
    /// ERP/SERP existence, certificates.
    Analyze {
        /// Network definition file.
        #[arg(long)]
        net: PathBuf,
    },
    /// Check the model invariants of a network file (exit 1 on violations).
    Validate {
        #[arg(long)]
        net: PathBuf,
    },
    /// Exact one-step drift records against the closed forms.
    DriftCheck {
        #[arg(long)]
        net: PathBuf,
        /// Policy spec JSON, e.g. '{"policy":"jsq"}' or
        /// '{"policy":"pserp","epsilon":"1/12"}'.
        #[arg(long)]
        policy: String,
        /// Explicit configuration, comma-separated loads; repeatable.
        #[arg(long = "case")]
        cases: Vec<String>,
        /// Number of random configurations to sweep instead.
        #[arg(long)]
        sweep: Option<u32>,
        #[arg(long, default_value_t = 0)]
        sweep_seed: u64,
        /// Load bound for swept configurations.
        #[arg(long, default_value_t = 20)]
        max_load: u64,
    },
    /// Monte Carlo recurrence diagnostics from a simulation config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<u32>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Transience certificate with sampled drift verification
    /// (errors on instances that admit a positive allocation).
    Certify {
        #[arg(long)]
        net: PathBuf,
        /// Policy spec JSON; defaults to JSQ.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value_t = 100)]
        samples: u32,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
        #[arg(long, default_value_t = 20)]
        max_load: u64,
    },
}

fn parse_case(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("bad load {part:?} in case {text:?}")))
        })
        .collect()
}

fn dispatch(cli: &Cli) -> Result<CmdResult, CliError> {
    let ts = cli.timestamp.clone();
    match &cli.command {
        Command::Analyze { net } => cmd_analyze(net, ts),
        Command::Validate { net } => cmd_validate(net, ts),
        Command::DriftCheck {
            net,
            policy,
            cases,
            sweep,
            sweep_seed,
            max_load,
        } => {
            let cases = if let Some(count) = sweep {
                if !cases.is_empty() {
                    return Err(CliError::Usage(
                        "--case and --sweep are mutually exclusive".into(),
                    ));
                }
                DriftCases::Sweep {
                    count: *count,
                    seed: *sweep_seed,
                    max_load: *max_load,
                }
            } else {
                DriftCases::Explicit(
                    cases
                        .iter()
                        .map(|c| parse_case(c))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            };
            cmd_drift_check(net, policy, &cases, ts)
        }
        Command::Simulate {
            config,
            seed,
            replicas,
            steps,
        } => cmd_simulate(
            config,
            &SimOverrides {
                seed: *seed,
                replicas: *replicas,
                steps: *steps,
            },
            ts,
        ),
        Command::Certify {
            net,
            policy,
            samples,
            sample_seed,
            max_load,
        } => {
            let policy = policy.as_deref().unwrap_or(r#"{"policy":"jsq"}"#);
            cmd_certify(net, policy, *samples, *sample_seed, *max_load, ts)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(result) => {
            if !result.files.is_empty() {
                if let Some(dir) = &cli.output_dir {
                    if let Err(e) = std::fs::create_dir_all(dir) {
                        eprintln!("error: cannot create {}: {e}", dir.display());
                        return ExitCode::from(1);
                    }
                    for (name, content) in &result.files {
                        if let Err(e) = std::fs::write(dir.join(name), content) {
                            eprintln!("error: cannot write {name}: {e}");
                            return ExitCode::from(1);
                        }
                    }
                }
            }
            if let Some(dir) = &cli.output_dir {
                let _ = std::fs::create_dir_all(dir);
                let path = dir.join(format!("{}.json", subcommand_name(&cli.command)));
                if let Err(e) = std::fs::write(
                    &path,
                    serde_json::to_string_pretty(&result.payload).expect("payload serializes"),
                ) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&result.payload).expect("payload serializes")
            );
            ExitCode::from(u8::try_from(result.exit).unwrap_or(1))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Analyze { .. } => "analyze",
        Command::Validate { .. } => "validate",
        Command::DriftCheck { .. } => "drift-check",
        Command::Simulate { .. } => "simulate",
        Command::Certify { .. } => "certify",
    }
}
