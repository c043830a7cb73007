use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use jj_epr::app::{run, RunError};
use jj_epr::config::{parse_config, ConfigError, RunConfig, SchemeKind};
use jj_epr::selfcheck;

#[derive(Parser)]
#[command(name = "jj-epr", version, about = "EPR correlations in two-species bosonic Josephson junctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Global scheme: coupled evolution of both species in the double well.
    Global(RunArgs),
    /// Local scheme: one-axis twisting in a single well.
    Local(RunArgs),
    /// Parameter sweep of the global scheme.
    Sweep(RunArgs),
    /// Parse and validate a config without running it.
    Validate(RunArgs),
    /// Cross-check the sparse solvers against dense linear algebra.
    Oracle {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn config_error(msg: String) -> RunError {
    RunError::Config(ConfigError { messages: vec![msg] })
}

fn set_threads(threads: Option<usize>) -> Result<(), RunError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_error("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(format!("cannot set thread count: {e}")))?;
    }
    Ok(())
}

fn load(args: &RunArgs) -> Result<RunConfig, RunError> {
    set_threads(args.threads)?;
    let text = std::fs::read_to_string(&args.config).map_err(|source| RunError::Io { path: args.config.clone(), source })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<serde_json::Value, RunError> {
    let (args, expected) = match command {
        Command::Global(a) => (a, Some(SchemeKind::Global)),
        Command::Local(a) => (a, Some(SchemeKind::Local)),
        Command::Sweep(a) => (a, Some(SchemeKind::Sweep)),
        Command::Validate(a) => (a, None),
        Command::Oracle { threads } => {
            set_threads(threads)?;
            let checks = selfcheck::run_all()?;
            let passed = checks.iter().all(|c| c.passed);
            let report = json!({ "passed": passed, "checks": checks });
            if !passed {
                let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                return Err(RunError::CheckFailed(failed.join(", ")));
            }
            return Ok(report);
        }
    };
    let cfg = load(&args)?;
    let kind = cfg.scheme.kind();
    match expected {
        None => Ok(json!({ "valid": true, "scheme": kind.name(), "config_hash": cfg.hash() })),
        Some(k) if k != kind => Err(config_error(format!(
            "subcommand `{}` does not match the config's scheme `{}`",
            k.name(),
            kind.name()
        ))),
        Some(_) => {
            let out = run(&cfg)?;
            Ok(json!({
                "files": out.csv_files.iter().chain(std::iter::once(&out.metadata_file)).collect::<Vec<_>>(),
                "summary": out.summary,
            }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
