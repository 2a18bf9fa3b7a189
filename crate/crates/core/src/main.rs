use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faer::Par;

use obsentropy::experiments::{self, Config, ScenarioOutput};
use obsentropy::Error;

#[derive(Parser)]
#[command(name = "obsentropy", version, about = "Observational entropy experiments on spinless-fermion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV.
    Run {
        scenario: String,
        /// TOML file with `[section]` tables; keys must exist in the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override one key, e.g. `--set model.preset=integrable`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the property suite; exits with 4 when a property fails.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    ListScenarios,
    /// Print a scenario's summary and default configuration.
    Describe { scenario: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain(_) => 2,
        Error::Capacity { .. } => 3,
        _ => 1,
    }
}

fn run(id: &str, config: Option<PathBuf>, out: PathBuf, set: &[String]) -> Result<ScenarioOutput, Error> {
    let file = config.as_deref().map(Config::load).transpose()?;
    let cfg = experiments::resolve_config(id, file.as_ref(), set)?;
    let threads = experiments::threads_from_env()?;
    faer::set_global_parallelism(if threads > 1 { Par::rayon(threads) } else { Par::Seq });
    let output = experiments::run_scenario(id, &cfg, threads)?;
    for t in &output.tables {
        let path = t.write(&out)?;
        println!("wrote {}", path.display());
    }
    if let Some(report) = &output.report {
        let path = out.join(format!("{}.json", cfg.str("output.name")?));
        let text = serde_json::to_string_pretty(&report.to_json()).map_err(|e| Error::Numeric(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        println!("wrote {}", path.display());
        for r in &report.results {
            println!(
                "{:<24} {} instances={} exceptions={} max_violation={:.3e}",
                r.id,
                match (r.kind, r.passed()) {
                    (experiments::CheckKind::Report, _) => "INFO",
                    (_, true) => "PASS",
                    (_, false) => "FAIL",
                },
                r.instances,
                r.exceptions,
                r.max_violation
            );
        }
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            config,
            out,
            set,
        } => run(&scenario, config, out, &set),
        Command::Suite { config, out, set } => run("property_suite", config, out, &set),
        Command::ListScenarios => {
            for s in experiments::SCENARIOS {
                println!("{:<18} {}", s.id, s.summary);
            }
            return ExitCode::SUCCESS;
        }
        Command::Describe { scenario } => {
            match experiments::scenario(&scenario).and_then(|s| Ok((s, experiments::default_config_text(s.id)?))) {
                Ok((s, text)) => {
                    println!("{}\n\n{}", s.summary, text);
                    return ExitCode::SUCCESS;
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(out) if out.passed() => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("property suite failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
