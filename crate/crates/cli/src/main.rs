use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carleman_lab::harness;

/// Numerical experiments on weighted-energy estimates and inverse problems
/// for first-order hyperbolic equations.
#[derive(Parser)]
#[command(name = "carleman-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weight, sublevel regions, outflow boundary and the geometric condition
    Geometry(RunArgs),
    /// Both sides of the weighted estimate over a sweep of s
    Carleman(RunArgs),
    /// Source reconstruction and the Hölder-stability sweeps
    InverseSource(RunArgs),
    /// Coefficient-difference stability sweep
    InverseCoefficient(RunArgs),
    /// Every experiment in turn
    All(RunArgs),
    /// Registered scenarios
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Registered scenario name or path to a .cfg file
    #[arg(long, default_value = "paper-1d")]
    scenario: String,
    /// Override a scenario key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match cli.command {
        Command::List => {
            for (name, description, expect) in harness::list_scenarios() {
                let note = if expect.is_empty() { String::new() } else { format!(" [{expect}]") };
                println!("{name:<16} {description}{note}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Geometry(a) => ("geometry", a),
        Command::Carleman(a) => ("carleman", a),
        Command::InverseSource(a) => ("inverse-source", a),
        Command::InverseCoefficient(a) => ("inverse-coefficient", a),
        Command::All(a) => ("all", a),
    };
    let outcome = harness::run(name, &args.scenario, &args.set, &args.out, args.seed);
    if outcome.exit_code == 0 {
        println!("{}: {}", name, outcome.message);
    } else {
        eprintln!("{}: {}", name, outcome.message);
    }
    if outcome.manifest.is_some() {
        println!("wrote {}", args.out.join("manifest.json").display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
