//! `fracp-lab`: experiment runner for the fractional p-Laplacian laboratory.
//!
//! Exit codes: 0 pass, 1 usage/configuration error, 2 assertion failure.

mod config;
mod experiments;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fracp-lab", version, about = "Concave-convex fractional p-Laplacian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the configuration file.
        config: String,
        /// Overrides of the form key=value with dotted JSON paths
        /// (e.g. --set params.lambda=0.05).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a configuration against the experiment preconditions.
    Validate {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, set } => run(&config, &set),
        Command::Validate { config, set } => validate(&config, &set),
        Command::ListExperiments => {
            for (name, describe) in config::Experiment::all() {
                println!("{name:16} {describe}");
            }
            0
        }
    };
    std::process::exit(code);
}

fn run(path: &str, overrides: &[String]) -> i32 {
    let config = match config::load_config(path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return 1;
        }
    };
    let violations = config::validate(&config);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid config: {v}");
        }
        return 1;
    }
    match experiments::run(&config) {
        Ok(outcome) if outcome.failures.is_empty() => {
            println!("ok: artifacts in {}", config.output_dir);
            0
        }
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("assertion failed: {f}");
            }
            2
        }
        Err(e) => {
            eprintln!("run error: {e:#}");
            2
        }
    }
}

fn validate(path: &str, overrides: &[String]) -> i32 {
    let config = match config::load_config(path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return 1;
        }
    };
    let violations = config::validate(&config);
    if violations.is_empty() {
        println!("ok");
        0
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        2
    }
}
