use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ellipt_cli::{bundled, load, report, Format, RunOptions};

#[derive(Parser)]
#[command(name = "ellipt", version, about = "Run elliptic-operator verification scenarios")]
struct Cli {
    /// List the bundled scenarios and exit.
    #[arg(long, global = true)]
    list_scenarios: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: Option<String>,
        /// Output directory (default: the scenario's `output`, else ellipt-out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the mesh width.
        #[arg(long)]
        mesh: Option<f64>,
        /// Override the sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn list() {
    for name in bundled::names() {
        println!("{name:<24} {}", bundled::description(name).unwrap_or_default());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_scenarios {
        list();
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run { scenario: Some(scenario), out, mesh, seed, format }) = cli.command else {
        eprintln!("error: nothing to do; try `ellipt run <scenario>` or `ellipt --list-scenarios`");
        return ExitCode::from(2);
    };
    let opts = RunOptions { out, mesh, seed, format };
    let outcome = load(&scenario).and_then(|src| ellipt_cli::run(&src, &opts));
    match outcome {
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Ok((results, dir)) => {
            print!("{}", report::to_text(&results));
            println!("artifacts in {}", dir.display());
            match results.first_failure() {
                None => ExitCode::SUCCESS,
                Some(c) => {
                    eprintln!("first failing check: {}/{} ({})", c.task, c.name, c.anchor);
                    ExitCode::from(1)
                }
            }
        }
    }
}
