//! Scenario runner behind the `ellipt` binary.

pub mod bundled;
pub mod report;
pub mod scenario;
pub mod tasks;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub use report::{Check, Format, Results};

/// Resolve `arg` as a file path, falling back to a bundled scenario name.
pub fn load(arg: &str) -> Result<scenario::Source> {
    let path = Path::new(arg);
    if path.exists() {
        return scenario::Source::from_file(path);
    }
    let name = arg.trim_end_matches(".json");
    match bundled::get(name) {
        Some(text) => Ok(scenario::Source::bundled(name, text)),
        None => anyhow::bail!(
            "no scenario file `{arg}` and no bundled scenario of that name (see --list-scenarios)"
        ),
    }
}

pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub mesh: Option<f64>,
    pub seed: Option<u64>,
    pub format: Format,
}

/// Parse, validate, execute and emit. Returns the results and the output directory.
pub fn run(src: &scenario::Source, opts: &RunOptions) -> Result<(Results, PathBuf)> {
    let s = scenario::parse(src)?;
    let problem = scenario::build(src, s, opts.mesh, opts.seed)?;
    let out = opts
        .out
        .clone()
        .or_else(|| problem.scenario.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("ellipt-out").join(&problem.scenario.name));
    let results = tasks::run(&problem, &out)
        .with_context(|| format!("scenario `{}` failed", problem.scenario.name))?;
    report::emit(&results, &out, opts.format)?;
    Ok((results, out))
}
