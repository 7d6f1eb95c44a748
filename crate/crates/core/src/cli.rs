//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (nothing written), 2 runtime
//! failure (successful artifacts and a manifest recording the failure are
//! written), 3 empty sweep (a manifest with zero runs is written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::experiments::{self, ExperimentError, ExperimentOutput, OutcomeStatus, Registry, MANIFEST_FILE};
use crate::scenario::{self, LoadedScenario, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

#[derive(Debug, Clone, Parser)]
#[command(name = "fracepi", version, about = "Fractional-order food-borne disease experiments")]
pub struct CliInvocation {
    /// One of: simulate, alpha-sweep, control-sweep, psitheta-sweep, r0,
    /// equilibria, sensitivity, surface, selftest
    #[arg(value_name = "COMMAND")]
    pub command: String,
    /// Scenario file; the built-in baseline is used when omitted
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Override a scenario key, e.g. `params.u=0.5` or `u=0.5` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Random seed (overrides run.seed)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides run.output_dir)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated fractional orders (overrides solver.alpha; for the
    /// control and psi/theta sweeps a single value sets sweeps.alpha)
    #[arg(long, value_name = "LIST")]
    pub alpha: Option<String>,
    /// Worker threads for parallel solves
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    /// Directory artifacts were written to, if any.
    pub output_dir: Option<PathBuf>,
}

fn failure(code: i32, message: String) -> DispatchResult {
    DispatchResult {
        code,
        stdout: String::new(),
        stderr: format!("error: {message}\n"),
        output_dir: None,
    }
}

fn alpha_overrides(inv: &CliInvocation) -> Result<Vec<String>, String> {
    let Some(list) = &inv.alpha else {
        return Ok(Vec::new());
    };
    let values: Vec<f64> = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("--alpha: `{s}` is not a number (expected e.g. 0.75,0.9,1)"))
        })
        .collect::<Result<_, _>>()?;
    let rendered: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    let mut out = vec![format!("solver.alpha=[{}]", rendered.join(","))];
    if matches!(inv.command.as_str(), "control-sweep" | "psitheta-sweep") {
        if values.len() != 1 {
            return Err(format!("--alpha: {} takes a single order, got {}", inv.command, values.len()));
        }
        out.push(format!("sweeps.alpha={}", rendered[0]));
    }
    Ok(out)
}

/// Loads the scenario and applies every flag as an override.
pub fn load_invocation_scenario(inv: &CliInvocation) -> Result<LoadedScenario, String> {
    let mut overrides = inv.overrides.clone();
    overrides.extend(alpha_overrides(inv)?);
    if let Some(seed) = inv.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if let Some(out) = &inv.out {
        let quoted = toml::Value::String(out.display().to_string()).to_string();
        overrides.push(format!("run.output_dir={quoted}"));
    }
    let loaded = match &inv.scenario {
        Some(path) => scenario::parse_scenario(path, &overrides),
        None => scenario::parse_scenario_str(&Scenario::baseline().to_toml(), "built-in baseline", &overrides),
    };
    loaded.map_err(|e| e.to_string())
}

fn write_outputs(dir: &Path, output: &ExperimentOutput, manifest: &str) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    for a in &output.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Runs one invocation against `registry`.
pub fn dispatch_with(registry: &Registry, inv: &CliInvocation) -> DispatchResult {
    let Some(experiment) = registry.get(&inv.command) else {
        return failure(
            EXIT_INVALID,
            format!("unknown command `{}`; expected one of {}", inv.command, registry.names().join(", ")),
        );
    };
    if inv.threads == Some(0) {
        return failure(EXIT_INVALID, "--threads must be at least 1".into());
    }
    let loaded = match load_invocation_scenario(inv) {
        Ok(l) => l,
        Err(e) => return failure(EXIT_INVALID, e),
    };
    let sc = &loaded.scenario;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = inv.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return failure(EXIT_RUNTIME, format!("cannot start worker threads: {e}")),
    };
    let (output, error) = match pool.install(|| experiment.run(sc)) {
        Ok(o) => (o, None),
        Err(ExperimentError::Invalid(m)) => return failure(EXIT_INVALID, m),
        Err(ExperimentError::Runtime { message, partial }) => (*partial, Some(message)),
    };

    let manifest = experiments::run_manifest(sc, &loaded.defaulted, experiment.name(), &output, error.clone());
    let dir = sc.run.output_dir.clone();
    if let Err(e) = write_outputs(&dir, &output, &manifest.to_json()) {
        return failure(EXIT_RUNTIME, e);
    }
    let mut stderr = String::new();
    let code = match manifest.status {
        OutcomeStatus::Complete => EXIT_OK,
        OutcomeStatus::PartialFailure => {
            let failed = output.runs.iter().filter(|r| !r.is_ok()).count();
            stderr.push_str(&format!(
                "error: {failed} of {} runs failed; see {}\n",
                output.runs.len(),
                dir.join(MANIFEST_FILE).display()
            ));
            if let Some(e) = &error {
                stderr.push_str(&format!("error: {e}\n"));
            }
            EXIT_RUNTIME
        }
        OutcomeStatus::Empty => {
            stderr.push_str("warning: sweep is empty; manifest written with zero runs\n");
            EXIT_EMPTY
        }
    };
    DispatchResult {
        code,
        stdout: output.report,
        stderr,
        output_dir: Some(dir),
    }
}

pub fn dispatch(inv: &CliInvocation) -> DispatchResult {
    dispatch_with(&Registry::builtin(), inv)
}

/// Parses `args` (including the program name), dispatches and prints.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let inv = match CliInvocation::try_parse_from(args) {
        Ok(inv) => inv,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = dispatch(&inv);
    let _ = std::io::stdout().write_all(result.stdout.as_bytes());
    let _ = std::io::stderr().write_all(result.stderr.as_bytes());
    result.code
}
