use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use potmeter_cli::{run_scenario_with, threads_from_env, Pipeline, RunError, RunOptions, ScenarioConfig};

const EXIT_TOLERANCE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PipelineArg {
    Reconstruct,
    Meter,
    Dynamics,
    #[value(alias = "gauge_check")]
    GaugeCheck,
    All,
}

impl From<PipelineArg> for Pipeline {
    fn from(p: PipelineArg) -> Self {
        match p {
            PipelineArg::Reconstruct => Pipeline::Reconstruct,
            PipelineArg::Meter => Pipeline::Meter,
            PipelineArg::Dynamics => Pipeline::Dynamics,
            PipelineArg::GaugeCheck => Pipeline::GaugeCheck,
            PipelineArg::All => Pipeline::All,
        }
    }
}

/// Simulated weak-value potential meter.
///
/// Exit codes: 0 all checks pass, 2 tolerance failure, 3 config error,
/// 4 numeric pipeline error.
#[derive(Debug, Parser)]
#[command(name = "potmeter", version)]
struct Args {
    pipeline: PipelineArg,
    /// Scenario file, or the name of a built-in preset.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_json: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    /// Overrides `sampling.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
    /// Records wall-clock timing in the JSON report.
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("potmeter: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(args: &Args) -> Result<u8, (u8, String)> {
    let threads = threads_from_env().map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (EXIT_NUMERIC, e.to_string()))?;
    }
    let mut cfg = ScenarioConfig::load(&args.config).map_err(|e| (EXIT_CONFIG, format!("config error at {e}")))?;
    if let Some(seed) = args.seed {
        cfg.sampling.master_seed = seed;
    }
    let opts = RunOptions {
        record_timing: args.timing,
    };
    let report = run_scenario_with(&cfg, args.pipeline.into(), opts).map_err(|e| match e {
        RunError::Config(_) => (EXIT_CONFIG, e.to_string()),
        RunError::Pipeline(_) => (EXIT_NUMERIC, e.to_string()),
    })?;
    std::fs::write(&args.out_json, report.to_json())
        .map_err(|e| (EXIT_NUMERIC, format!("{}: {e}", args.out_json.display())))?;
    std::fs::write(&args.out_csv, report.fields.to_csv_string())
        .map_err(|e| (EXIT_NUMERIC, format!("{}: {e}", args.out_csv.display())))?;
    if !args.quiet {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        for c in &report.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            eprintln!("{tag} [{}] {}: {:.3e} <= {:.3e}", c.pipeline, c.invariant, c.value, c.tolerance);
        }
        if let Some(t) = &report.timing {
            eprintln!("total {:.1} ms", t.total_ms);
        }
    }
    Ok(if report.passed { 0 } else { EXIT_TOLERANCE })
}
