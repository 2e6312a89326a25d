use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pwbsim::experiment::{run, write_outputs, ExperimentConfig, ExperimentError, Kind};

/// Photonic weight-bank emulator: seeded sweeps and reports.
#[derive(Debug, Parser)]
#[command(name = "pwbsim", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Option<Kind>,
    /// JSON config; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.csv, summary.csv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Print the full default config as JSON and exit.
    #[arg(long)]
    print_default_config: bool,
}

/// Stdout may be a closed pipe (`| head`); that is not an error.
fn print_stdout(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn error_line(code: &str, message: &str) {
    let line = serde_json::json!({ "error": { "code": code, "message": message } });
    eprintln!("{line}");
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    if cli.print_default_config {
        let cfg = ExperimentConfig::for_kind(cli.kind.unwrap_or(Kind::TrainBaseline));
        print_stdout(&serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let kind = cli
        .kind
        .ok_or_else(|| ExperimentError::Config("missing experiment kind".into()))?;
    let out = cli
        .out
        .ok_or_else(|| ExperimentError::Config("missing --out <dir>".into()))?;
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.kind = kind;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let result = run(&cfg, cli.jobs)?;
    let manifest = write_outputs(&cfg, &result, &out)?;
    let line = serde_json::json!({
        "ok": true,
        "kind": kind.as_str(),
        "out": out,
        "files": manifest.files.iter().map(|f| &f.file).collect::<Vec<_>>(),
    });
    print_stdout(&line.to_string());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            error_line("usage", e.to_string().lines().next().unwrap_or("bad arguments"));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error_line(e.code(), &e.to_string());
            ExitCode::from(1)
        }
    }
}
