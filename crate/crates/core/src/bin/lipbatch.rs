use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lipbatch::cli::experiment::summary_path;
use lipbatch::cli::study::write_study;
use lipbatch::cli::summarize::write_series;
use lipbatch::cli::{run_experiment, run_lipschitz_study, summarize, CliError, ExperimentConfig, StudyConfig};

/// Print to stdout, ignoring a closed pipe (e.g. `lipbatch run cfg | head -1`).
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "lipbatch", version, about = "Batch Bayesian optimization with local penalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment described by a config file.
    Run { config: PathBuf },
    /// Aggregate record files into best-so-far curves.
    Summarize {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Convergence of the GP Lipschitz estimate with sample size and noise.
    LipschitzStudy { config: PathBuf },
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::from_file(&config)?;
            let record = run_experiment(&config)?;
            let s = &record.summary;
            for (r, msg) in &s.failures {
                eprintln!("replicate {r} failed: {msg}");
            }
            out!(
                "{}: {}/{} replicates, final best {} +- {}",
                config.method_label(),
                s.completed,
                s.replicates,
                s.mean_final_best,
                s.std_final_best
            );
            out!("rows: {}", config.output.display());
            out!("summary: {}", summary_path(&config.output).display());
            if s.completed == 0 {
                return Err(CliError::Runtime("every replicate failed".into()));
            }
        }
        Command::Summarize { records, output } => {
            let rows = summarize(&records)?;
            let mut w = BufWriter::new(File::create(&output)?);
            write_series(&mut w, &rows)?;
            w.flush()?;
            out!("wrote {} rows to {}", rows.len(), output.display());
        }
        Command::LipschitzStudy { config } => {
            let config = StudyConfig::from_file(&config)?;
            let rows = run_lipschitz_study(&config)?;
            if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut w = BufWriter::new(File::create(&config.output)?);
            write_study(&mut w, &rows)?;
            w.flush()?;
            let _ = write_study(&mut std::io::stdout().lock(), &rows);
        }
        Command::Selftest { seed } => {
            let results = lipbatch::selftest::run_all(seed);
            for r in &results {
                out!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().any(|r| !r.passed) {
                return Err(CliError::Runtime("self-test failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
