use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::batch::{run_bbo, RunOptions, TraceRow};

use super::config::ExperimentConfig;
use super::record::{write_header, write_rows};
use super::CliError;

/// Mean and sample standard deviation of the final best value over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub replicates: usize,
    pub completed: usize,
    pub mean_final_best: f64,
    pub std_final_best: f64,
    /// `(replicate, message)` for every replicate that did not finish.
    pub failures: Vec<(usize, String)>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Final `best_so_far` of each replicate, ordered by replicate index.
pub fn final_bests(rows: &[TraceRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((rep, best)) if *rep == r.replicate => *best = r.best_so_far,
            _ => out.push((r.replicate, r.best_so_far)),
        }
    }
    out
}

impl Summary {
    pub fn from_rows(rows: &[TraceRow], replicates: usize, failures: Vec<(usize, String)>) -> Self {
        let finals: Vec<f64> = final_bests(rows).into_iter().map(|(_, b)| b).collect();
        let (mean, std) = mean_std(&finals);
        Self { replicates, completed: finals.len(), mean_final_best: mean, std_final_best: std, failures }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
    pub summary: Summary,
    /// Recommended point (final posterior optimum) per completed replicate.
    pub recommendations: Vec<(usize, Vec<f64>, f64)>,
}

/// `<output>.summary.csv` next to the rows file.
pub fn summary_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".summary.csv");
    output.with_file_name(name)
}

pub fn write_summary(path: &Path, config: &ExperimentConfig, s: &Summary) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,benchmark,batch_size,replicates,completed,mean_final_best,std_final_best")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        config.method_label(),
        config.benchmark,
        config.batch_size,
        s.replicates,
        s.completed,
        s.mean_final_best,
        s.std_final_best
    )?;
    w.flush()?;
    Ok(())
}

/// Run every replicate of `config`, streaming rows to `config.output`.
///
/// Replicate `r` uses seed `config.seed + r` for the design and an
/// independent stream derived from it for the observation noise. A replicate
/// whose run fails is reported in the summary and leaves no rows behind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord, CliError> {
    config.validate()?;
    let bench = config.benchmark()?;
    let strategy = config.strategy()?;
    let goal = config.goal.unwrap_or(bench.goal());
    if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(&config.output)?);
    write_header(&mut out, bench.dim())?;
    out.flush()?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut recommendations = Vec::new();
    for r in 0..config.replicates {
        let seed = config.seed.wrapping_add(r as u64);
        let mut objective = bench.with_noise(config.noise, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        let opts = RunOptions {
            budget_iters: config.iterations,
            init_size: config.init_size(&bench),
            seed,
            goal,
            replicate: r,
            record_timing: config.record_timing,
            settings: config.design_settings(),
        };
        match run_bbo(&mut objective, bench.domain(), &strategy, &opts) {
            Ok(trace) => {
                write_rows(&mut out, &trace.rows)?;
                out.flush()?;
                recommendations.push((r, trace.recommended, trace.recommended_mean));
                rows.extend(trace.rows);
            }
            Err(failure) => failures.push((r, failure.to_string())),
        }
    }
    let summary = Summary::from_rows(&rows, config.replicates, failures);
    write_summary(&summary_path(&config.output), config, &summary)?;
    Ok(ExperimentRecord { dim: bench.dim(), rows, summary, recommendations })
}
