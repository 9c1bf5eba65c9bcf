use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::experiment::mean_std;
use super::record::parse_rows;
use super::CliError;
use crate::batch::TraceRow;

/// One point of a method's best-so-far curve, aggregated over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub method: String,
    pub iteration: usize,
    /// Evaluations made up to and including this iteration.
    pub evaluations: usize,
    pub replicates: usize,
    pub mean_best: f64,
    pub std_best: f64,
    pub mean_wall_clock_s: f64,
    pub std_wall_clock_s: f64,
}

pub const SERIES_HEADER: &str = "method,iteration,evaluations,replicates,mean_best,std_best,mean_wall_clock_s,std_wall_clock_s";

/// Aggregate the rows of one method.
pub fn series(method: &str, rows: &[TraceRow]) -> Vec<SeriesRow> {
    // iteration -> replicate -> (best, wall, evaluations)
    let mut by_iter: BTreeMap<usize, BTreeMap<usize, (f64, f64, usize)>> = BTreeMap::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in rows {
        let c = counts.entry(r.replicate).or_default();
        *c += 1;
        by_iter.entry(r.iteration).or_default().insert(r.replicate, (r.best_so_far, r.wall_clock_s, *c));
    }
    by_iter
        .into_iter()
        .map(|(iteration, reps)| {
            let best: Vec<f64> = reps.values().map(|v| v.0).collect();
            let wall: Vec<f64> = reps.values().map(|v| v.1).collect();
            let (mean_best, std_best) = mean_std(&best);
            let (mean_wall, std_wall) = mean_std(&wall);
            SeriesRow {
                method: method.to_string(),
                iteration,
                evaluations: reps.values().next().map(|v| v.2).unwrap_or(0),
                replicates: reps.len(),
                mean_best,
                std_best,
                mean_wall_clock_s: mean_wall,
                std_wall_clock_s: std_wall,
            }
        })
        .collect()
}

/// Read several record files (method label = file stem) and aggregate each.
/// All files must share the same header.
pub fn summarize<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<SeriesRow>, CliError> {
    let mut out = Vec::new();
    let mut first_dim = None;
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p)?;
        let (dim, rows) = parse_rows(&text).map_err(|e| match e {
            CliError::Schema(m) => CliError::Schema(format!("{}: {m}", p.display())),
            other => other,
        })?;
        match first_dim {
            None => first_dim = Some(dim),
            Some(d) if d != dim => {
                return Err(CliError::Schema(format!("{} has {dim} input columns, expected {d}", p.display())));
            }
            _ => {}
        }
        let method = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.extend(series(&method, &rows));
    }
    Ok(out)
}

pub fn write_series<W: Write>(w: &mut W, rows: &[SeriesRow]) -> std::io::Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.method, r.iteration, r.evaluations, r.replicates, r.mean_best, r.std_best, r.mean_wall_clock_s, r.std_wall_clock_s
        )?;
    }
    Ok(())
}
