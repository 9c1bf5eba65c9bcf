//! CSV encoding of evaluation rows. Floats use the shortest representation
//! that parses back to the same value, so files round-trip exactly.

use std::io::Write;

use crate::batch::TraceRow;

use super::CliError;

pub fn header(dim: usize) -> String {
    let mut cols = vec!["replicate".to_string(), "iteration".into(), "batch_index".into()];
    cols.extend((0..dim).map(|i| format!("x{i}")));
    cols.extend(["y", "best_so_far", "design_time_s", "eval_time_s", "wall_clock_s"].map(String::from));
    cols.join(",")
}

pub fn format_row(row: &TraceRow) -> String {
    let mut fields = vec![row.replicate.to_string(), row.iteration.to_string(), row.batch_index.to_string()];
    fields.extend(row.x.iter().map(|v| v.to_string()));
    fields.extend([row.y, row.best_so_far, row.design_time_s, row.eval_time_s, row.wall_clock_s].map(|v| v.to_string()));
    fields.join(",")
}

pub fn write_header<W: Write>(w: &mut W, dim: usize) -> std::io::Result<()> {
    writeln!(w, "{}", header(dim))
}

pub fn write_rows<W: Write>(w: &mut W, rows: &[TraceRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(w, "{}", format_row(r))?;
    }
    Ok(())
}

/// Input dimension implied by a header line.
pub fn dim_from_header(line: &str) -> Result<usize, CliError> {
    let n = line.trim().split(',').count();
    let dim = n.checked_sub(8).filter(|&d| d >= 1).ok_or_else(|| CliError::Schema(format!("header has {n} columns")))?;
    if line.trim() != header(dim) {
        return Err(CliError::Schema(format!("unexpected header '{}'", line.trim())));
    }
    Ok(dim)
}

pub fn parse_row(line: &str, dim: usize) -> Result<TraceRow, CliError> {
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != dim + 8 {
        return Err(CliError::Schema(format!("expected {} columns, got {} in '{line}'", dim + 8, fields.len())));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| CliError::Schema(format!("bad integer '{s}'")));
    let float = |s: &str| s.parse::<f64>().map_err(|_| CliError::Schema(format!("bad number '{s}'")));
    let x = fields[3..3 + dim].iter().map(|s| float(s)).collect::<Result<Vec<_>, _>>()?;
    let tail = &fields[3 + dim..];
    Ok(TraceRow {
        replicate: int(fields[0])?,
        iteration: int(fields[1])?,
        batch_index: int(fields[2])?,
        x,
        y: float(tail[0])?,
        best_so_far: float(tail[1])?,
        design_time_s: float(tail[2])?,
        eval_time_s: float(tail[3])?,
        wall_clock_s: float(tail[4])?,
    })
}

/// Parse a whole rows file into `(dimension, rows)`.
pub fn parse_rows(text: &str) -> Result<(usize, Vec<TraceRow>), CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| CliError::Schema("empty record file".into()))?;
    let dim = dim_from_header(head)?;
    let rows = lines.map(|l| parse_row(l, dim)).collect::<Result<Vec<_>, _>>()?;
    Ok((dim, rows))
}
