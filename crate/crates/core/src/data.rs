//! CSV ingestion and emission for observation series and traces.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mcmc::Trace;
use crate::models::{ObservationSeries, SeriesKind};

fn cells(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim)
}

fn is_numeric_row(line: &str) -> bool {
    cells(line).all(|c| c.parse::<f64>().is_ok())
}

/// Rows of comma-separated numbers with an optional header line.
///
/// The first non-blank line is a header when any of its cells fails to parse
/// as a number. Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_csv(text: &str) -> Result<ObservationSeries> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    if let Some((_, first)) = lines.peek() {
        if !is_numeric_row(first) {
            lines.next();
        }
    }
    let mut values = Vec::new();
    let mut dim = None;
    for (line, l) in lines {
        let mut width = 0;
        for c in cells(l) {
            let v: f64 = c.parse().map_err(|_| Error::Data {
                line,
                message: format!("non-numeric cell `{c}`"),
            })?;
            values.push(v);
            width += 1;
        }
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Data {
                    line,
                    message: format!("ragged row: expected {d} columns, found {width}"),
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or(Error::Data {
        line: text.lines().count().max(1),
        message: "no data rows".into(),
    })?;
    ObservationSeries::new(values, dim, SeriesKind::Raw)
}

pub fn load_csv(path: &Path) -> Result<ObservationSeries> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// One row per time point, columns `y1..yd`, floats in `{:.16e}`.
pub fn write_series_csv<W: Write>(series: &ObservationSeries, mut w: W) -> Result<()> {
    let header: Vec<String> = (1..=series.dim()).map(|j| format!("y{j}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in series.rows() {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Read a trace written by [`Trace::write_csv`]. Columns after the parameters
/// are recognised as extras by name (`sum_m`, `log_nc`).
pub fn parse_trace_csv(text: &str) -> Result<Trace> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Data {
        line: 1,
        message: "empty trace".into(),
    })?;
    let cols: Vec<&str> = cells(header).collect();
    if cols.len() < 3 || cols[0] != "iter" || cols[1] != "accepted" {
        return Err(Error::Data {
            line: 1,
            message: "expected header `iter,accepted,<params...>`".into(),
        });
    }
    let is_extra = |c: &str| c == "sum_m" || c == "log_nc";
    let names: Vec<String> = cols[2..].iter().filter(|c| !is_extra(c)).map(|c| c.to_string()).collect();
    let extras: Vec<String> = cols[2..].iter().filter(|c| is_extra(c)).map(|c| c.to_string()).collect();
    let d = names.len();
    let mut trace = Trace::new(names, extras);
    for (i, l) in lines {
        let line = i + 1;
        let row: Vec<&str> = cells(l).collect();
        if row.len() != cols.len() {
            return Err(Error::Data {
                line,
                message: format!("ragged row: expected {} columns, found {}", cols.len(), row.len()),
            });
        }
        let accepted = match row[1] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Data {
                    line,
                    message: format!("bad accepted flag `{other}`"),
                })
            }
        };
        let nums = row[2..]
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Data {
                    line,
                    message: format!("non-numeric cell `{c}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        trace.push(&nums[..d], accepted, &nums[d..]);
    }
    if trace.is_empty() {
        return Err(Error::Data {
            line: 2,
            message: "trace has no rows".into(),
        });
    }
    Ok(trace)
}

pub fn load_trace_csv(path: &Path) -> Result<Trace> {
    parse_trace_csv(&std::fs::read_to_string(path)?)
}
