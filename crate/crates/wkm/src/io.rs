//! CSV and JSON input/output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wkm_core::experiments::{ConvergenceRow, TailscanRow, CONVERGENCE_HEADER, TAILSCAN_HEADER};

/// Reads one numeric column. A first row that does not parse as a number is
/// taken as a header; `column` selects by header name, otherwise the first
/// column is used.
pub fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut values = Vec::new();
    let mut index = if column.is_some() { None } else { Some(0) };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: reading line {}", path.display(), line + 1))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if line == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            if let Some(name) = column {
                match rec.iter().position(|h| h == name) {
                    Some(i) => index = Some(i),
                    None => bail!("{}: no column named `{name}`", path.display()),
                }
            }
            continue;
        }
        let Some(i) = index else { bail!("{}: a header row is needed to select a column by name", path.display()) };
        let field = rec.get(i).with_context(|| format!("{}: line {} has no column {}", path.display(), line + 1, i + 1))?;
        let v: f64 = field.parse().with_context(|| format!("{}: line {}: `{field}` is not a number", path.display(), line + 1))?;
        values.push(v);
    }
    if values.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(values)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

pub fn write_column(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([header])?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.metric.as_str().to_string(),
            r.n.to_string(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.m.to_string(),
            r.seed.to_string(),
            r.floor.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tailscan(path: &Path, rows: &[TailscanRow], n_ref: u64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TAILSCAN_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let b = r.bound;
        w.write_record([
            r.r.to_string(),
            r.tail_remainder.to_string(),
            r.tail_probability.to_string(),
            r.m3.to_string(),
            r.tau_r2.to_string(),
            opt(b.map(|b| b.core)),
            opt(b.map(|b| b.tail)),
            opt(b.map(|b| b.weight)),
            opt(b.map(|b| b.total)),
            n_ref.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline, to `path` or stdout.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
