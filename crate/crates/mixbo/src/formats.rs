//! CSV and JSON exchange formats.
//!
//! Batch sheets and result files share one layout: `id`, one column per
//! component (molar), optional prediction columns, then `replicate_1..n`.
//! Readers ignore columns they do not use, so a filled-in batch sheet is a
//! valid results file.

use std::io::{Read, Write};

use mixbo_core::acquisition::BatchSuggestion;
use mixbo_core::campaign::{FrontMember, Measurement, MetricRecord, ResultEntry, Source};
use mixbo_core::space::{ComponentSet, Formulation, FormulationId};
use serde::Serialize;

use crate::error::{AppError, Result};

pub const ID_COLUMN: &str = "id";
pub const REPLICATE_PREFIX: &str = "replicate_";

fn csv_err(e: csv::Error) -> AppError {
    match e.position() {
        Some(p) => AppError::Row {
            row: p.line() as usize,
            message: e.to_string(),
        },
        None => AppError::Validation(format!("csv: {e}")),
    }
}

fn write_err(e: csv::Error) -> AppError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AppError::io("<output>", io),
        other => AppError::Validation(format!("csv: {other:?}")),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_pool<W: Write>(space: &ComponentSet, pool: &[Formulation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(space.names.iter().cloned());
    header.push("total".into());
    w.write_record(&header).map_err(write_err)?;
    for f in pool {
        let mut row = vec![f.id().to_string()];
        row.extend(f.concentrations().into_iter().map(fmt_f64));
        row.push(fmt_f64(f.total()));
        w.write_record(&row).map_err(write_err)?;
    }
    w.flush().map_err(|e| AppError::io("<output>", e))
}

/// Batch sheet with predictions and `replicates` empty result columns.
pub fn write_batch_sheet<W: Write>(
    space: &ComponentSet,
    batch: &BatchSuggestion,
    replicates: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(space.names.iter().cloned());
    header.extend(["predicted_mean", "predicted_sd", "score"].map(String::from));
    header.extend((1..=replicates).map(|i| format!("{REPLICATE_PREFIX}{i}")));
    w.write_record(&header).map_err(write_err)?;
    for c in &batch.candidates {
        let mut row = vec![c.formulation.id().to_string()];
        row.extend(c.formulation.concentrations().into_iter().map(fmt_f64));
        row.push(c.mean.map(fmt_f64).unwrap_or_default());
        row.push(c.sd.map(fmt_f64).unwrap_or_default());
        row.push(fmt_f64(c.score));
        row.extend((0..replicates).map(|_| String::new()));
        w.write_record(&row).map_err(write_err)?;
    }
    w.flush().map_err(|e| AppError::io("<output>", e))
}

struct Layout {
    id: Option<usize>,
    components: Option<Vec<usize>>,
    replicates: Vec<usize>,
}

fn layout(headers: &csv::StringRecord, space: &ComponentSet) -> Result<Layout> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let components: Vec<Option<usize>> = space.names.iter().map(|n| find(n)).collect();
    let components = if components.iter().all(Option::is_some) {
        Some(components.into_iter().flatten().collect())
    } else if components.iter().all(Option::is_none) {
        None
    } else {
        let missing: Vec<&str> = space
            .names
            .iter()
            .zip(&components)
            .filter(|(_, c)| c.is_none())
            .map(|(n, _)| n.as_str())
            .collect();
        return Err(AppError::Validation(format!(
            "missing component columns: {}",
            missing.join(", ")
        )));
    };
    let mut replicates: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.trim()
                .strip_prefix(REPLICATE_PREFIX)
                .and_then(|k| k.parse::<usize>().ok())
                .map(|k| (k, i))
        })
        .collect();
    replicates.sort();
    if replicates.is_empty() {
        return Err(AppError::Validation(format!(
            "no {REPLICATE_PREFIX}N columns in header"
        )));
    }
    let id = find(ID_COLUMN);
    if id.is_none() && components.is_none() {
        return Err(AppError::Validation(format!(
            "header needs an {ID_COLUMN:?} column or every component column"
        )));
    }
    Ok(Layout {
        id,
        components,
        replicates: replicates.into_iter().map(|(_, i)| i).collect(),
    })
}

struct Row {
    formulation: Option<Formulation>,
    id: FormulationId,
    replicates: Vec<f64>,
}

fn parse_row(
    record: &csv::StringRecord,
    layout: &Layout,
    space: &ComponentSet,
    line: usize,
) -> Result<Row> {
    let row_err = |message: String| AppError::Row { row: line, message };
    let cell = |i: usize| record.get(i).unwrap_or("").trim();
    let number = |i: usize, what: &str| -> Result<f64> {
        let s = cell(i);
        let v: f64 = s
            .parse()
            .map_err(|_| row_err(format!("{what} {s:?} is not a number")))?;
        if !v.is_finite() {
            return Err(row_err(format!("{what} {s:?} is not finite")));
        }
        Ok(v)
    };
    let formulation = match &layout.components {
        Some(cols) => {
            let conc = cols
                .iter()
                .zip(&space.names)
                .map(|(&i, n)| number(i, n))
                .collect::<Result<Vec<_>>>()?;
            Some(
                space
                    .formulation(&conc)
                    .map_err(|e| row_err(e.to_string()))?,
            )
        }
        None => None,
    };
    let id = match (layout.id.map(cell).filter(|s| !s.is_empty()), &formulation) {
        (Some(s), f) => {
            let id: FormulationId = s
                .parse()
                .map_err(|e: mixbo_core::Error| row_err(e.to_string()))?;
            if let Some(f) = f {
                if f.id() != id {
                    return Err(row_err(format!(
                        "id {id} does not match the composition (expected {})",
                        f.id()
                    )));
                }
            }
            id
        }
        (None, Some(f)) => f.id(),
        (None, None) => return Err(row_err("missing formulation id".into())),
    };
    let mut replicates = Vec::new();
    for (k, &i) in layout.replicates.iter().enumerate() {
        if cell(i).is_empty() {
            continue;
        }
        replicates.push(number(i, &format!("{REPLICATE_PREFIX}{}", k + 1))?);
    }
    Ok(Row {
        formulation,
        id,
        replicates,
    })
}

fn rows<R: Read>(input: R, space: &ComponentSet) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let layout = layout(&headers, space)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        out.push(parse_row(&record, &layout, space, line)?);
    }
    Ok(out)
}

/// Reads a results file. Rows whose replicate cells are all blank are
/// skipped, which lets a partially filled batch sheet be ingested.
pub fn read_results<R: Read>(input: R, space: &ComponentSet) -> Result<Vec<ResultEntry>> {
    Ok(rows(input, space)?
        .into_iter()
        .filter(|r| !r.replicates.is_empty())
        .map(|r| ResultEntry {
            id: r.id,
            replicates: r.replicates,
        })
        .collect())
}

/// Reads an initial-data file; every row needs the component columns.
pub fn read_measurements<R: Read>(
    input: R,
    space: &ComponentSet,
    source: Source,
) -> Result<Vec<Measurement>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let layout = layout(&headers, space)?;
    if layout.components.is_none() {
        return Err(AppError::Validation(
            "initial data needs every component column".into(),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let row = parse_row(&record, &layout, space, line)?;
        if row.replicates.is_empty() {
            return Err(AppError::Row {
                row: line,
                message: "no replicate values".into(),
            });
        }
        out.push(Measurement {
            formulation: row.formulation.expect("component columns present"),
            replicates: row.replicates,
            source,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Table,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

/// Renders rows as CSV or as an aligned text table.
pub fn render_rows(header: &[&str], rows: &[Vec<String>], format: Format) -> String {
    match format {
        Format::Table => {
            let widths: Vec<usize> = (0..header.len())
                .map(|i| {
                    rows.iter()
                        .map(|r| r[i].len())
                        .chain([header[i].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let mut out = line(header.to_vec());
            out.push('\n');
            for r in rows {
                out.push_str(&line(r.iter().map(String::as_str).collect()));
                out.push('\n');
            }
            out
        }
        _ => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header).expect("in-memory csv");
            for r in rows {
                w.write_record(r).expect("in-memory csv");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
        }
    }
}

pub fn metric_rows(metrics: &[MetricRecord]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec!["iteration", "observations", "hypervolume", "igd", "clamped"];
    let rows = metrics
        .iter()
        .map(|m| {
            vec![
                m.iteration.to_string(),
                m.observations.to_string(),
                fmt_f64(m.hypervolume),
                m.igd.map(fmt_f64).unwrap_or_default(),
                m.clamped.to_string(),
            ]
        })
        .collect();
    (header, rows)
}

pub fn front_rows(space: &ComponentSet, front: &[FrontMember]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(space.names.iter().cloned());
    header.extend(
        [
            "concentration",
            "viability",
            "norm_concentration",
            "norm_viability",
        ]
        .map(String::from),
    );
    let rows = front
        .iter()
        .map(|m| {
            let mut row = vec![m.formulation.id().to_string()];
            row.extend(m.formulation.concentrations().into_iter().map(fmt_f64));
            row.push(fmt_f64(m.concentration));
            row.push(fmt_f64(m.viability));
            row.extend(m.normalized.iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();
    (header, rows)
}
