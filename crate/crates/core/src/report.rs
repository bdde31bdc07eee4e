//! Subtotals: group records by key columns and sum or count measure columns.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::control::{ControlBlock, ControlError, HeaderMap, Warning};
use crate::record::{join_fields, CsvMode};
use crate::value::{format_number, parse_number};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregate {
    #[default]
    Sum,
    Count,
}

impl Aggregate {
    pub fn parse(text: &str) -> Option<Aggregate> {
        match text.trim().to_ascii_lowercase().as_str() {
            "sum" => Some(Aggregate::Sum),
            "count" => Some(Aggregate::Count),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Aggregate::Sum => "Sum",
            Aggregate::Count => "Count",
        }
    }
}

/// A column named in configuration and its 0-based index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnRef {
    pub name: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtotalJob {
    pub measures: Vec<ColumnRef>,
    pub group_by: Vec<ColumnRef>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubtotalSpec {
    pub jobs: Vec<SubtotalJob>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("record {record}: column `{column}` is not numeric (`{found}`)")]
    NonNumericMeasure { record: usize, column: String, found: String },
}

fn resolve_list(
    text: &str,
    headers: &HeaderMap,
    location: &str,
    warnings: &mut Vec<Warning>,
) -> Result<Vec<ColumnRef>, ControlError> {
    let mut out = Vec::new();
    for raw in text.split(',') {
        let name = raw.trim();
        if name.is_empty() {
            return Err(ControlError::BadControlTable { cell: location.to_string(), message: "empty column name".into() });
        }
        // One space either side of a separator is normal layout.
        if raw.starts_with("  ") || raw.ends_with("  ") {
            warnings.push(Warning { location: location.to_string(), message: alloc::format!("superfluous spaces in `{raw}`") });
        }
        let index = headers.index_of(name).ok_or_else(|| ControlError::UnknownColumn(name.to_string()))?;
        out.push(ColumnRef { name: headers.names()[index].clone(), index });
    }
    Ok(out)
}

fn build_job(
    measures: &str,
    group_by: &str,
    aggregate: Aggregate,
    headers: &HeaderMap,
    location: &str,
    warnings: &mut Vec<Warning>,
) -> Result<SubtotalJob, ControlError> {
    let measures = resolve_list(measures, headers, location, warnings)?;
    let group_by = resolve_list(group_by, headers, location, warnings)?;
    if let Some(c) = measures.iter().find(|m| group_by.iter().any(|g| g.index == m.index)) {
        return Err(ControlError::BadControlTable {
            cell: location.to_string(),
            message: alloc::format!("`{}` is both measured and grouped on", c.name),
        });
    }
    Ok(SubtotalJob { measures, group_by, aggregate })
}

/// Parse one job line, `Number, Amount : Item, Colour [: count]`.
pub fn parse_subtotal_job(line: &str, headers: &HeaderMap) -> Result<(SubtotalJob, Vec<Warning>), ControlError> {
    let mut warnings = Vec::new();
    let parts: Vec<&str> = line.split(':').collect();
    let bad = |message: &str| ControlError::BadControlTable { cell: alloc::format!("job `{line}`"), message: message.into() };
    let aggregate = match parts.len() {
        2 => Aggregate::Sum,
        3 => Aggregate::parse(parts[2]).ok_or_else(|| bad("aggregate must be sum or count"))?,
        _ => return Err(bad("expected `measures : group columns [: sum|count]`")),
    };
    let job = build_job(parts[0], parts[1], aggregate, headers, &alloc::format!("job `{line}`"), &mut warnings)?;
    Ok((job, warnings))
}

/// Read a subtotal control table. The first row holds labels; each later
/// non-empty row is an independent job with measures in the first column,
/// group columns in the second and an optional aggregate in the third.
pub fn parse_subtotal_spec(block: &ControlBlock, headers: &HeaderMap) -> Result<(SubtotalSpec, Vec<Warning>), ControlError> {
    let mut warnings = Vec::new();
    let mut jobs = Vec::new();
    for (r, row) in block.rows.iter().enumerate().skip(1) {
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if let Some(c) = row.iter().enumerate().skip(3).find(|(_, c)| !c.trim().is_empty()).map(|(c, _)| c) {
            return Err(block.bad(r, c, "value outside the documented table"));
        }
        let measures = block.trimmed(r, 0, &mut warnings);
        let group_by = block.trimmed(r, 1, &mut warnings);
        if measures.trim().is_empty() {
            return Err(block.bad(r, 0, "missing measure columns"));
        }
        if group_by.trim().is_empty() {
            return Err(block.bad(r, 1, "missing group columns"));
        }
        let agg_text = block.trimmed(r, 2, &mut warnings);
        let aggregate = if agg_text.trim().is_empty() {
            Aggregate::Sum
        } else {
            Aggregate::parse(&agg_text).ok_or_else(|| block.bad(r, 2, "aggregate must be sum or count"))?
        };
        jobs.push(build_job(&measures, &group_by, aggregate, headers, &block.locate(r, 0), &mut warnings)?);
    }
    Ok((SubtotalSpec { jobs }, warnings))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub key: Vec<String>,
    pub values: Vec<f64>,
}

/// Group-key columns followed by one aggregate column per measure, rows in
/// key order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub headers: Vec<String>,
    pub group_columns: usize,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn empty(job: &SubtotalJob) -> Self {
        let mut headers: Vec<String> = job.group_by.iter().map(|c| c.name.clone()).collect();
        headers.extend(job.measures.iter().map(|m| alloc::format!("{} of {}", job.aggregate.label(), m.name)));
        ReportTable { headers, group_columns: job.group_by.len(), rows: Vec::new() }
    }

    pub fn records(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.rows.iter().map(|r| {
            let mut fields = r.key.clone();
            fields.extend(r.values.iter().map(|v| format_number(*v)));
            fields
        })
    }
}

fn field<S: AsRef<str>>(record: &[S], i: usize) -> &str {
    record.get(i).map_or("", AsRef::as_ref)
}

fn accumulate<S: AsRef<str>>(
    records: &[Vec<S>],
    job: &SubtotalJob,
    mut on_error: impl FnMut(ReportError) -> Result<(), ReportError>,
) -> Result<ReportTable, ReportError> {
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    'records: for (i, record) in records.iter().enumerate() {
        let mut amounts = Vec::with_capacity(job.measures.len());
        for m in &job.measures {
            match job.aggregate {
                Aggregate::Count => amounts.push(1.0),
                Aggregate::Sum => match parse_number(field(record, m.index)) {
                    Some(x) => amounts.push(x),
                    None => {
                        on_error(ReportError::NonNumericMeasure {
                            record: i + 1,
                            column: m.name.clone(),
                            found: field(record, m.index).to_string(),
                        })?;
                        continue 'records;
                    }
                },
            }
        }
        let key: Vec<String> = job.group_by.iter().map(|g| field(record, g.index).to_string()).collect();
        let totals = groups.entry(key).or_insert_with(|| alloc::vec![0.0; job.measures.len()]);
        for (t, a) in totals.iter_mut().zip(amounts) {
            *t += a;
        }
    }
    let mut table = ReportTable::empty(job);
    table.rows = groups.into_iter().map(|(key, values)| ReportRow { key, values }).collect();
    Ok(table)
}

/// Aggregate data records (no header) for one job, stopping at the first
/// non-numeric measure. Record numbers in errors are 1-based.
pub fn aggregate<S: AsRef<str>>(records: &[Vec<S>], job: &SubtotalJob) -> Result<ReportTable, ReportError> {
    accumulate(records, job, Err)
}

/// Like [`aggregate`] but leaves out records with non-numeric measures and
/// returns them alongside the table.
pub fn aggregate_lenient<S: AsRef<str>>(records: &[Vec<S>], job: &SubtotalJob) -> (ReportTable, Vec<ReportError>) {
    let mut errors = Vec::new();
    let table = accumulate(records, job, |e| {
        errors.push(e);
        Ok(())
    })
    .unwrap_or_else(|_| ReportTable::empty(job));
    (table, errors)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Csv,
    AlignedText,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::AlignedText => "aligned-text",
        })
    }
}

pub fn render_report(table: &ReportTable, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&join_fields(&table.headers, CsvMode::Rfc4180));
            out.push('\n');
            for record in table.records() {
                out.push_str(&join_fields(&record, CsvMode::Rfc4180));
                out.push('\n');
            }
        }
        ReportFormat::AlignedText => {
            let lines: Vec<Vec<String>> = core::iter::once(table.headers.clone()).chain(table.records()).collect();
            let mut widths = alloc::vec![0usize; table.headers.len()];
            for line in &lines {
                for (w, cell) in widths.iter_mut().zip(line) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            for line in &lines {
                let mut text = String::new();
                for (c, (cell, w)) in line.iter().zip(&widths).enumerate() {
                    if c > 0 {
                        text.push_str("  ");
                    }
                    let pad = w - cell.chars().count();
                    if c >= table.group_columns {
                        text.extend(core::iter::repeat_n(' ', pad));
                        text.push_str(cell);
                    } else {
                        text.push_str(cell);
                        text.extend(core::iter::repeat_n(' ', pad));
                    }
                }
                out.push_str(text.trim_end());
                out.push('\n');
            }
        }
    }
    out
}
