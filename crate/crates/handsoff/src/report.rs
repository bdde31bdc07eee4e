//! Subtotal reports over a data file or over records handed on by the
//! pipeline.

use std::path::{Path, PathBuf};

use handsoff_core::control::{ControlBlock, HeaderMap};
use handsoff_core::record::{join_fields, CsvMode, Record};
use handsoff_core::report::{aggregate, aggregate_lenient, parse_subtotal_job, parse_subtotal_spec, render_report, ReportFormat, ReportTable, SubtotalJob};

use crate::csvio::{read_error, AtomicWriter, RecordReader};
use crate::error::{Error, Result};
use crate::pipeline::{Diagnostics, OnRecordError};

/// Subtotal jobs as written in the job file, resolved against the data's
/// header line when the report runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubtotalSource {
    /// `job = ...` lines with their line numbers.
    Lines(Vec<(usize, String)>),
    /// A control table from the workbook; each row after the labels is a job.
    Block(ControlBlock),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtotalConfig {
    pub source: SubtotalSource,
    /// Data file for `report` when none is given on the command line.
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub format: ReportFormat,
    /// Where to dump the records the report was built from.
    pub raw_out: Option<PathBuf>,
}

impl SubtotalConfig {
    pub fn resolve(&self, headers: &HeaderMap, job_path: &Path) -> Result<(Vec<SubtotalJob>, Vec<String>)> {
        let mut warnings = Vec::new();
        let jobs = match &self.source {
            SubtotalSource::Lines(lines) => {
                let mut jobs = Vec::new();
                for (line, text) in lines {
                    let (job, w) = parse_subtotal_job(text, headers)
                        .map_err(|e| Error::Validation(format!("{}:{line}: {e}", job_path.display())))?;
                    warnings.extend(w.iter().map(|w| format!("{}:{line}: {w}", job_path.display())));
                    jobs.push(job);
                }
                jobs
            }
            SubtotalSource::Block(block) => {
                let (spec, w) = parse_subtotal_spec(block, headers).map_err(|e| Error::Validation(e.to_string()))?;
                warnings.extend(w.iter().map(ToString::to_string));
                spec.jobs
            }
        };
        Ok((jobs, warnings))
    }
}

/// Build every configured table from in-memory records and write them,
/// separated by blank lines, to the configured output.
pub fn write_report(
    config: &SubtotalConfig,
    job_path: &Path,
    data_path: &Path,
    header: &[String],
    records: &[Record],
    on_error: OnRecordError,
    diag: &mut Diagnostics,
) -> Result<Vec<ReportTable>> {
    let (jobs, warnings) = config.resolve(&HeaderMap::new(header), job_path)?;
    for w in &warnings {
        diag.warn(w);
    }
    let mut tables = Vec::with_capacity(jobs.len());
    for job in &jobs {
        let table = match on_error {
            OnRecordError::FailFast => aggregate(records, job).map_err(|e| match e {
                handsoff_core::report::ReportError::NonNumericMeasure { record, column, found } => {
                    Error::data(data_path, record, format!("column `{column}` is not numeric (`{found}`)"))
                }
                other => Error::Validation(other.to_string()),
            })?,
            OnRecordError::SkipAndLog => {
                let (table, errors) = aggregate_lenient(records, job);
                for e in errors {
                    diag.warn(&format!("{}: {e}", data_path.display()));
                }
                table
            }
        };
        tables.push(table);
    }
    let mut out = AtomicWriter::create(&config.output)?;
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.write_str("\n")?;
        }
        out.write_str(&render_report(t, config.format))?;
    }
    out.finish()?;
    Ok(tables)
}

/// Dump the records a report is built from, header first.
pub fn write_raw(path: &Path, header: &[String], records: &[Record]) -> Result<()> {
    let mut out = AtomicWriter::create(path)?;
    out.write_line(&join_fields(header, CsvMode::Rfc4180))?;
    for r in records {
        out.write_line(&join_fields(r, CsvMode::Rfc4180))?;
    }
    out.finish()
}

/// Read a data file whose first line names the columns.
pub fn read_table(path: &Path, mode: CsvMode, max_rows: Option<usize>) -> Result<(Record, Vec<Record>)> {
    let mut reader = RecordReader::open(path, mode)?;
    let header = reader
        .read_record()
        .map_err(|e| read_error(path, e))?
        .ok_or_else(|| Error::Validation(format!("{}: no header line to name the columns", path.display())))?;
    let mut records = Vec::new();
    while let Some(r) = reader.read_record().map_err(|e| read_error(path, e))? {
        records.push(r.fields);
        if max_rows.is_some_and(|m| records.len() > m) {
            return Err(Error::Validation(format!("{}: more than {} data records", path.display(), max_rows.unwrap())));
        }
    }
    Ok((header.fields, records))
}
