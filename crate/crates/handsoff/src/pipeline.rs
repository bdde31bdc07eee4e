//! Streaming a delimited file through a workbook, and comparing two sorted
//! files through one.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use handsoff_core::address::CellAddress;
use handsoff_core::control::validate_headers;
use handsoff_core::record::{join_fields, split_fields, CsvMode, Record};
use handsoff_core::stream::{
    compare_streams, render_line, CompareError, CompareStepper, Difference, FieldCountPolicy, Outcome, RecordProcessor,
    StreamLayout,
};
use handsoff_core::value::CellValue;
use handsoff_core::workbook::Workbook;
use serde::Serialize;

use crate::csvio::{read_error, AtomicWriter, RecordReader};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeaderPolicy {
    /// The first line is copied to the output unchanged.
    #[default]
    PassThrough,
    /// As pass-through, after checking it against the expected headers.
    Validate,
    /// The input has no header line.
    None,
}

impl HeaderPolicy {
    pub fn parse(text: &str) -> Option<HeaderPolicy> {
        match text {
            "pass-through" => Some(HeaderPolicy::PassThrough),
            "validate" => Some(HeaderPolicy::Validate),
            "none" => Some(HeaderPolicy::None),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OnRecordError {
    #[default]
    FailFast,
    SkipAndLog,
}

impl OnRecordError {
    pub fn parse(text: &str) -> Option<OnRecordError> {
        match text {
            "fail-fast" => Some(OnRecordError::FailFast),
            "skip-and-log" | "lenient" => Some(OnRecordError::SkipAndLog),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpectedHeaders {
    pub columns: Vec<String>,
    pub trim: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSpec {
    pub input_path: PathBuf,
    pub output_path: PathBuf,
    pub input_range: String,
    pub output_range: String,
    pub skip_cell: Option<String>,
    pub skip_sentinel: CellValue,
    pub carry_forward_range: Option<String>,
    pub header_policy: HeaderPolicy,
    pub expected_headers: Option<ExpectedHeaders>,
    pub csv_mode: CsvMode,
    pub field_count_policy: FieldCountPolicy,
    pub on_record_error: OnRecordError,
}

impl PipelineSpec {
    pub fn layout(&self, wb: &Workbook) -> Result<StreamLayout> {
        let mut layout = StreamLayout::from_names(
            wb,
            &self.input_range,
            &self.output_range,
            self.skip_cell.as_deref(),
            self.carry_forward_range.as_deref(),
        )
        .map_err(|e| Error::Validation(e.to_string()))?;
        layout.skip_sentinel = self.skip_sentinel.clone();
        Ok(layout)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub records_read: usize,
    pub records_written: usize,
    pub records_skipped: usize,
    pub records_errored: usize,
    pub header_passed: bool,
    pub elapsed: f64,
}

impl RunStats {
    pub fn summary(&self) -> String {
        format!(
            "records read: {}, written: {}, skipped: {}, errored: {}",
            self.records_read, self.records_written, self.records_skipped, self.records_errored
        )
    }
}

/// Where progress lines and record diagnostics go.
pub struct Diagnostics<'a> {
    out: &'a mut dyn Write,
    pub progress_every: usize,
    pub quiet: bool,
}

impl<'a> Diagnostics<'a> {
    pub fn new(out: &'a mut dyn Write, progress_every: usize, quiet: bool) -> Self {
        Diagnostics { out, progress_every: progress_every.max(1), quiet }
    }

    /// Called after each record with the running count.
    pub fn progress(&mut self, processed: usize) {
        if !self.quiet && processed.is_multiple_of(self.progress_every) {
            let _ = writeln!(self.out, "records processed: {processed}");
        }
    }

    pub fn info(&mut self, message: &str) {
        if !self.quiet {
            let _ = writeln!(self.out, "{message}");
        }
    }

    pub fn warn(&mut self, message: &str) {
        let _ = writeln!(self.out, "warning: {message}");
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub max_rows: Option<usize>,
    /// Keep the output records in memory for a following report.
    pub collect: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineOutput {
    pub stats: RunStats,
    pub header: Option<Record>,
    /// Output records, when collected.
    pub records: Vec<Record>,
}

pub fn run_pipeline(spec: &PipelineSpec, wb: &mut Workbook, opts: &RunOptions, diag: &mut Diagnostics) -> Result<PipelineOutput> {
    let started = Instant::now();
    let input = spec.input_path.as_path();
    let layout = spec.layout(wb)?;
    let mut reader = RecordReader::open(input, spec.csv_mode)?;
    let mut writer = AtomicWriter::create(&spec.output_path)?;
    let mut out = PipelineOutput::default();

    if spec.header_policy != HeaderPolicy::None {
        if let Some(header) = reader.read_record().map_err(|e| read_error(input, e))? {
            if let (HeaderPolicy::Validate, Some(expected)) = (spec.header_policy, &spec.expected_headers) {
                let check = validate_headers(&header.fields, &expected.columns, expected.trim);
                for w in &check.warnings {
                    diag.warn(&format!("{}: {w}", input.display()));
                }
                if let Some(m) = check.mismatch {
                    return Err(Error::Validation(format!("{}: {m}", input.display())));
                }
            }
            writer.write_line(&header.text)?;
            out.stats.header_passed = true;
            out.header = Some(header.fields);
        }
    } else if let Some(expected) = &spec.expected_headers {
        out.header = Some(expected.columns.clone());
    }

    let mut processor = RecordProcessor::new(wb, &layout, spec.field_count_policy, spec.csv_mode)
        .map_err(|e| Error::Validation(e.to_string()))?;
    while let Some(record) = reader.read_record().map_err(|e| read_error(input, e))? {
        out.stats.records_read += 1;
        let n = out.stats.records_read;
        if opts.max_rows.is_some_and(|max| n > max) {
            return Err(Error::Validation(format!(
                "{}: more than {} data records; raise max_rows in [limits]",
                input.display(),
                opts.max_rows.unwrap()
            )));
        }
        match processor.process(&record.fields) {
            Ok(Outcome::Kept(values)) => {
                let line = render_line(&values, spec.csv_mode);
                writer.write_line(&line)?;
                if opts.collect {
                    out.records.push(split_fields(&line, spec.csv_mode).unwrap_or_else(|_| vec![line]));
                }
                out.stats.records_written += 1;
            }
            Ok(Outcome::Skipped) => out.stats.records_skipped += 1,
            Err(e) => match spec.on_record_error {
                OnRecordError::FailFast => {
                    return Err(Error::data(input, n, format!("line {}: {e}", record.line)));
                }
                OnRecordError::SkipAndLog => {
                    out.stats.records_errored += 1;
                    diag.warn(&format!("{}: record {n} (line {}): {e}", input.display(), record.line));
                }
            },
        }
        diag.progress(n);
    }
    writer.finish()?;
    out.stats.elapsed = started.elapsed().as_secs_f64();
    debug_assert_eq!(
        out.stats.records_read,
        out.stats.records_written + out.stats.records_skipped + out.stats.records_errored
    );
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompareSpec {
    pub left_path: PathBuf,
    pub right_path: PathBuf,
    pub left_range: String,
    pub right_range: String,
    pub status_cell: String,
    pub output_path: Option<PathBuf>,
    pub has_headings: bool,
    pub field_diffs: bool,
    pub csv_mode: CsvMode,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompareReport {
    pub differences: Vec<Difference>,
    pub left_records: usize,
    pub right_records: usize,
}

impl CompareReport {
    /// CSV with columns `side,left_record,right_record,column,left,right`.
    /// One-sided records appear whole, re-joined, in the left or right column.
    pub fn render(&self, mode: CsvMode) -> String {
        let mut out = String::from("side,left_record,right_record,column,left,right\n");
        for d in &self.differences {
            let row: Vec<String> = match d {
                Difference::LeftOnly { index, record } => {
                    vec!["LEFT".into(), index.to_string(), String::new(), String::new(), join_fields(record, mode), String::new()]
                }
                Difference::RightOnly { index, record } => {
                    vec!["RIGHT".into(), String::new(), index.to_string(), String::new(), String::new(), join_fields(record, mode)]
                }
                Difference::Field { left_index, right_index, column, left, right } => vec![
                    "FIELD".into(),
                    left_index.to_string(),
                    right_index.to_string(),
                    column.to_string(),
                    left.clone(),
                    right.clone(),
                ],
            };
            out.push_str(&join_fields(&row, CsvMode::Rfc4180));
            out.push('\n');
        }
        out
    }
}

fn data_records(path: &Path, mode: CsvMode, skip_header: bool) -> Result<impl Iterator<Item = Result<Record>>> {
    let reader = RecordReader::open(path, mode)?;
    let owned = path.to_path_buf();
    Ok(reader.skip(usize::from(skip_header)).map(move |r| r.map(|r| r.fields).map_err(|e| read_error(&owned, e))))
}

/// Merge two files sorted on the comparison key, asking the workbook's
/// status cell which side is behind at each step.
pub fn compare_files(spec: &CompareSpec, wb: &mut Workbook) -> Result<CompareReport> {
    let resolve = |name: &str| wb.resolve_name(name).cloned().map_err(|e| Error::Validation(e.to_string()));
    let left_range = resolve(&spec.left_range)?;
    let right_range = resolve(&spec.right_range)?;
    let status_range = resolve(&spec.status_cell)?;
    if !status_range.is_single() {
        return Err(Error::Validation(format!("status cell `{}` must be a single cell", spec.status_cell)));
    }
    let status = CellAddress::new(status_range.sheet.clone(), status_range.start.row, status_range.start.col);
    let mut stepper =
        CompareStepper::new(wb, &left_range, &right_range, &status).map_err(|e| Error::Validation(e.to_string()))?;
    let mut report = CompareReport::default();
    let (mut nl, mut nr) = (0, 0);
    let left = data_records(&spec.left_path, spec.csv_mode, spec.has_headings)?.inspect(|_| nl += 1);
    let right = data_records(&spec.right_path, spec.csv_mode, spec.has_headings)?.inspect(|_| nr += 1);
    compare_streams(&mut stepper, left, right, spec.field_diffs, |d| {
        report.differences.push(d);
        Ok(())
    })
    .map_err(|e| match e {
        CompareError::Source(e) => e,
        CompareError::Status { left_index, right_index, source } => {
            Error::data(&spec.left_path, left_index, format!("against right record {right_index}: {source}"))
        }
    })?;
    report.left_records = nl;
    report.right_records = nr;
    if let Some(path) = &spec.output_path {
        let mut w = AtomicWriter::create(path)?;
        w.write_str(&report.render(spec.csv_mode))?;
        w.finish()?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_lines() {
        let count = |every: usize, records: usize, quiet: bool| {
            let mut buf = Vec::new();
            let mut d = Diagnostics::new(&mut buf, every, quiet);
            for n in 1..=records {
                d.progress(n);
            }
            String::from_utf8(buf).unwrap().lines().count()
        };
        assert_eq!(count(10_000, 25_000, false), 2);
        assert_eq!(count(1, 3, false), 3);
        assert_eq!(count(1, 3, true), 0);
    }
}
