//! The command-line operations, callable without spawning the binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use handsoff_core::calc::{evaluate, EvalContext};
use handsoff_core::collate::KeyColumn;
use handsoff_core::control::{validate_headers, HeaderMap};
use handsoff_core::parser::parse_formula;
use handsoff_core::record::CsvMode;
use handsoff_core::stream::{CompareStepper, RecordProcessor};
use handsoff_core::workbook::Workbook;

use crate::config::{load_definition, load_job, Job};
use crate::csvio::{read_error, RecordReader};
use crate::error::{Error, Result};
use crate::pipeline::{compare_files, run_pipeline, CompareReport, Diagnostics, HeaderPolicy, OnRecordError, RunOptions, RunStats};
use crate::report::{read_table, write_raw, write_report};
use crate::sortio::{sort_file, MissingKey, SortOptions, SortStats};

/// Command-line settings that override the job file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Overrides {
    pub csv_mode: Option<CsvMode>,
    pub on_record_error: Option<OnRecordError>,
    pub raw_out: Option<PathBuf>,
    pub stats_json: Option<PathBuf>,
    pub progress_every: usize,
    pub quiet: bool,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides { csv_mode: None, on_record_error: None, raw_out: None, stats_json: None, progress_every: 10_000, quiet: false }
    }
}

fn open_job(path: &Path, diag: &mut Diagnostics) -> Result<Job> {
    let job = load_job(path)?;
    for w in &job.warnings {
        diag.warn(w);
    }
    Ok(job)
}

fn workbook(job: &Job) -> Result<Workbook> {
    job.workbook()
        .cloned()
        .ok_or_else(|| Error::Validation(format!("{}: no definition file given", job.path.display())))
}

fn write_stats_json<T: serde::Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("plain struct");
        std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn sort_options(job: &Job, ov: &Overrides, mode: CsvMode) -> SortOptions {
    SortOptions {
        csv_mode: ov.csv_mode.unwrap_or(mode),
        missing_key: match ov.on_record_error {
            Some(OnRecordError::SkipAndLog) => MissingKey::Empty,
            _ => MissingKey::Fail,
        },
        max_rows: Some(job.limits.max_rows),
    }
}

/// Sort (if configured), stream, then report (if configured).
pub fn run(job_path: &Path, ov: &Overrides, diag: &mut Diagnostics, out: &mut dyn Write) -> Result<RunStats> {
    let job = open_job(job_path, diag)?;
    let mut spec = job
        .pipeline
        .clone()
        .ok_or_else(|| Error::Validation(format!("{}: no [pipeline] section", job_path.display())))?;
    if let Some(m) = ov.csv_mode {
        spec.csv_mode = m;
    }
    if let Some(e) = ov.on_record_error {
        spec.on_record_error = e;
    }
    if let Some(sort) = &job.sort {
        let stats = sort_file(sort, &sort_options(&job, ov, spec.csv_mode))?;
        diag.info(&format!("sorted {} records into {}", stats.rows, sort.output.display()));
    }
    let mut wb = workbook(&job)?;
    let opts = RunOptions { max_rows: Some(job.limits.max_rows), collect: job.subtotals.is_some() };
    let result = run_pipeline(&spec, &mut wb, &opts, diag)?;
    if let Some(sub) = &job.subtotals {
        let header = result.header.clone().ok_or_else(|| {
            Error::Validation(format!("{}: subtotals need column names; the input has no header", job_path.display()))
        })?;
        if let Some(raw) = ov.raw_out.as_ref().or(sub.raw_out.as_ref()) {
            write_raw(raw, &header, &result.records)?;
        }
        write_report(sub, job_path, &spec.output_path, &header, &result.records, spec.on_record_error, diag)?;
    }
    write_stats_json(&ov.stats_json, &result.stats)?;
    if !ov.quiet {
        let _ = writeln!(out, "{}", result.stats.summary());
    }
    Ok(result.stats)
}

pub fn sort(job_path: &Path, ov: &Overrides, diag: &mut Diagnostics, out: &mut dyn Write) -> Result<SortStats> {
    let job = open_job(job_path, diag)?;
    let sort = job.sort.as_ref().ok_or_else(|| Error::Validation(format!("{}: no [sort] section", job_path.display())))?;
    let mode = job.pipeline.as_ref().map_or(CsvMode::Rfc4180, |p| p.csv_mode);
    let stats = sort_file(sort, &sort_options(&job, ov, mode))?;
    write_stats_json(&ov.stats_json, &stats)?;
    if !ov.quiet {
        let _ = writeln!(out, "sorted {} records", stats.rows);
    }
    Ok(stats)
}

pub fn report(job_path: &Path, data: Option<&Path>, ov: &Overrides, diag: &mut Diagnostics, out: &mut dyn Write) -> Result<usize> {
    let job = open_job(job_path, diag)?;
    let sub = job
        .subtotals
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("{}: no [subtotals] section", job_path.display())))?;
    let data = data
        .map(Path::to_path_buf)
        .or_else(|| sub.input.clone())
        .ok_or_else(|| Error::Validation("no data file given".into()))?;
    let mode = ov.csv_mode.unwrap_or(CsvMode::Rfc4180);
    let (header, records) = read_table(&data, mode, Some(job.limits.max_rows))?;
    if let Some(raw) = ov.raw_out.as_ref().or(sub.raw_out.as_ref()) {
        write_raw(raw, &header, &records)?;
    }
    let on_error = ov.on_record_error.unwrap_or_default();
    let tables = write_report(sub, job_path, &data, &header, &records, on_error, diag)?;
    if !ov.quiet {
        let _ = writeln!(out, "{} report table(s), {} records", tables.len(), records.len());
    }
    Ok(records.len())
}

pub fn compare(job_path: &Path, ov: &Overrides, diag: &mut Diagnostics, out: &mut dyn Write) -> Result<CompareReport> {
    let job = open_job(job_path, diag)?;
    let mut spec = job
        .compare
        .clone()
        .ok_or_else(|| Error::Validation(format!("{}: no [compare] section", job_path.display())))?;
    if let Some(m) = ov.csv_mode {
        spec.csv_mode = m;
    }
    let mut wb = workbook(&job)?;
    let report = compare_files(&spec, &mut wb)?;
    if spec.output_path.is_none() {
        let _ = out.write_all(report.render(spec.csv_mode).as_bytes());
    } else if !ov.quiet {
        let _ = writeln!(out, "{} difference(s)", report.differences.len());
    }
    Ok(report)
}

fn first_record(path: &Path, mode: CsvMode) -> Result<Option<Vec<String>>> {
    let mut reader = RecordReader::open(path, mode)?;
    Ok(reader.read_record().map_err(|e| read_error(path, e))?.map(|r| r.fields))
}

/// Validate a job without writing anything: the job and definition load,
/// the ranges fit together, and header lines of existing inputs match.
pub fn check(job_path: &Path, diag: &mut Diagnostics, out: &mut dyn Write) -> Result<()> {
    let job = open_job(job_path, diag)?;
    let mut input_header = None;
    if let Some(spec) = &job.pipeline {
        let mut wb = workbook(&job)?;
        let layout = spec.layout(&wb)?;
        RecordProcessor::new(&mut wb, &layout, spec.field_count_policy, spec.csv_mode)
            .map_err(|e| Error::Validation(e.to_string()))?;
        if spec.header_policy != HeaderPolicy::None && spec.input_path.exists() {
            input_header = first_record(&spec.input_path, spec.csv_mode)?;
            if let (Some(found), Some(expected)) = (&input_header, &spec.expected_headers) {
                let check = validate_headers(found, &expected.columns, expected.trim);
                for w in &check.warnings {
                    diag.warn(&format!("{}: {w}", spec.input_path.display()));
                }
                if let Some(m) = check.mismatch {
                    return Err(Error::Validation(format!("{}: {m}", spec.input_path.display())));
                }
            }
        }
    }
    let columns = job.expected_headers.as_ref().map(|h| h.columns.clone()).or(input_header);
    if let Some(sort) = &job.sort {
        let named = sort.spec.keys.iter().any(|k| matches!(k.column, KeyColumn::Name(_)));
        if named && sort.input.exists() {
            if let Some(header) = first_record(&sort.input, CsvMode::Rfc4180)? {
                let map = HeaderMap::new(&header);
                for k in &sort.spec.keys {
                    map.resolve(&k.column).map_err(|e| Error::Validation(format!("{}: {e}", sort.input.display())))?;
                }
            }
        }
    }
    if let (Some(sub), Some(columns)) = (&job.subtotals, &columns) {
        let (_, warnings) = sub.resolve(&HeaderMap::new(columns), job_path)?;
        for w in &warnings {
            diag.warn(w);
        }
    }
    if let Some(spec) = &job.compare {
        let mut wb = workbook(&job)?;
        let range = |n: &str| wb.resolve_name(n).cloned().map_err(|e| Error::Validation(e.to_string()));
        let (l, r, s) = (range(&spec.left_range)?, range(&spec.right_range)?, range(&spec.status_cell)?);
        let status = handsoff_core::CellAddress::new(s.sheet.clone(), s.start.row, s.start.col);
        CompareStepper::new(&mut wb, &l, &r, &status).map_err(|e| Error::Validation(e.to_string()))?;
    }
    let _ = writeln!(out, "OK");
    Ok(())
}

/// Evaluate a formula against a definition's calculated values.
/// Unqualified references use `sheet`, or the first sheet.
pub fn eval(definition: &Path, formula: &str, sheet: Option<&str>) -> Result<String> {
    let def = load_definition(definition)?;
    let text = if formula.trim_start().starts_with('=') { formula.to_string() } else { format!("={formula}") };
    let ast = parse_formula(&text).map_err(|e| Error::Validation(format!("`{text}`: {e}")))?;
    let mut wb = def.workbook;
    let sheet = match sheet {
        Some(s) => s.to_string(),
        None => match wb.sheets().first() {
            Some(s) => s.name().to_string(),
            None => {
                wb.add_sheet("Sheet1").expect("fresh workbook");
                "Sheet1".to_string()
            }
        },
    };
    Ok(evaluate(&ast, &EvalContext { workbook: &wb, sheet: &sheet }).render())
}
