//! Workbook definition files and job files.
//!
//! A definition is line-oriented:
//!
//! ```text
//! # comment
//! format = 1
//! [sheet Main]
//! cell A2 = MCDLIX
//! cell D5 = =ARABIC(D2)
//! cell B1 = "  padded text  "
//! [names]
//! InputCells = Main!A2:D2
//! ```
//!
//! A job is INI-style with `[pipeline]`, `[expected-headers]`, `[sort]`,
//! `[subtotals]`, `[compare]` and `[limits]` sections. Keys before the first
//! section are global (`format`, `definition`).

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use handsoff_core::address::{CellAddress, CellPos, CellRange};
use handsoff_core::calc::CalcError;
use handsoff_core::collate::{Collation, KeyColumn, SortKey, SortOrder};
use handsoff_core::control::{
    parse_key_column, parse_order, parse_sort_params, parse_yes_no, ControlBlock, ControlError, SortSpec,
    DEFAULT_MEMORY_BUDGET_ROWS,
};
use handsoff_core::record::CsvMode;
use handsoff_core::report::ReportFormat;
use handsoff_core::stream::{FieldCountPolicy, StreamLayout};
use handsoff_core::value::{format_number, parse_number, CellValue};
use handsoff_core::workbook::{CellContent, Formula, NamedRange, Workbook, WorkbookError};
use thiserror::Error;

use crate::pipeline::{CompareSpec, ExpectedHeaders, HeaderPolicy, OnRecordError, PipelineSpec};
use crate::report::{SubtotalConfig, SubtotalSource};

/// Where configuration text comes from. Tests substitute a counting source
/// to prove each file is read exactly once.
pub trait ConfigSource {
    fn read_to_string(&self, path: &Path) -> io::Result<String>;
}

pub struct FileSystem;

impl ConfigSource for FileSystem {
    fn read_to_string(&self, path: &Path) -> io::Result<String> {
        std::fs::read_to_string(path)
    }
}

/// A [`ConfigSource`] over the file system that records every read.
#[derive(Default)]
pub struct CountingSource {
    reads: RefCell<HashMap<PathBuf, usize>>,
}

impl CountingSource {
    pub fn reads(&self) -> HashMap<PathBuf, usize> {
        self.reads.borrow().clone()
    }
}

impl ConfigSource for CountingSource {
    fn read_to_string(&self, path: &Path) -> io::Result<String> {
        *self.reads.borrow_mut().entry(path.to_path_buf()).or_default() += 1;
        std::fs::read_to_string(path)
    }
}

#[derive(Debug, Error)]
#[error("{}{}: {kind}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
}

#[derive(Debug, Error)]
pub enum ConfigErrorKind {
    #[error("cannot read: {0}")]
    Read(io::Error),
    #[error("{0}")]
    Parse(String),
    #[error("cell {cell} is already assigned on line {first}")]
    DuplicateCell { cell: String, first: usize },
    #[error("name `{name}` refers to {range}, outside the grid")]
    NameOutOfBounds { name: String, range: String },
    #[error("{0}")]
    Cycle(CalcError),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("unknown range name `{0}`")]
    UnknownRangeName(String),
    #[error("{what}: {found} exceeds the limit of {limit}")]
    LimitExceeded { what: String, found: usize, limit: usize },
    #[error("missing `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error(transparent)]
    Control(#[from] ControlError),
}

fn err(path: &Path, line: Option<usize>, kind: ConfigErrorKind) -> ConfigError {
    ConfigError { path: path.to_path_buf(), line, kind }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> ConfigError {
    err(path, Some(line), ConfigErrorKind::Parse(message.into()))
}

/// A loaded definition plus where each cell was assigned.
#[derive(Clone, Debug)]
pub struct Definition {
    pub path: PathBuf,
    pub workbook: Workbook,
    lines: HashMap<(String, CellPos), usize>,
}

impl Definition {
    /// Line of the assignment to `addr`, if any.
    pub fn line_of(&self, addr: &CellAddress) -> Option<usize> {
        self.lines.get(&(addr.sheet.to_uppercase(), addr.pos())).copied()
    }
}

/// Parse a literal cell value: quoted text keeps its spaces, a bare number
/// is a Number, empty is Blank and anything else is Text.
pub fn parse_literal(text: &str) -> Result<CellValue, String> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(CellValue::Blank);
    }
    if let Some(rest) = t.strip_prefix('"') {
        let inner = rest.strip_suffix('"').ok_or_else(|| format!("unterminated quoted text {t}"))?;
        if inner.replace("\"\"", "").contains('"') {
            return Err(format!("stray quote in {t}"));
        }
        return Ok(CellValue::Text(inner.replace("\"\"", "\"")));
    }
    Ok(match parse_number(t) {
        Some(n) => CellValue::Number(n),
        None => CellValue::Text(t.to_string()),
    })
}

fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

/// Text form of a literal that [`parse_literal`] reads back to the same
/// value. Booleans and error values come back as text.
pub fn render_literal(value: &CellValue) -> String {
    match value {
        CellValue::Blank => String::new(),
        CellValue::Number(n) => format_number(*n),
        CellValue::Text(t) => {
            let needs_quotes = t.is_empty()
                || t.trim() != t
                || t.starts_with('=')
                || t.starts_with('"')
                || parse_number(t).is_some();
            if needs_quotes {
                quote(t)
            } else {
                t.clone()
            }
        }
        other => other.render(),
    }
}

fn looks_like_range(text: &str) -> bool {
    let Some((_, corners)) = text.rsplit_once('!') else { return false };
    corners.split(':').all(|c| {
        let c = c.replace('$', "");
        let split = c.find(|ch: char| !ch.is_ascii_alphabetic()).unwrap_or(c.len());
        split > 0 && split < c.len() && c[split..].bytes().all(|b| b.is_ascii_digit())
    })
}

fn check_format(path: &Path, line: usize, value: &str) -> Result<(), ConfigError> {
    if value != "1" {
        return Err(parse_err(path, line, format!("unsupported format `{value}`")));
    }
    Ok(())
}

pub fn load_definition(path: &Path) -> Result<Definition, ConfigError> {
    load_definition_from(&FileSystem, path)
}

pub fn load_definition_from(source: &dyn ConfigSource, path: &Path) -> Result<Definition, ConfigError> {
    let text = source.read_to_string(path).map_err(|e| err(path, None, ConfigErrorKind::Read(e)))?;
    parse_definition(path, &text)
}

enum DefSection {
    Top,
    Sheet(String),
    Names,
}

/// Parse definition text; `path` is only used in error messages.
pub fn parse_definition(path: &Path, text: &str) -> Result<Definition, ConfigError> {
    let mut wb = Workbook::new();
    let mut lines: HashMap<(String, CellPos), usize> = HashMap::new();
    let mut section = DefSection::Top;
    // names may refer to sheets declared further down
    let mut names: Vec<(usize, NamedRange)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(inner) = t.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| parse_err(path, n, "unclosed section header"))?.trim();
            section = if inner.eq_ignore_ascii_case("names") {
                DefSection::Names
            } else if let Some(name) = inner.strip_prefix("sheet ").map(str::trim).filter(|s| !s.is_empty()) {
                if wb.sheet(name).is_none() {
                    wb.add_sheet(name).map_err(|e| parse_err(path, n, e.to_string()))?;
                }
                DefSection::Sheet(name.to_string())
            } else {
                return Err(err(path, Some(n), ConfigErrorKind::UnknownSection(inner.to_string())));
            };
            continue;
        }
        match &section {
            DefSection::Top => {
                let (k, v) = t.split_once('=').ok_or_else(|| parse_err(path, n, "expected `format = 1` or a section"))?;
                if k.trim() != "format" {
                    return Err(parse_err(path, n, format!("unexpected `{}` before any section", k.trim())));
                }
                check_format(path, n, v.trim())?;
            }
            DefSection::Sheet(sheet) => {
                let rest = t
                    .strip_prefix("cell")
                    .filter(|r| r.starts_with(char::is_whitespace))
                    .ok_or_else(|| parse_err(path, n, "expected `cell <A1> = <value>`"))?;
                let (a1, value) = rest.split_once('=').ok_or_else(|| parse_err(path, n, "missing `=`"))?;
                let pos = handsoff_core::parse_a1(a1.trim()).map_err(|e| parse_err(path, n, e.to_string()))?;
                let addr = CellAddress::new(sheet.clone(), pos.row, pos.col);
                let key = (sheet.to_uppercase(), pos);
                if let Some(&first) = lines.get(&key) {
                    return Err(err(path, Some(n), ConfigErrorKind::DuplicateCell { cell: addr.to_string(), first }));
                }
                let value = value.trim();
                let content = if value.starts_with('=') {
                    let f = Formula::parse(value).map_err(|e| parse_err(path, n, format!("in `{value}`: {e}")))?;
                    CellContent::Formula(f)
                } else {
                    CellContent::Literal(parse_literal(value).map_err(|m| parse_err(path, n, m))?)
                };
                wb.set_cell(&addr, content).map_err(|e| parse_err(path, n, e.to_string()))?;
                lines.insert(key, n);
            }
            DefSection::Names => {
                let (name, range_text) = t.split_once('=').ok_or_else(|| parse_err(path, n, "expected `Name = Sheet!A1:B2`"))?;
                let name = name.trim();
                let name = name.strip_prefix("name ").map_or(name, str::trim_start);
                let range_text = range_text.trim();
                let range = match CellRange::parse(range_text) {
                    Ok(r) => r,
                    Err(_) if looks_like_range(range_text) => {
                        return Err(err(
                            path,
                            Some(n),
                            ConfigErrorKind::NameOutOfBounds { name: name.to_string(), range: range_text.to_string() },
                        ))
                    }
                    Err(e) => return Err(parse_err(path, n, e.to_string())),
                };
                names.push((n, NamedRange::new(name, range)));
            }
        }
    }
    for (n, named) in names {
        wb.define_name(named).map_err(|e| match e {
            WorkbookError::NameOutOfBounds { name, range } => err(path, Some(n), ConfigErrorKind::NameOutOfBounds { name, range }),
            other => parse_err(path, n, other.to_string()),
        })?;
    }
    let def = Definition { path: path.to_path_buf(), workbook: wb, lines };
    let mut wb = def.workbook;
    let line_of = |a: &CellAddress| def.lines.get(&(a.sheet.to_uppercase(), a.pos())).copied();
    match wb.compile() {
        Ok(()) => {}
        Err(e @ CalcError::Cycle { .. }) => {
            let line = match &e {
                CalcError::Cycle { cells } => cells.first().and_then(&line_of),
                _ => None,
            };
            return Err(err(path, line, ConfigErrorKind::Cycle(e)));
        }
        Err(CalcError::UnknownName { cell, name }) => {
            return Err(err(path, line_of(&cell), ConfigErrorKind::Parse(format!("{cell} refers to unknown name `{name}`"))))
        }
        Err(e) => return Err(err(path, None, ConfigErrorKind::Parse(e.to_string()))),
    }
    wb.recalculate_all().map_err(|e| err(path, None, ConfigErrorKind::Parse(e.to_string())))?;
    Ok(Definition { path: def.path, workbook: wb, lines: def.lines })
}

/// Canonical definition text: sheets in order, cells row by row, formulas
/// in canonical form, then names in definition order.
pub fn render_definition(wb: &Workbook) -> String {
    let mut out = String::from("format = 1\n");
    for sheet in wb.sheets() {
        let _ = writeln!(out, "\n[sheet {}]", sheet.name());
        for (pos, cell) in sheet.cells() {
            let value = match &cell.content {
                CellContent::Formula(f) => f.canonical(),
                CellContent::Literal(v) => render_literal(v),
            };
            if value.is_empty() {
                let _ = writeln!(out, "cell {pos} =");
            } else {
                let _ = writeln!(out, "cell {pos} = {value}");
            }
        }
    }
    let mut names = wb.names().peekable();
    if names.peek().is_some() {
        out.push_str("\n[names]\n");
        for n in names {
            let _ = writeln!(out, "{} = {}", n.name, n.range);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Data records per input file.
    pub max_rows: usize,
    /// Entries in any control table: subtotal jobs, sort keys, block cells.
    pub max_control_entries: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_rows: 100_000_000, max_control_entries: 10_000 }
    }
}

/// A sort step with paths resolved against the job directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortJob {
    pub spec: SortSpec,
    pub input: PathBuf,
    pub output: PathBuf,
    pub scratch_dir: Option<PathBuf>,
}

/// Everything a job file describes, validated against its definition.
#[derive(Clone, Debug)]
pub struct Job {
    pub path: PathBuf,
    pub definition: Option<Definition>,
    pub pipeline: Option<PipelineSpec>,
    pub expected_headers: Option<ExpectedHeaders>,
    pub sort: Option<SortJob>,
    pub subtotals: Option<SubtotalConfig>,
    pub compare: Option<CompareSpec>,
    pub limits: Limits,
    pub warnings: Vec<String>,
}

impl Job {
    pub fn dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn workbook(&self) -> Option<&Workbook> {
        self.definition.as_ref().map(|d| &d.workbook)
    }
}

#[derive(Clone, Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Clone, Debug)]
struct Section {
    line: usize,
    entries: Vec<Entry>,
}

struct Ini {
    path: PathBuf,
    global: Section,
    sections: BTreeMap<String, Section>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["format", "definition"]),
    (
        "pipeline",
        &[
            "input",
            "output",
            "input_range",
            "output_range",
            "skip_cell",
            "skip_sentinel",
            "carry_forward",
            "header",
            "csv_mode",
            "field_count",
            "on_record_error",
        ],
    ),
    ("expected-headers", &["columns", "trim"]),
    ("sort", &["params", "input", "output", "headings", "key", "memory_budget_rows", "scratch_dir"]),
    ("subtotals", &["job", "params", "input", "output", "format", "raw_out"]),
    (
        "compare",
        &["left", "right", "left_range", "right_range", "status_cell", "output", "headings", "field_diffs", "csv_mode"],
    ),
    ("limits", &["max_rows", "max_control_entries"]),
];

const REPEATABLE: &[&str] = &["job", "key"];

fn parse_ini(path: &Path, text: &str) -> Result<Ini, ConfigError> {
    let mut ini = Ini { path: path.to_path_buf(), global: Section { line: 0, entries: vec![] }, sections: BTreeMap::new() };
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
            continue;
        }
        if let Some(inner) = t.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or_else(|| parse_err(path, n, "unclosed section header"))?.trim();
            let name = name.to_ascii_lowercase();
            if name.is_empty() || !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err(path, Some(n), ConfigErrorKind::UnknownSection(name)));
            }
            if ini.sections.contains_key(&name) {
                return Err(parse_err(path, n, format!("section [{name}] appears twice")));
            }
            ini.sections.insert(name.clone(), Section { line: n, entries: vec![] });
            current = name;
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| parse_err(path, n, "expected `key = value`"))?;
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        let allowed = SECTIONS.iter().find(|(s, _)| *s == current).map(|(_, keys)| *keys).unwrap_or(&[]);
        if !allowed.contains(&key.as_str()) {
            return Err(err(path, Some(n), ConfigErrorKind::UnknownKey { section: current.clone(), key }));
        }
        let section = if current.is_empty() { &mut ini.global } else { ini.sections.get_mut(&current).unwrap() };
        if !REPEATABLE.contains(&key.as_str()) && section.entries.iter().any(|e| e.key == key) {
            return Err(parse_err(path, n, format!("`{key}` is set twice")));
        }
        section.entries.push(Entry { key, value: v.trim().to_string(), line: n });
    }
    Ok(ini)
}

struct SectionReader<'a> {
    ini: &'a Ini,
    name: &'a str,
    section: &'a Section,
}

impl<'a> SectionReader<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn all<'k>(&self, key: &'k str) -> impl Iterator<Item = &'a Entry> + 'k
    where
        'a: 'k,
    {
        let section = self.section;
        section.entries.iter().filter(move |e| e.key == key)
    }

    fn required(&self, key: &str) -> Result<&'a Entry, ConfigError> {
        match self.get(key) {
            Some(e) if !e.value.is_empty() => Ok(e),
            Some(e) => Err(parse_err(&self.ini.path, e.line, format!("`{key}` must not be empty"))),
            None => Err(err(
                &self.ini.path,
                Some(self.section.line),
                ConfigErrorKind::Missing { section: self.name.to_string(), key: key.to_string() },
            )),
        }
    }

    fn bad(&self, e: &Entry, message: impl Into<String>) -> ConfigError {
        parse_err(&self.ini.path, e.line, message)
    }

    fn choice<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => parse(&e.value.to_ascii_lowercase())
                .ok_or_else(|| self.bad(e, format!("`{key}` must be {expected}, found `{}`", e.value))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        self.choice(key, default, parse_flag, "yes or no")
    }

    fn number(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.choice(key, default, |v| v.replace('_', "").parse().ok(), "a whole number")
    }

    fn path(&self, key: &str, dir: &Path) -> Result<PathBuf, ConfigError> {
        Ok(dir.join(&self.required(key)?.value))
    }

    fn optional_path(&self, key: &str, dir: &Path) -> Option<PathBuf> {
        self.get(key).filter(|e| !e.value.is_empty()).map(|e| dir.join(&e.value))
    }
}

fn parse_flag(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "1" => Some(true),
        "false" | "off" | "0" => Some(false),
        other => parse_yes_no(other),
    }
}

pub fn parse_csv_mode(v: &str) -> Option<CsvMode> {
    match v {
        "rfc4180" => Some(CsvMode::Rfc4180),
        "naive-split" | "naive" => Some(CsvMode::NaiveSplit),
        _ => None,
    }
}

/// Parse a sort key such as `Colour desc text` or `2 asc`.
pub fn parse_sort_key(text: &str) -> Option<SortKey> {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    let mut order = SortOrder::Asc;
    let mut collation = Collation::default();
    while words.len() > 1 {
        let last = words[words.len() - 1].to_ascii_lowercase();
        if let Some(o) = parse_order(&last) {
            order = o;
        } else if last == "text" {
            collation = Collation::Text;
        } else if last == "numeric" {
            collation = Collation::NumericAware;
        } else {
            break;
        }
        words.pop();
    }
    if words.is_empty() {
        return None;
    }
    Some(SortKey { column: parse_key_column(&words.join(" ")), order, collation })
}

pub fn parse_sentinel(text: &str) -> CellValue {
    match text.to_ascii_uppercase().as_str() {
        "TRUE" => CellValue::Boolean(true),
        "FALSE" => CellValue::Boolean(false),
        _ => parse_literal(text).unwrap_or_else(|_| CellValue::Text(text.to_string())),
    }
}

pub fn load_job(path: &Path) -> Result<Job, ConfigError> {
    load_job_from(&FileSystem, path)
}

/// Read and validate a job and its definition, each file exactly once.
pub fn load_job_from(source: &dyn ConfigSource, path: &Path) -> Result<Job, ConfigError> {
    let text = source.read_to_string(path).map_err(|e| err(path, None, ConfigErrorKind::Read(e)))?;
    let ini = parse_ini(path, &text)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    let global = SectionReader { ini: &ini, name: "", section: &ini.global };
    if let Some(e) = global.get("format") {
        check_format(path, e.line, &e.value)?;
    }
    let definition = match global.get("definition") {
        Some(e) => Some(load_definition_from(source, &dir.join(&e.value))?),
        None => None,
    };
    let section = |name: &'static str| ini.sections.get(name).map(|s| SectionReader { ini: &ini, name, section: s });
    let mut warnings = Vec::new();

    let limits = match section("limits") {
        Some(s) => Limits {
            max_rows: s.number("max_rows", Limits::default().max_rows)?,
            max_control_entries: s.number("max_control_entries", Limits::default().max_control_entries)?,
        },
        None => Limits::default(),
    };
    let over_limit = |line: usize, what: &str, found: usize| {
        err(path, Some(line), ConfigErrorKind::LimitExceeded { what: what.into(), found, limit: limits.max_control_entries })
    };

    let need_wb = |s: &SectionReader| -> Result<&Workbook, ConfigError> {
        definition.as_ref().map(|d| &d.workbook).ok_or_else(|| {
            err(path, Some(s.section.line), ConfigErrorKind::Missing { section: String::new(), key: "definition".into() })
        })
    };
    let named = |wb: &'_ Workbook, e: &Entry| -> Result<CellRange, ConfigError> {
        wb.resolve_name(&e.value).cloned().map_err(|_| err(path, Some(e.line), ConfigErrorKind::UnknownRangeName(e.value.clone())))
    };

    let expected_headers = match section("expected-headers") {
        Some(s) => {
            let cols = s.required("columns")?;
            let columns: Vec<String> = cols.value.split(',').map(|c| c.trim().to_string()).collect();
            if columns.iter().any(String::is_empty) {
                return Err(s.bad(cols, "empty column name"));
            }
            Some(ExpectedHeaders { columns, trim: s.flag("trim", false)? })
        }
        None => None,
    };

    let pipeline = match section("pipeline") {
        Some(s) => {
            let wb = need_wb(&s)?;
            for key in ["input_range", "output_range", "skip_cell", "carry_forward"] {
                if let Some(e) = s.get(key) {
                    named(wb, e)?;
                }
            }
            let input_range = s.required("input_range")?.value.clone();
            let output_range = s.required("output_range")?.value.clone();
            let skip_cell = s.get("skip_cell").map(|e| e.value.clone());
            let carry_forward_range = s.get("carry_forward").map(|e| e.value.clone());
            let mut layout = StreamLayout::from_names(wb, &input_range, &output_range, skip_cell.as_deref(), carry_forward_range.as_deref())
                .map_err(|e| err(path, Some(s.section.line), ConfigErrorKind::Parse(e.to_string())))?;
            if let Some(e) = s.get("skip_sentinel") {
                layout.skip_sentinel = parse_sentinel(&e.value);
            }
            let default_header = if expected_headers.is_some() { HeaderPolicy::Validate } else { HeaderPolicy::PassThrough };
            let header_policy = s.choice("header", default_header, HeaderPolicy::parse, "pass-through, validate or none")?;
            if header_policy == HeaderPolicy::Validate && expected_headers.is_none() {
                return Err(err(
                    path,
                    s.get("header").map(|e| e.line),
                    ConfigErrorKind::Missing { section: "expected-headers".into(), key: "columns".into() },
                ));
            }
            Some(PipelineSpec {
                input_path: s.path("input", &dir)?,
                output_path: s.path("output", &dir)?,
                input_range,
                output_range,
                skip_cell,
                skip_sentinel: layout.skip_sentinel,
                carry_forward_range,
                header_policy,
                expected_headers: expected_headers.clone(),
                csv_mode: s.choice("csv_mode", CsvMode::Rfc4180, parse_csv_mode, "rfc4180 or naive-split")?,
                field_count_policy: s.choice(
                    "field_count",
                    FieldCountPolicy::Strict,
                    |v| match v {
                        "strict" => Some(FieldCountPolicy::Strict),
                        "pad-truncate" => Some(FieldCountPolicy::PadTruncate),
                        _ => None,
                    },
                    "strict or pad-truncate",
                )?,
                on_record_error: s.choice("on_record_error", OnRecordError::FailFast, OnRecordError::parse, "fail-fast or skip-and-log")?,
            })
        }
        None => None,
    };

    let sort = match section("sort") {
        Some(s) => {
            let mut spec = if let Some(e) = s.get("params") {
                let wb = need_wb(&s)?;
                let range = named(wb, e)?;
                if range.len() > limits.max_control_entries {
                    return Err(over_limit(e.line, "sort control table cells", range.len()));
                }
                let block = ControlBlock::from_workbook(wb, &range).map_err(|x| s.bad(e, x.to_string()))?;
                let (spec, w) = parse_sort_params(&block).map_err(|x| err(path, Some(e.line), x.into()))?;
                warnings.extend(w.iter().map(|w| format!("{} ({}): {w}", path.display(), e.value)));
                for key in ["input", "output", "headings", "key"] {
                    if let Some(extra) = s.get(key) {
                        return Err(s.bad(extra, format!("`{key}` conflicts with `params`")));
                    }
                }
                spec
            } else {
                let headings = s.flag("headings", false)?;
                let mut keys = Vec::new();
                for e in s.all("key") {
                    keys.push(parse_sort_key(&e.value).ok_or_else(|| s.bad(e, format!("bad sort key `{}`", e.value)))?);
                }
                if keys.is_empty() {
                    keys.push(SortKey::column(1, SortOrder::Asc));
                }
                if keys.len() > limits.max_control_entries {
                    return Err(over_limit(s.section.line, "sort keys", keys.len()));
                }
                SortSpec {
                    input: s.required("input")?.value.clone(),
                    output: s.required("output")?.value.clone(),
                    has_headings: headings,
                    keys,
                    memory_budget_rows: DEFAULT_MEMORY_BUDGET_ROWS,
                    scratch_dir: None,
                }
            };
            spec.memory_budget_rows = s.number("memory_budget_rows", spec.memory_budget_rows)?;
            spec.scratch_dir = s.get("scratch_dir").map(|e| e.value.clone());
            spec.validate().map_err(|x| err(path, Some(s.section.line), x.into()))?;
            if let (KeyColumn::Name(n), Some(h)) = (&spec.keys[0].column, &expected_headers) {
                if !h.columns.iter().any(|c| c.eq_ignore_ascii_case(n)) {
                    return Err(err(path, Some(s.section.line), ControlError::UnknownColumn(n.clone()).into()));
                }
            }
            Some(SortJob {
                input: dir.join(&spec.input),
                output: dir.join(&spec.output),
                scratch_dir: spec.scratch_dir.as_ref().map(|d| dir.join(d)),
                spec,
            })
        }
        None => None,
    };

    let subtotals = match section("subtotals") {
        Some(s) => {
            let jobs: Vec<&Entry> = s.all("job").collect();
            if jobs.len() > limits.max_control_entries {
                return Err(over_limit(jobs[limits.max_control_entries].line, "subtotal jobs", jobs.len()));
            }
            let source = match (s.get("params"), jobs.is_empty()) {
                (Some(e), true) => {
                    let wb = need_wb(&s)?;
                    let range = named(wb, e)?;
                    if range.rows() > limits.max_control_entries + 1 {
                        return Err(over_limit(e.line, "subtotal control table rows", range.rows() - 1));
                    }
                    let block = ControlBlock::from_workbook(wb, &range).map_err(|x| s.bad(e, x.to_string()))?;
                    SubtotalSource::Block(block)
                }
                (Some(e), false) => return Err(s.bad(e, "use either `params` or `job` lines, not both")),
                (None, false) => {
                    for e in &jobs {
                        let parts = e.value.split(':').count();
                        if !(2..=3).contains(&parts) {
                            return Err(s.bad(e, "expected `measures : group columns [: sum|count]`"));
                        }
                    }
                    SubtotalSource::Lines(jobs.iter().map(|e| (e.line, e.value.clone())).collect())
                }
                (None, true) => {
                    return Err(err(path, Some(s.section.line), ConfigErrorKind::Missing { section: "subtotals".into(), key: "job".into() }))
                }
            };
            Some(SubtotalConfig {
                source,
                input: s.optional_path("input", &dir),
                output: s.path("output", &dir)?,
                format: s.choice(
                    "format",
                    ReportFormat::Csv,
                    |v| match v {
                        "csv" => Some(ReportFormat::Csv),
                        "aligned-text" | "text" => Some(ReportFormat::AlignedText),
                        _ => None,
                    },
                    "csv or aligned-text",
                )?,
                raw_out: s.optional_path("raw_out", &dir),
            })
        }
        None => None,
    };

    let compare = match section("compare") {
        Some(s) => {
            let wb = need_wb(&s)?;
            for key in ["left_range", "right_range", "status_cell"] {
                named(wb, s.required(key)?)?;
            }
            Some(CompareSpec {
                left_path: s.path("left", &dir)?,
                right_path: s.path("right", &dir)?,
                left_range: s.required("left_range")?.value.clone(),
                right_range: s.required("right_range")?.value.clone(),
                status_cell: s.required("status_cell")?.value.clone(),
                output_path: s.optional_path("output", &dir),
                has_headings: s.flag("headings", false)?,
                field_diffs: s.flag("field_diffs", false)?,
                csv_mode: s.choice("csv_mode", CsvMode::Rfc4180, parse_csv_mode, "rfc4180 or naive-split")?,
            })
        }
        None => None,
    };

    Ok(Job {
        path: path.to_path_buf(),
        definition,
        pipeline,
        expected_headers,
        sort,
        subtotals,
        compare,
        limits,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn def(text: &str) -> Result<Definition, ConfigError> {
        parse_definition(Path::new("test.sheet"), text)
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("12.5"), Ok(CellValue::Number(12.5)));
        assert_eq!(parse_literal("Toga"), Ok(CellValue::Text("Toga".into())));
        assert_eq!(parse_literal("\"  a \"\"b\"\" \""), Ok(CellValue::Text("  a \"b\" ".into())));
        assert_eq!(parse_literal(""), Ok(CellValue::Blank));
        assert!(parse_literal("\"open").is_err());
        for v in ["", "12", " pad", "=x", "\"q", "plain", "TRUE"] {
            let value = CellValue::Text(v.into());
            assert_eq!(parse_literal(&render_literal(&value)), Ok(value), "{v:?}");
        }
    }

    #[test]
    fn empty_definition() {
        let d = def("").unwrap();
        assert!(d.workbook.sheets().is_empty());
        assert_eq!(d.workbook.names().count(), 0);
    }

    #[test]
    fn definition_errors_carry_lines() {
        let e = def("[sheet S]\ncell A1 = 1\n\ncell A1 = 2\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(matches!(e.kind, ConfigErrorKind::DuplicateCell { first: 2, .. }));
        let e = def("[sheet S]\ncell A1 = =1+\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = def("[sheet S]\ncell A1 = =B1\ncell B1 = =A1\n").unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::Cycle(_)));
        assert_eq!(e.line, Some(2));
        let e = def("[sheet S]\n[names]\nX = S!A1:XFE2\n").unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::NameOutOfBounds { .. }), "{e}");
        assert!(matches!(def("[bogus]\n").unwrap_err().kind, ConfigErrorKind::UnknownSection(_)));
    }

    #[test]
    fn inverted_name_corners_normalize() {
        let d = def("[sheet Main]\n[names]\nX = Main!B2:A1\n").unwrap();
        assert_eq!(d.workbook.resolve_name("x").unwrap().to_string(), "Main!A1:B2");
    }

    #[test]
    fn sort_keys() {
        let k = parse_sort_key("Colour desc text").unwrap();
        assert_eq!(k.column, KeyColumn::Name("Colour".into()));
        assert_eq!((k.order, k.collation), (SortOrder::Desc, Collation::Text));
        assert_eq!(parse_sort_key("2").unwrap(), SortKey::column(2, SortOrder::Asc));
        assert!(parse_sort_key("  ").is_none());
    }
}
