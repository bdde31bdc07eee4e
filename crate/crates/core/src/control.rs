//! Control tables: small blocks of configuration cells read once at job
//! start, plus the header translation table that lets configuration name
//! columns instead of numbering them.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::address::{CellAddress, CellRange};
use crate::collate::{Collation, KeyColumn, SortKey, SortOrder};
use crate::workbook::{Workbook, WorkbookError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("bad control table at {cell}: {message}")]
    BadControlTable { cell: String, message: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

/// A non-fatal finding, such as a value carrying superfluous spaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warning {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// A rectangular block of text cells. `origin` names the top-left cell so
/// problems can be reported by address.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ControlBlock {
    pub origin: Option<CellAddress>,
    pub rows: Vec<Vec<String>>,
}

impl ControlBlock {
    pub fn new(rows: Vec<Vec<String>>) -> Self {
        ControlBlock { origin: None, rows }
    }

    pub fn from_strs(rows: &[&[&str]]) -> Self {
        ControlBlock::new(rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect())
    }

    /// Read a named block from a workbook, rendering every cell as text.
    pub fn from_workbook(wb: &Workbook, range: &CellRange) -> Result<Self, WorkbookError> {
        let values = wb.read_range(range)?;
        Ok(ControlBlock {
            origin: Some(CellAddress::new(range.sheet.clone(), range.start.row, range.start.col)),
            rows: values.into_iter().map(|r| r.into_iter().map(|v| v.render()).collect()).collect(),
        })
    }

    pub fn get(&self, row: usize, col: usize) -> &str {
        self.rows.get(row).and_then(|r| r.get(col)).map_or("", String::as_str)
    }

    /// Address of a cell in the block, 0-based offsets.
    pub fn locate(&self, row: usize, col: usize) -> String {
        match &self.origin {
            Some(o) => CellAddress::new(o.sheet.clone(), o.row + row as u32, o.col + col as u32).to_string(),
            None => alloc::format!("row {}, column {}", row + 1, col + 1),
        }
    }

    /// Trimmed cell text; trimming anything records a warning.
    pub fn trimmed(&self, row: usize, col: usize, warnings: &mut Vec<Warning>) -> String {
        let raw = self.get(row, col);
        let t = raw.trim();
        if t.len() != raw.len() {
            warnings.push(Warning {
                location: self.locate(row, col),
                message: alloc::format!("superfluous spaces in `{raw}`"),
            });
        }
        t.to_string()
    }

    pub fn bad(&self, row: usize, col: usize, message: impl Into<String>) -> ControlError {
        ControlError::BadControlTable { cell: self.locate(row, col), message: message.into() }
    }
}

pub const DEFAULT_MEMORY_BUDGET_ROWS: usize = 1_000_000;

/// What to sort, where to write it, and by which keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortSpec {
    pub input: String,
    pub output: String,
    pub has_headings: bool,
    pub keys: Vec<SortKey>,
    /// Rows held in memory at once; larger inputs spill to sorted runs.
    pub memory_budget_rows: usize,
    pub scratch_dir: Option<String>,
}

impl SortSpec {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |message: &str| ControlError::BadControlTable { cell: "sort".into(), message: message.into() };
        if self.keys.is_empty() {
            return Err(bad("at least one sort key is required"));
        }
        if !self.has_headings && self.keys.iter().any(|k| matches!(k.column, KeyColumn::Name(_))) {
            return Err(bad("named key columns need a heading line"));
        }
        if self.keys.iter().any(|k| k.column == KeyColumn::Index(0)) {
            return Err(bad("key columns are numbered from 1"));
        }
        if self.memory_budget_rows == 0 {
            return Err(bad("memory budget must be at least one row"));
        }
        Ok(())
    }
}

pub fn parse_yes_no(text: &str) -> Option<bool> {
    match text.to_ascii_lowercase().as_str() {
        "y" | "yes" => Some(true),
        "n" | "no" => Some(false),
        _ => None,
    }
}

pub fn parse_order(text: &str) -> Option<SortOrder> {
    match text.to_ascii_lowercase().as_str() {
        "asc" | "ascending" => Some(SortOrder::Asc),
        "desc" | "descending" => Some(SortOrder::Desc),
        _ => None,
    }
}

pub fn parse_key_column(text: &str) -> KeyColumn {
    match text.parse::<usize>() {
        Ok(n) => KeyColumn::Index(n),
        Err(_) => KeyColumn::Name(text.to_string()),
    }
}

/// Read the sort control table:
///
/// ```text
/// Sort In     | <input path>
/// Sort Out    | <output path>
/// Headings ?  | Ascending/Descending | [Key]
/// y|n         | asc|desc             | [column number or name]
/// ```
///
/// Labels are free text. Without the optional key column the sort is on
/// column 1.
pub fn parse_sort_params(block: &ControlBlock) -> Result<(SortSpec, Vec<Warning>), ControlError> {
    let mut warnings = Vec::new();
    if block.rows.len() < 4 {
        return Err(block.bad(block.rows.len(), 0, "expected four rows"));
    }
    for (r, row) in block.rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let allowed = c < 2 || (c == 2 && (r == 2 || r == 3));
            if !allowed && !cell.trim().is_empty() {
                return Err(block.bad(r, c, "value outside the documented table"));
            }
        }
    }
    let input = block.trimmed(0, 1, &mut warnings);
    if input.is_empty() {
        return Err(block.bad(0, 1, "missing input path"));
    }
    let output = block.trimmed(1, 1, &mut warnings);
    if output.is_empty() {
        return Err(block.bad(1, 1, "missing output path"));
    }
    let headings = block.trimmed(3, 0, &mut warnings);
    let has_headings =
        parse_yes_no(&headings).ok_or_else(|| block.bad(3, 0, alloc::format!("expected y or n, found `{headings}`")))?;
    let order_text = block.trimmed(3, 1, &mut warnings);
    let order =
        parse_order(&order_text).ok_or_else(|| block.bad(3, 1, alloc::format!("expected asc or desc, found `{order_text}`")))?;
    let key_text = block.trimmed(3, 2, &mut warnings);
    let column = if key_text.is_empty() { KeyColumn::Index(1) } else { parse_key_column(&key_text) };
    let spec = SortSpec {
        input,
        output,
        has_headings,
        keys: alloc::vec![SortKey { column, order, collation: Collation::default() }],
        memory_budget_rows: DEFAULT_MEMORY_BUDGET_ROWS,
        scratch_dir: None,
    };
    spec.validate().map_err(|e| match e {
        ControlError::BadControlTable { message, .. } => block.bad(3, 2, message),
        other => other,
    })?;
    Ok((spec, warnings))
}

/// Header names to column indices, matched case-insensitively after
/// trimming.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeaderMap {
    names: Vec<String>,
    keys: Vec<String>,
}

impl HeaderMap {
    pub fn new<S: AsRef<str>>(headers: &[S]) -> Self {
        HeaderMap {
            names: headers.iter().map(|h| h.as_ref().trim().to_string()).collect(),
            keys: headers.iter().map(|h| h.as_ref().trim().to_uppercase()).collect(),
        }
    }

    /// 0-based index of the first column called `name`.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let key = name.trim().to_uppercase();
        self.keys.iter().position(|k| *k == key)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Resolve a key column to a 0-based index.
    pub fn resolve(&self, column: &KeyColumn) -> Result<usize, ControlError> {
        match column {
            KeyColumn::Index(i) if *i >= 1 => Ok(i - 1),
            KeyColumn::Index(i) => Err(ControlError::UnknownColumn(i.to_string())),
            KeyColumn::Name(n) => self.index_of(n).ok_or_else(|| ControlError::UnknownColumn(n.clone())),
        }
    }
}

/// First position where found and expected headers disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeaderMismatch {
    /// 1-based column position.
    pub position: usize,
    pub expected: Option<String>,
    pub found: Option<String>,
}

impl fmt::Display for HeaderMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Option<String>| v.as_ref().map_or("(missing)".to_string(), |s| alloc::format!("`{s}`"));
        write!(f, "header mismatch at position {}: expected {}, found {}", self.position, show(&self.expected), show(&self.found))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeaderCheck {
    pub mismatch: Option<HeaderMismatch>,
    pub warnings: Vec<Warning>,
}

impl HeaderCheck {
    pub fn is_ok(&self) -> bool {
        self.mismatch.is_none()
    }
}

/// Compare a header record against the expected column names, position by
/// position and case-insensitively. With `trim`, surrounding spaces are
/// ignored but reported as warnings.
pub fn validate_headers<S: AsRef<str>, T: AsRef<str>>(found: &[S], expected: &[T], trim: bool) -> HeaderCheck {
    let mut check = HeaderCheck::default();
    for i in 0..found.len().max(expected.len()) {
        let f = found.get(i).map(AsRef::as_ref);
        let e = expected.get(i).map(AsRef::as_ref);
        let same = match (f, e) {
            (Some(f), Some(e)) => {
                let fv = if trim { f.trim() } else { f };
                if trim && fv.len() != f.len() {
                    check.warnings.push(Warning {
                        location: alloc::format!("header position {}", i + 1),
                        message: alloc::format!("superfluous spaces in `{f}`"),
                    });
                }
                fv.to_uppercase() == e.trim().to_uppercase()
            }
            _ => false,
        };
        if !same && check.mismatch.is_none() {
            check.mismatch = Some(HeaderMismatch {
                position: i + 1,
                expected: e.map(String::from),
                found: f.map(String::from),
            });
        }
    }
    check
}
