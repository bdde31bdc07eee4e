//! Sheets of sparse cells plus named ranges.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::address::{CellAddress, CellPos, CellRange, MAX_COLS, MAX_ROWS};
use crate::ast::Expr;
use crate::calc::DependencyGraph;
use crate::lexer::is_valid_name;
use crate::parser::{parse_formula, FormulaError};
use crate::value::CellValue;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WorkbookError {
    #[error("bad address {0}")]
    BadAddress(String),
    #[error("unknown sheet `{0}`")]
    UnknownSheet(String),
    #[error("sheet `{0}` already exists")]
    DuplicateSheet(String),
    #[error("`{0}` is not a valid name")]
    InvalidName(String),
    #[error("name `{0}` is already defined")]
    DuplicateName(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("name `{name}` refers to {range}, outside the grid")]
    NameOutOfBounds { name: String, range: String },
    #[error("range {range} is {expected_rows}x{expected_cols} but the data is {rows}x{cols}")]
    ShapeMismatch { range: String, expected_rows: usize, expected_cols: usize, rows: usize, cols: usize },
    #[error("writing to {0} would overwrite a formula")]
    FormulaOverwrite(String),
}

/// Row and column ceilings for a workbook.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridLimits {
    pub max_rows: u32,
    pub max_cols: u32,
}

impl Default for GridLimits {
    fn default() -> Self {
        GridLimits { max_rows: MAX_ROWS, max_cols: MAX_COLS }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Formula {
    pub source: String,
    pub ast: Expr,
}

impl Formula {
    pub fn parse(source: &str) -> Result<Formula, FormulaError> {
        let ast = parse_formula(source)?;
        Ok(Formula { source: source.to_string(), ast })
    }

    /// Canonical source text, with the leading `=`.
    pub fn canonical(&self) -> String {
        alloc::format!("={}", self.ast)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellContent {
    Literal(CellValue),
    Formula(Formula),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub content: CellContent,
    /// Equals the literal for literal cells; for formulas, the value from the
    /// most recent recalculation (Blank before the first).
    pub cached: CellValue,
}

impl Cell {
    pub fn is_formula(&self) -> bool {
        matches!(self.content, CellContent::Formula(_))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Sheet {
    pub(crate) name: String,
    pub(crate) cells: BTreeMap<CellPos, Cell>,
}

impl Sheet {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Populated cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (CellPos, &Cell)> {
        self.cells.iter().map(|(p, c)| (*p, c))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedRange {
    pub name: String,
    pub range: CellRange,
}

impl NamedRange {
    pub fn new(name: impl Into<String>, range: CellRange) -> Self {
        NamedRange { name: name.into(), range }
    }
}

/// Internal cell key: sheet index plus position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct Loc {
    pub sheet: usize,
    pub pos: CellPos,
}

/// A range resolved against a workbook's sheet table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LocRange {
    pub sheet: usize,
    pub start: CellPos,
    pub end: CellPos,
}

impl LocRange {
    pub fn contains(&self, loc: Loc) -> bool {
        loc.sheet == self.sheet && crate::address::contains(self.start, self.end, loc.pos)
    }

    pub fn rows(&self) -> usize {
        (self.end.row - self.start.row) as usize + 1
    }

    pub fn cols(&self) -> usize {
        (self.end.col - self.start.col) as usize + 1
    }

    pub fn locs(&self) -> impl Iterator<Item = Loc> + '_ {
        let sheet = self.sheet;
        let (start, end) = (self.start, self.end);
        (start.row..=end.row).flat_map(move |r| (start.col..=end.col).map(move |c| Loc { sheet, pos: CellPos::new(r, c) }))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Workbook {
    pub(crate) sheets: Vec<Sheet>,
    /// Keyed by uppercased name; insertion order kept separately for rendering.
    pub(crate) names: BTreeMap<String, NamedRange>,
    pub(crate) name_order: Vec<String>,
    pub(crate) writable: Vec<LocRange>,
    pub(crate) limits: GridLimits,
    pub(crate) graph: Option<DependencyGraph>,
}

impl Workbook {
    pub fn new() -> Self {
        Workbook::default()
    }

    pub fn with_limits(limits: GridLimits) -> Self {
        Workbook { limits, ..Workbook::default() }
    }

    pub fn limits(&self) -> GridLimits {
        self.limits
    }

    pub fn add_sheet(&mut self, name: &str) -> Result<(), WorkbookError> {
        if !is_valid_name(name) {
            return Err(WorkbookError::InvalidName(name.into()));
        }
        if self.sheet_index(name).is_some() {
            return Err(WorkbookError::DuplicateSheet(name.into()));
        }
        self.sheets.push(Sheet { name: name.into(), cells: BTreeMap::new() });
        Ok(())
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheet_index(name).map(|i| &self.sheets[i])
    }

    pub(crate) fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets.iter().position(|s| s.name.eq_ignore_ascii_case(name))
    }

    fn in_bounds(&self, pos: CellPos) -> bool {
        pos.row >= 1 && pos.col >= 1 && pos.row <= self.limits.max_rows && pos.col <= self.limits.max_cols
    }

    pub(crate) fn loc(&self, addr: &CellAddress) -> Result<Loc, WorkbookError> {
        let sheet = self.sheet_index(&addr.sheet).ok_or_else(|| WorkbookError::UnknownSheet(addr.sheet.clone()))?;
        if !self.in_bounds(addr.pos()) {
            return Err(WorkbookError::BadAddress(addr.to_string()));
        }
        Ok(Loc { sheet, pos: addr.pos() })
    }

    pub(crate) fn loc_range(&self, range: &CellRange) -> Result<LocRange, WorkbookError> {
        let sheet = self.sheet_index(&range.sheet).ok_or_else(|| WorkbookError::UnknownSheet(range.sheet.clone()))?;
        if !self.in_bounds(range.start) || !self.in_bounds(range.end) {
            return Err(WorkbookError::BadAddress(range.to_string()));
        }
        Ok(LocRange { sheet, start: range.start, end: range.end })
    }

    pub(crate) fn address_of(&self, loc: Loc) -> CellAddress {
        CellAddress::new(self.sheets[loc.sheet].name.clone(), loc.pos.row, loc.pos.col)
    }

    pub(crate) fn cell_at(&self, loc: Loc) -> Option<&Cell> {
        self.sheets.get(loc.sheet).and_then(|s| s.cells.get(&loc.pos))
    }

    pub(crate) fn value_at(&self, loc: Loc) -> &CellValue {
        const BLANK: CellValue = CellValue::Blank;
        self.cell_at(loc).map(|c| &c.cached).unwrap_or(&BLANK)
    }

    pub fn cell(&self, addr: &CellAddress) -> Result<Option<&Cell>, WorkbookError> {
        let loc = self.loc(addr)?;
        Ok(self.cell_at(loc))
    }

    /// Store a literal or a formula. Changing whether a cell holds a formula
    /// invalidates the compiled dependency graph.
    pub fn set_cell(&mut self, addr: &CellAddress, content: CellContent) -> Result<(), WorkbookError> {
        let loc = self.loc(addr)?;
        self.store(loc, content);
        Ok(())
    }

    pub(crate) fn store(&mut self, loc: Loc, content: CellContent) {
        let cells = &mut self.sheets[loc.sheet].cells;
        let was_formula = cells.get(&loc.pos).is_some_and(Cell::is_formula);
        let cached = match &content {
            CellContent::Literal(v) => v.clone(),
            CellContent::Formula(_) => CellValue::Blank,
        };
        let is_formula = matches!(content, CellContent::Formula(_));
        cells.insert(loc.pos, Cell { content, cached });
        if was_formula || is_formula {
            self.graph = None;
        }
    }

    /// Overwrite a literal cell's value in place. Caller guarantees `loc` is
    /// in bounds and not a formula.
    pub(crate) fn put_literal(&mut self, loc: Loc, value: CellValue) {
        let cells = &mut self.sheets[loc.sheet].cells;
        match cells.get_mut(&loc.pos) {
            Some(cell) if !cell.is_formula() => {
                cell.cached = value.clone();
                cell.content = CellContent::Literal(value);
            }
            _ => self.store(loc, CellContent::Literal(value)),
        }
    }

    /// Cached value of a cell; cells never set read as Blank.
    pub fn get_value(&self, addr: &CellAddress) -> Result<CellValue, WorkbookError> {
        let loc = self.loc(addr)?;
        Ok(self.value_at(loc).clone())
    }

    pub fn define_name(&mut self, named: NamedRange) -> Result<(), WorkbookError> {
        if !is_valid_name(&named.name) {
            return Err(WorkbookError::InvalidName(named.name));
        }
        let key = named.name.to_ascii_uppercase();
        if self.names.contains_key(&key) {
            return Err(WorkbookError::DuplicateName(named.name));
        }
        if self.sheet_index(&named.range.sheet).is_none() {
            return Err(WorkbookError::UnknownSheet(named.range.sheet.clone()));
        }
        if !self.in_bounds(named.range.start) || !self.in_bounds(named.range.end) {
            return Err(WorkbookError::NameOutOfBounds { name: named.name, range: named.range.to_string() });
        }
        self.name_order.push(key.clone());
        self.names.insert(key, named);
        self.graph = None;
        Ok(())
    }

    /// Case-insensitive lookup.
    pub fn resolve_name(&self, name: &str) -> Result<&CellRange, WorkbookError> {
        self.named(name).map(|n| &n.range).ok_or_else(|| WorkbookError::UnknownName(name.into()))
    }

    pub(crate) fn named(&self, name: &str) -> Option<&NamedRange> {
        if name.bytes().any(|b| b.is_ascii_lowercase()) {
            self.names.get(&name.to_ascii_uppercase())
        } else {
            self.names.get(name)
        }
    }

    /// Named ranges in definition order.
    pub fn names(&self) -> impl Iterator<Item = &NamedRange> {
        self.name_order.iter().filter_map(|k| self.names.get(k))
    }

    /// Allow `write_range` to replace formulas inside `range`.
    pub fn declare_writable(&mut self, range: &CellRange) -> Result<(), WorkbookError> {
        let r = self.loc_range(range)?;
        self.writable.push(r);
        Ok(())
    }

    fn is_writable(&self, loc: Loc) -> bool {
        self.writable.iter().any(|r| r.contains(loc))
    }

    /// Row-major values of `range` in one pass.
    pub fn read_range(&self, range: &CellRange) -> Result<Vec<Vec<CellValue>>, WorkbookError> {
        let r = self.loc_range(range)?;
        Ok(self.read_locs(&r))
    }

    pub(crate) fn read_locs(&self, r: &LocRange) -> Vec<Vec<CellValue>> {
        (r.start.row..=r.end.row)
            .map(|row| {
                (r.start.col..=r.end.col)
                    .map(|col| self.value_at(Loc { sheet: r.sheet, pos: CellPos::new(row, col) }).clone())
                    .collect()
            })
            .collect()
    }

    /// Store `values` as literals over `range`. The shape must match exactly.
    /// Formula cells are only overwritten inside declared writable ranges.
    pub fn write_range(&mut self, range: &CellRange, values: &[Vec<CellValue>]) -> Result<(), WorkbookError> {
        let r = self.loc_range(range)?;
        let cols = values.first().map_or(0, Vec::len);
        if values.len() != r.rows() || values.iter().any(|row| row.len() != r.cols()) {
            return Err(WorkbookError::ShapeMismatch {
                range: range.to_string(),
                expected_rows: r.rows(),
                expected_cols: r.cols(),
                rows: values.len(),
                cols,
            });
        }
        for loc in r.locs() {
            if self.cell_at(loc).is_some_and(Cell::is_formula) && !self.is_writable(loc) {
                return Err(WorkbookError::FormulaOverwrite(self.address_of(loc).to_string()));
            }
        }
        for (loc, value) in r.locs().zip(values.iter().flatten()) {
            self.put_literal(loc, value.clone());
        }
        Ok(())
    }

    /// Total populated cells across all sheets.
    pub fn populated(&self) -> usize {
        self.sheets.iter().map(Sheet::len).sum()
    }
}
