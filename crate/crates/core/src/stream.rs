//! Stepping records through a workbook one at a time: write the fields into
//! the input cells, recalculate, read the output cells. Also the two-sided
//! stepper used to compare sorted files.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::address::{CellAddress, CellRange};
use crate::calc::CalcError;
use crate::record::{join_fields, CsvMode, Record};
use crate::value::{CellValue, ErrorCode};
use crate::workbook::{Loc, Workbook, WorkbookError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FieldCountPolicy {
    /// The record must have exactly as many fields as the input range.
    #[default]
    Strict,
    /// Missing fields become blank; extra fields are dropped.
    PadTruncate,
}

/// Where records go in and come out of the workbook.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamLayout {
    pub input: CellRange,
    pub output: CellRange,
    pub skip_cell: Option<CellAddress>,
    pub skip_sentinel: CellValue,
    pub carry_forward: Option<CellRange>,
}

impl StreamLayout {
    pub fn default_sentinel() -> CellValue {
        CellValue::Text("Skip".into())
    }

    /// Build a layout from named ranges. The skip name must be a single cell.
    pub fn from_names(
        wb: &Workbook,
        input: &str,
        output: &str,
        skip: Option<&str>,
        carry_forward: Option<&str>,
    ) -> Result<Self, LayoutError> {
        let skip_cell = match skip {
            Some(n) => {
                let r = wb.resolve_name(n)?;
                if !r.is_single() {
                    return Err(LayoutError::SkipNotSingle(n.to_string()));
                }
                Some(CellAddress::new(r.sheet.clone(), r.start.row, r.start.col))
            }
            None => None,
        };
        Ok(StreamLayout {
            input: wb.resolve_name(input)?.clone(),
            output: wb.resolve_name(output)?.clone(),
            skip_cell,
            skip_sentinel: Self::default_sentinel(),
            carry_forward: carry_forward.map(|n| wb.resolve_name(n).cloned()).transpose()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("skip cell `{0}` must be a single cell")]
    SkipNotSingle(String),
    #[error("output range has no cells besides the skip cell")]
    EmptyPayload,
    #[error("carry-forward range has {cells} cells but the output has {payload}; use one cell or match the output")]
    CarryForwardShape { cells: usize, payload: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("{cell} evaluated to {code}")]
    Formula { cell: CellAddress, code: ErrorCode },
    #[error(transparent)]
    Calc(#[from] CalcError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// Output cell values, skip cell excluded.
    Kept(Vec<CellValue>),
    Skipped,
}

/// Render output values as one line. A single value is written as is; more
/// are joined with commas, quoted as needed in RFC 4180 mode.
pub fn render_line(values: &[CellValue], mode: CsvMode) -> String {
    match values {
        [one] => one.render(),
        _ => {
            let fields: Vec<String> = values.iter().map(CellValue::render).collect();
            join_fields(&fields, mode)
        }
    }
}

fn write_fields<S: AsRef<str>>(wb: &mut Workbook, locs: &[Loc], fields: &[S]) {
    for (i, &loc) in locs.iter().enumerate() {
        let v = fields.get(i).map_or(CellValue::Blank, |f| CellValue::Text(f.as_ref().to_string()));
        wb.put_literal(loc, v);
    }
}

pub struct RecordProcessor<'w> {
    wb: &'w mut Workbook,
    inputs: Vec<Loc>,
    payload: Vec<Loc>,
    skip: Option<Loc>,
    sentinel: CellValue,
    carry: Vec<Loc>,
    dirty: Vec<Loc>,
    policy: FieldCountPolicy,
    mode: CsvMode,
}

impl<'w> RecordProcessor<'w> {
    /// Declares the input and carry-forward ranges writable, compiles the
    /// workbook and evaluates it once.
    pub fn new(
        wb: &'w mut Workbook,
        layout: &StreamLayout,
        policy: FieldCountPolicy,
        mode: CsvMode,
    ) -> Result<Self, LayoutError> {
        let inputs: Vec<Loc> = wb.loc_range(&layout.input)?.locs().collect();
        let skip = layout.skip_cell.as_ref().map(|a| wb.loc(a)).transpose()?;
        let payload: Vec<Loc> = wb.loc_range(&layout.output)?.locs().filter(|l| Some(*l) != skip).collect();
        if payload.is_empty() {
            return Err(LayoutError::EmptyPayload);
        }
        let carry: Vec<Loc> = match &layout.carry_forward {
            Some(r) => wb.loc_range(r)?.locs().collect(),
            None => Vec::new(),
        };
        if carry.len() > 1 && carry.len() != payload.len() {
            return Err(LayoutError::CarryForwardShape { cells: carry.len(), payload: payload.len() });
        }
        wb.declare_writable(&layout.input)?;
        if let Some(r) = &layout.carry_forward {
            wb.declare_writable(r)?;
        }
        wb.compile()?;
        wb.recalculate_all()?;
        let mut dirty = inputs.clone();
        dirty.extend(carry.iter().copied());
        Ok(RecordProcessor { wb, inputs, payload, skip, sentinel: layout.skip_sentinel.clone(), carry, dirty, policy, mode })
    }

    pub fn width(&self) -> usize {
        self.inputs.len()
    }

    pub fn workbook(&self) -> &Workbook {
        self.wb
    }

    pub fn mode(&self) -> CsvMode {
        self.mode
    }

    /// Step one data record through the workbook. Records that are skipped
    /// or fail leave the carry-forward cells untouched.
    pub fn process<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<Outcome, RecordError> {
        if self.policy == FieldCountPolicy::Strict && fields.len() != self.inputs.len() {
            return Err(RecordError::FieldCount { expected: self.inputs.len(), found: fields.len() });
        }
        write_fields(self.wb, &self.inputs, fields);
        self.wb.recalculate_locs(&self.dirty)?;
        if let Some(skip) = self.skip {
            match self.wb.value_at(skip) {
                CellValue::Boolean(true) => return Ok(Outcome::Skipped),
                CellValue::Error(code) => return Err(RecordError::Formula { cell: self.wb.address_of(skip), code: *code }),
                v if *v == self.sentinel => return Ok(Outcome::Skipped),
                _ => {}
            }
        }
        let mut values = Vec::with_capacity(self.payload.len());
        for &loc in &self.payload {
            let v = self.wb.value_at(loc);
            if let CellValue::Error(code) = v {
                return Err(RecordError::Formula { cell: self.wb.address_of(loc), code: *code });
            }
            values.push(v.clone());
        }
        match self.carry.len() {
            0 => {}
            1 if values.len() > 1 => {
                let line = render_line(&values, self.mode);
                self.wb.put_literal(self.carry[0], CellValue::Text(line));
            }
            _ => {
                for (&loc, v) in self.carry.iter().zip(&values) {
                    self.wb.put_literal(loc, v.clone());
                }
            }
        }
        Ok(Outcome::Kept(values))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareStatus {
    Left,
    Right,
    Match,
}

impl CompareStatus {
    pub fn from_value(v: &CellValue) -> Option<CompareStatus> {
        match v {
            CellValue::Text(t) => match t.trim().to_ascii_uppercase().as_str() {
                "LEFT" => Some(CompareStatus::Left),
                "RIGHT" => Some(CompareStatus::Right),
                "MATCH" => Some(CompareStatus::Match),
                _ => None,
            },
            _ => None,
        }
    }
}

/// Loads a left and a right record into the workbook and reads a status
/// cell saying which side is behind.
pub struct CompareStepper<'w> {
    wb: &'w mut Workbook,
    left: Vec<Loc>,
    right: Vec<Loc>,
    status: Loc,
    dirty: Vec<Loc>,
}

impl<'w> CompareStepper<'w> {
    pub fn new(wb: &'w mut Workbook, left: &CellRange, right: &CellRange, status: &CellAddress) -> Result<Self, LayoutError> {
        let l: Vec<Loc> = wb.loc_range(left)?.locs().collect();
        let r: Vec<Loc> = wb.loc_range(right)?.locs().collect();
        let status = wb.loc(status)?;
        wb.declare_writable(left)?;
        wb.declare_writable(right)?;
        wb.compile()?;
        wb.recalculate_all()?;
        let mut dirty = l.clone();
        dirty.extend(r.iter().copied());
        Ok(CompareStepper { wb, left: l, right: r, status, dirty })
    }

    /// Fields beyond the range width are dropped; missing ones are blank.
    pub fn status<S: AsRef<str>, T: AsRef<str>>(&mut self, left: &[S], right: &[T]) -> Result<CompareStatus, StatusError> {
        write_fields(self.wb, &self.left, left);
        write_fields(self.wb, &self.right, right);
        self.wb.recalculate_locs(&self.dirty).map_err(|e| StatusError { found: e.to_string() })?;
        let v = self.wb.value_at(self.status);
        CompareStatus::from_value(v).ok_or_else(|| StatusError { found: v.render() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("status cell gave `{found}`, expected LEFT, RIGHT or MATCH")]
pub struct StatusError {
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Difference {
    /// 1-based data record number within its file.
    LeftOnly { index: usize, record: Record },
    RightOnly { index: usize, record: Record },
    /// A matched pair disagreeing in one field; `column` is 1-based.
    Field { left_index: usize, right_index: usize, column: usize, left: String, right: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CompareError<E> {
    #[error(transparent)]
    Source(E),
    #[error("left record {left_index}, right record {right_index}: {source}")]
    Status { left_index: usize, right_index: usize, source: StatusError },
}

/// Merge two sorted record streams, reporting records found on one side
/// only and, when asked, field differences between matched records.
pub fn compare_streams<E, L, R>(
    stepper: &mut CompareStepper<'_>,
    left: L,
    right: R,
    field_diffs: bool,
    mut emit: impl FnMut(Difference) -> Result<(), E>,
) -> Result<(), CompareError<E>>
where
    L: IntoIterator<Item = Result<Record, E>>,
    R: IntoIterator<Item = Result<Record, E>>,
{
    let mut left = left.into_iter().enumerate().map(|(i, r)| r.map(|r| (i + 1, r)));
    let mut right = right.into_iter().enumerate().map(|(i, r)| r.map(|r| (i + 1, r)));
    let mut l = left.next().transpose().map_err(CompareError::Source)?;
    let mut r = right.next().transpose().map_err(CompareError::Source)?;
    let emit = &mut emit;
    let mut out = |d: Difference| emit(d).map_err(CompareError::Source);
    loop {
        match (l.take(), r.take()) {
            (None, None) => return Ok(()),
            (Some((index, record)), None) => {
                out(Difference::LeftOnly { index, record })?;
                l = left.next().transpose().map_err(CompareError::Source)?;
            }
            (None, Some((index, record))) => {
                out(Difference::RightOnly { index, record })?;
                r = right.next().transpose().map_err(CompareError::Source)?;
            }
            (Some((li, lr)), Some((ri, rr))) => {
                let status = stepper
                    .status(&lr, &rr)
                    .map_err(|source| CompareError::Status { left_index: li, right_index: ri, source })?;
                match status {
                    CompareStatus::Left => {
                        out(Difference::LeftOnly { index: li, record: lr })?;
                        l = left.next().transpose().map_err(CompareError::Source)?;
                        r = Some((ri, rr));
                    }
                    CompareStatus::Right => {
                        out(Difference::RightOnly { index: ri, record: rr })?;
                        r = right.next().transpose().map_err(CompareError::Source)?;
                        l = Some((li, lr));
                    }
                    CompareStatus::Match => {
                        if field_diffs {
                            for c in 0..lr.len().max(rr.len()) {
                                let a = lr.get(c).map_or("", String::as_str);
                                let b = rr.get(c).map_or("", String::as_str);
                                if a != b {
                                    out(Difference::Field {
                                        left_index: li,
                                        right_index: ri,
                                        column: c + 1,
                                        left: a.to_string(),
                                        right: b.to_string(),
                                    })?;
                                }
                            }
                        }
                        l = left.next().transpose().map_err(CompareError::Source)?;
                        r = right.next().transpose().map_err(CompareError::Source)?;
                    }
                }
            }
        }
    }
}
