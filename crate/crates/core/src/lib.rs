//! Core of the hands-off spreadsheet engine: a formula language, a sparse
//! workbook, a dependency-ordered recalculation engine and the pure pieces of
//! the record pipeline (CSV codec, sort collation, control tables, subtotal
//! aggregation, per-record stepping).
//!
//! The crate is `no_std` and needs only `alloc`. File access, external
//! sorting and the command line live in the `handsoff` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod address;
pub mod ast;
pub mod calc;
pub mod collate;
pub mod control;
pub mod functions;
pub mod lexer;
pub mod parser;
pub mod record;
pub mod report;
pub mod roman;
pub mod stream;
pub mod value;
pub mod workbook;

pub use address::{parse_a1, CellAddress, CellPos, CellRange};
pub use ast::{extract_references, Expr, Reference};
pub use calc::{build_graph, evaluate, CalcError, DependencyGraph, EvalContext};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse_formula, FormulaError, ParseError};
pub use value::{CellValue, ErrorCode};
pub use workbook::{Cell, CellContent, Formula, GridLimits, NamedRange, Workbook, WorkbookError};
pub use collate::{sort_records, Collation, KeyColumn, ResolvedKey, SortKey, SortOrder};
pub use control::{parse_sort_params, validate_headers, ControlBlock, ControlError, HeaderMap, SortSpec, Warning};
pub use record::{join_fields, split_fields, CsvError, CsvMode, Record};
pub use report::{aggregate, parse_subtotal_spec, render_report, ReportError, ReportFormat, ReportTable, SubtotalJob, SubtotalSpec};
pub use stream::{CompareStepper, FieldCountPolicy, Outcome, RecordError, RecordProcessor, StreamLayout};
