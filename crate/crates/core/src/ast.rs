//! Formula syntax tree.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::address::CellPos;
use crate::value::{bool_text, format_number};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    /// Sheet qualifier as written; `None` means the formula's own sheet.
    pub sheet: Option<String>,
    pub pos: CellPos,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangeRef {
    pub sheet: Option<String>,
    pub start: CellPos,
    pub end: CellPos,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reference {
    Cell(CellRef),
    Range(RangeRef),
    /// Uppercased defined name.
    Name(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinaryOp> {
        Some(match s {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "^" => BinaryOp::Pow,
            "&" => BinaryOp::Concat,
            "=" => BinaryOp::Eq,
            "<>" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            _ => return None,
        })
    }

    /// Binding strength; all binary operators associate to the left.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 1,
            BinaryOp::Concat => 2,
            BinaryOp::Add | BinaryOp::Sub => 3,
            BinaryOp::Mul | BinaryOp::Div => 4,
            BinaryOp::Pow => 5,
        }
    }
}

const UNARY_PREC: u8 = 6;
const PRIMARY_PREC: u8 = 7;

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Text(String),
    Boolean(bool),
    Cell(CellRef),
    Range(RangeRef),
    /// Uppercased defined name.
    Name(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Uppercased function name and its arguments.
    Call(String, Vec<Expr>),
}

/// A parsed formula. Equality compares structure only; spans are ignored.
#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Unary(..) => UNARY_PREC,
            ExprKind::Binary(op, ..) => op.precedence(),
            _ => PRIMARY_PREC,
        }
    }

    /// Every cell, range and name the formula mentions, duplicates collapsed.
    pub fn references(&self) -> BTreeSet<Reference> {
        let mut out = BTreeSet::new();
        self.collect_references(&mut out);
        out
    }

    fn collect_references(&self, out: &mut BTreeSet<Reference>) {
        match &self.kind {
            ExprKind::Cell(c) => {
                out.insert(Reference::Cell(c.clone()));
            }
            ExprKind::Range(r) => {
                out.insert(Reference::Range(r.clone()));
            }
            ExprKind::Name(n) => {
                out.insert(Reference::Name(n.clone()));
            }
            ExprKind::Unary(_, e) => e.collect_references(out),
            ExprKind::Binary(_, l, r) => {
                l.collect_references(out);
                r.collect_references(out);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.collect_references(out)),
            ExprKind::Number(_) | ExprKind::Text(_) | ExprKind::Boolean(_) => {}
        }
    }
}

pub fn extract_references(ast: &Expr) -> BTreeSet<Reference> {
    ast.references()
}

fn write_sheet(f: &mut fmt::Formatter<'_>, sheet: &Option<String>) -> fmt::Result {
    match sheet {
        Some(s) => write!(f, "{s}!"),
        None => Ok(()),
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_sheet(f, &self.sheet)?;
        write!(f, "{}", self.pos)
    }
}

impl fmt::Display for RangeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_sheet(f, &self.sheet)?;
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Cell(c) => c.fmt(f),
            Reference::Range(r) => r.fmt(f),
            Reference::Name(n) => f.write_str(n),
        }
    }
}

/// Canonical text, without the leading `=`. Parentheses appear only where
/// precedence requires them, so the output re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(n) => f.write_str(&format_number(*n)),
            ExprKind::Text(s) => {
                f.write_str("\"")?;
                for part in s.split('"').enumerate() {
                    if part.0 > 0 {
                        f.write_str("\"\"")?;
                    }
                    f.write_str(part.1)?;
                }
                f.write_str("\"")
            }
            ExprKind::Boolean(b) => f.write_str(bool_text(*b)),
            ExprKind::Cell(c) => c.fmt(f),
            ExprKind::Range(r) => r.fmt(f),
            ExprKind::Name(n) => f.write_str(n),
            ExprKind::Unary(op, e) => {
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Plus => "+",
                })?;
                write_operand(f, e, e.precedence() < UNARY_PREC)
            }
            ExprKind::Binary(op, l, r) => {
                let p = op.precedence();
                write_operand(f, l, l.precedence() < p)?;
                f.write_str(op.symbol())?;
                write_operand(f, r, r.precedence() <= p)
            }
            ExprKind::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    a.fmt(f)?;
                }
                f.write_str(")")
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        fmt::Display::fmt(e, f)
    }
}
