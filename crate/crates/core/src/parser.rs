//! Recursive-descent parser for the formula grammar.
//!
//! Precedence, loosest first: comparisons, `&`, `+ -`, `* /`, `^`, unary
//! sign. Every binary level is left-associative. Unary minus binds tighter
//! than `^`, so `-2^2` is `(-2)^2 = 4`, as in desktop spreadsheets and
//! unlike most programming languages.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::address::{normalize, split_a1};
use crate::ast::{BinaryOp, CellRef, Expr, ExprKind, RangeRef, Span, UnaryOp};
use crate::lexer::{tokenize, LexError, Token, TokenKind};
use crate::value::parse_number;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("at offset {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl FormulaError {
    pub fn offset(&self) -> usize {
        match self {
            FormulaError::Lex(e) => e.offset(),
            FormulaError::Parse(e) => e.offset,
        }
    }
}

/// Parse a formula. `source` must start with `=`. Offsets in errors and spans
/// are character indices into `source`.
pub fn parse_formula(source: &str) -> Result<Expr, FormulaError> {
    let Some(body) = source.strip_prefix('=') else {
        return Err(ParseError {
            offset: 0,
            expected: "`=`".into(),
            found: describe_found(source.chars().next().map(String::from)),
        }
        .into());
    };
    let mut tokens = tokenize(body).map_err(|e| shift_lex(e, 1))?;
    for t in &mut tokens {
        t.offset += 1;
    }
    let end = source.chars().count();
    let mut p = Parser { tokens: &tokens, pos: 0, end };
    let expr = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t, "end of formula").into());
    }
    Ok(expr)
}

fn shift_lex(e: LexError, by: usize) -> LexError {
    match e {
        LexError::UnterminatedString { offset } => LexError::UnterminatedString { offset: offset + by },
        LexError::IllegalCharacter { offset, found } => LexError::IllegalCharacter { offset: offset + by, found },
    }
}

fn describe_found(found: Option<String>) -> String {
    match found {
        Some(s) => alloc::format!("`{s}`"),
        None => "end of formula".to_string(),
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    end: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<&'t str> {
        self.peek()
            .filter(|t| matches!(t.kind, TokenKind::Operator | TokenKind::Punctuation))
            .map(|t| t.lexeme.as_str())
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn error_at(&self, t: &Token, expected: &str) -> ParseError {
        ParseError { offset: t.offset, expected: expected.into(), found: describe_found(Some(t.lexeme.clone())) }
    }

    fn error_here(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.error_at(t, expected),
            None => ParseError { offset: self.end, expected: expected.into(), found: describe_found(None) },
        }
    }

    fn expect(&mut self, punct: &str) -> Result<&'t Token, ParseError> {
        match self.peek() {
            Some(t) if t.is_op(punct) => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error_here(&alloc::format!("`{punct}`"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(1)
    }

    fn binary_level(&mut self, level: u8) -> Result<Expr, ParseError> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        while let Some(op) = self.peek_op().and_then(BinaryOp::from_symbol) {
            if op.precedence() != level {
                break;
            }
            self.pos += 1;
            let rhs = self.binary_level(level + 1)?;
            let span = Span { start: lhs.span.start, end: rhs.span.end };
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek_op() {
            Some("-") => UnaryOp::Neg,
            Some("+") => UnaryOp::Plus,
            _ => return self.primary(),
        };
        let start = self.bump().map(|t| t.offset).unwrap_or(self.end);
        let operand = self.unary()?;
        let span = Span { start, end: operand.span.end };
        Ok(Expr::new(ExprKind::Unary(op, Box::new(operand)), span))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(t) = self.peek() else {
            return Err(self.error_here("an operand"));
        };
        let span = Span { start: t.offset, end: t.offset + t.len_chars() };
        match t.kind {
            TokenKind::Number => {
                self.pos += 1;
                let n = parse_number(&t.lexeme).ok_or_else(|| self.error_at(t, "a finite number"))?;
                Ok(Expr::new(ExprKind::Number(n), span))
            }
            TokenKind::String => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Text(t.text_value()), span))
            }
            TokenKind::Boolean => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Boolean(t.lexeme.eq_ignore_ascii_case("TRUE")), span))
            }
            TokenKind::Name => {
                self.pos += 1;
                let name = t.lexeme.to_ascii_uppercase();
                if self.peek_op() == Some("(") {
                    self.call(name, span)
                } else {
                    Ok(Expr::new(ExprKind::Name(name), span))
                }
            }
            TokenKind::CellRef => {
                self.pos += 1;
                let first = cell_ref(&t.lexeme);
                // Function names such as LOG10 look like cell references.
                if first.sheet.is_none() && self.peek_op() == Some("(") {
                    return self.call(t.lexeme.to_ascii_uppercase(), span);
                }
                if self.peek_op() != Some(":") {
                    return Ok(Expr::new(ExprKind::Cell(first), span));
                }
                self.pos += 1;
                let second_tok = match self.peek() {
                    Some(s) if s.kind == TokenKind::CellRef => s,
                    _ => return Err(self.error_here("a cell reference")),
                };
                self.pos += 1;
                let second = cell_ref(&second_tok.lexeme);
                let sheet = match (first.sheet, second.sheet) {
                    (a, None) => a,
                    (None, Some(_)) => return Err(self.error_at(second_tok, "a reference on the same sheet")),
                    (Some(a), Some(b)) if a.eq_ignore_ascii_case(&b) => Some(a),
                    (Some(_), Some(_)) => return Err(self.error_at(second_tok, "a reference on the same sheet")),
                };
                let (start, end) = normalize(first.pos, second.pos);
                let span = Span { start: span.start, end: second_tok.offset + second_tok.len_chars() };
                Ok(Expr::new(ExprKind::Range(RangeRef { sheet, start, end }), span))
            }
            TokenKind::Punctuation if t.lexeme == "(" => {
                self.pos += 1;
                let inner = self.expr()?;
                let close = self.expect(")")?;
                Ok(Expr::new(inner.kind, Span { start: span.start, end: close.offset + 1 }))
            }
            _ => Err(self.error_at(t, "an operand")),
        }
    }

    fn call(&mut self, name: String, name_span: Span) -> Result<Expr, ParseError> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.peek_op() != Some(")") {
            loop {
                args.push(self.expr()?);
                if self.peek_op() == Some(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        let close = self.expect(")")?;
        let span = Span { start: name_span.start, end: close.offset + 1 };
        Ok(Expr::new(ExprKind::Call(name, args), span))
    }
}

fn cell_ref(lexeme: &str) -> CellRef {
    let (sheet, cell) = match lexeme.split_once('!') {
        Some((s, c)) => (Some(s.to_string()), c),
        None => (None, lexeme),
    };
    // The lexer only emits CellRef tokens whose cell part is a valid A1 reference.
    let pos = split_a1(cell).unwrap_or(crate::address::CellPos::new(1, 1));
    CellRef { sheet, pos }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::CellPos;
    use crate::ast::Reference;
    use alloc::format;

    fn p(src: &str) -> Expr {
        parse_formula(src).unwrap_or_else(|e| panic!("{src}: {e}"))
    }

    fn cell(row: u32, col: u32) -> Reference {
        Reference::Cell(CellRef { sheet: None, pos: CellPos::new(row, col) })
    }

    #[test]
    fn concat_chain_and_references() {
        let e = p("=A2&\",\"&B2");
        assert!(matches!(&e.kind, ExprKind::Binary(BinaryOp::Concat, l, _) if matches!(l.kind, ExprKind::Binary(BinaryOp::Concat, ..))));
        let refs: Vec<_> = e.references().into_iter().collect();
        assert_eq!(refs, [cell(2, 1), cell(2, 2)]);
    }

    #[test]
    fn unary_minus_binds_tighter_than_pow() {
        let e = p("=-2^2");
        match &e.kind {
            ExprKind::Binary(BinaryOp::Pow, l, r) => {
                assert!(matches!(l.kind, ExprKind::Unary(UnaryOp::Neg, _)));
                assert_eq!(r.kind, ExprKind::Number(2.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn if_with_names() {
        let e = p("=IF(Duplicate,\"Skip\",Data)");
        match &e.kind {
            ExprKind::Call(name, args) => {
                assert_eq!(name, "IF");
                assert_eq!(args.len(), 3);
                assert_eq!(args[0].kind, ExprKind::Name("DUPLICATE".into()));
                assert_eq!(args[2].kind, ExprKind::Name("DATA".into()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extracted_references() {
        assert_eq!(p("=ARABIC(D2)").references().into_iter().collect::<Vec<_>>(), [cell(2, 4)]);
        assert!(p("=1+2").references().is_empty());
        let refs = p("=SUM(A1:A3)+A1").references();
        assert_eq!(refs.len(), 2);
        assert!(refs.contains(&cell(1, 1)));
        assert!(refs.contains(&Reference::Range(RangeRef {
            sheet: None,
            start: CellPos::new(1, 1),
            end: CellPos::new(3, 1)
        })));
        assert_eq!(p("=A1+a1+$A$1").references().len(), 1);
    }

    #[test]
    fn left_associative_levels() {
        assert_eq!(format!("{}", p("=1-2-3")), "1-2-3");
        assert_eq!(format!("{}", p("=1-(2-3)")), "1-(2-3)");
        assert_eq!(format!("{}", p("=2^3^2")), "2^3^2");
        assert_eq!(format!("{}", p("=2^(3^2)")), "2^(3^2)");
        assert_eq!(format!("{}", p("=-(2^2)")), "-(2^2)");
        assert_eq!(format!("{}", p("=(1+2)*3")), "(1+2)*3");
        assert_eq!(format!("{}", p("=1=2=3")), "1=2=3");
        assert_eq!(format!("{}", p("=a1 & \"x\"\"y\"")), "A1&\"x\"\"y\"");
        assert_eq!(format!("{}", p("=sum( $B$2:a1 , Main!C3 )")), "SUM(A1:B2,Main!C3)");
        assert_eq!(format!("{}", p("=--2")), "--2");
        assert_eq!(format!("{}", p("=LOG10(1)")), "LOG10(1)");
    }

    #[test]
    fn sheet_qualified_ranges() {
        let e = p("=SUM(Rules!B8:Rules!E8)");
        assert_eq!(format!("{e}"), "SUM(Rules!B8:E8)");
        assert!(parse_formula("=SUM(Rules!B8:Main!E8)").is_err());
    }

    #[test]
    fn parse_errors() {
        let e = parse_formula("1+2").unwrap_err();
        assert_eq!(e.offset(), 0);
        let e = parse_formula("=1,2").unwrap_err();
        assert_eq!(e, FormulaError::Parse(ParseError { offset: 2, expected: "end of formula".into(), found: "`,`".into() }));
        let e = parse_formula("=1+").unwrap_err();
        assert_eq!(e.offset(), 3);
        let e = parse_formula("=SUM(1,2").unwrap_err();
        assert_eq!(e.offset(), 8);
        let e = parse_formula("=(1").unwrap_err();
        assert_eq!(e.offset(), 3);
        let e = parse_formula("=A1:").unwrap_err();
        assert_eq!(e.offset(), 4);
        let e = parse_formula("=\"abc").unwrap_err();
        assert_eq!(e, FormulaError::Lex(LexError::UnterminatedString { offset: 1 }));
        let e = parse_formula("").unwrap_err();
        assert_eq!(e.offset(), 0);
    }

    #[test]
    fn spans_cover_source() {
        let e = p("=SUM(A1, 2)");
        assert_eq!(e.span, Span { start: 1, end: 11 });
    }
}
