//! Builtin functions.
//!
//! Every function is total: bad input comes back as an error value. Scalar
//! arguments holding an error short-circuit before the implementation runs,
//! first error in argument order wins. Functions flagged with
//! `range_errors` also short-circuit on errors found inside range arguments.

use alloc::string::String;
use alloc::vec::Vec;

use crate::roman::{from_roman, to_roman, RomanError};
use crate::value::{compare_text, parse_number, CellValue, ErrorCode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgKind {
    /// Ranges collapse to their single cell, or `#VALUE!` when larger.
    Scalar,
    /// References arrive as ranges; other expressions as scalars.
    Range,
}

/// An evaluated argument.
#[derive(Clone, Debug, PartialEq)]
pub enum Arg<'a> {
    Scalar(CellValue),
    Range { rows: usize, cols: usize, values: Vec<&'a CellValue> },
}

pub type FunctionImpl = fn(&[Arg<'_>]) -> CellValue;

pub struct FunctionDef {
    pub name: &'static str,
    pub min_args: usize,
    /// `None` for variadic functions.
    pub max_args: Option<usize>,
    /// Kind of each positional argument; the last entry repeats.
    pub kinds: &'static [ArgKind],
    pub range_errors: bool,
    pub imp: FunctionImpl,
}

impl FunctionDef {
    pub fn kind_of(&self, index: usize) -> ArgKind {
        self.kinds.get(index).or(self.kinds.last()).copied().unwrap_or(ArgKind::Scalar)
    }

    pub fn accepts(&self, count: usize) -> bool {
        count >= self.min_args && self.max_args.is_none_or(|m| count <= m)
    }

    /// Run the function after the shared error short-circuit.
    pub fn call(&self, args: &[Arg<'_>]) -> CellValue {
        for arg in args {
            match arg {
                Arg::Scalar(CellValue::Error(e)) => return CellValue::Error(*e),
                Arg::Range { values, .. } if self.range_errors => {
                    if let Some(e) = values.iter().find_map(|v| v.as_error()) {
                        return CellValue::Error(e);
                    }
                }
                _ => {}
            }
        }
        (self.imp)(args)
    }
}

impl core::fmt::Debug for FunctionDef {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FunctionDef").field("name", &self.name).finish()
    }
}

use ArgKind::{Range as R, Scalar as S};

const fn def(
    name: &'static str,
    min_args: usize,
    max_args: Option<usize>,
    kinds: &'static [ArgKind],
    range_errors: bool,
    imp: FunctionImpl,
) -> FunctionDef {
    FunctionDef { name, min_args, max_args, kinds, range_errors, imp }
}

static REGISTRY: &[FunctionDef] = &[
    def("IF", 2, Some(3), &[S], false, if_eager),
    def("AND", 1, None, &[R], true, and),
    def("OR", 1, None, &[R], true, or),
    def("NOT", 1, Some(1), &[S], false, not),
    def("SUM", 1, None, &[R], true, sum),
    def("COUNT", 1, None, &[R], true, count),
    def("MIN", 1, None, &[R], true, min),
    def("MAX", 1, None, &[R], true, max),
    def("CONCATENATE", 1, None, &[S], false, concatenate),
    def("LEN", 1, Some(1), &[S], false, len),
    def("LEFT", 1, Some(2), &[S], false, left),
    def("RIGHT", 1, Some(2), &[S], false, right),
    def("MID", 3, Some(3), &[S], false, mid),
    def("SUBSTITUTE", 3, Some(4), &[S], false, substitute),
    def("TRIM", 1, Some(1), &[S], false, trim),
    def("UPPER", 1, Some(1), &[S], false, upper),
    def("LOWER", 1, Some(1), &[S], false, lower),
    def("VALUE", 1, Some(1), &[S], false, value),
    def("EXACT", 2, Some(2), &[S], false, exact),
    def("ISBLANK", 1, Some(1), &[R], true, isblank),
    def("VLOOKUP", 3, Some(4), &[S, R, S], false, vlookup),
    def("ROMAN", 1, Some(2), &[S], false, roman),
    def("ARABIC", 1, Some(1), &[S], false, arabic),
];

/// Look up a builtin by name, case-insensitively.
pub fn lookup(name: &str) -> Option<&'static FunctionDef> {
    REGISTRY.iter().find(|d| d.name.eq_ignore_ascii_case(name))
}

pub fn registry() -> &'static [FunctionDef] {
    REGISTRY
}

fn err(code: ErrorCode) -> CellValue {
    CellValue::Error(code)
}

/// Collapse an argument to one value: single-cell ranges yield their cell,
/// larger ranges are `#VALUE!`.
fn scalar(arg: &Arg<'_>) -> CellValue {
    match arg {
        Arg::Scalar(v) => v.clone(),
        Arg::Range { values, .. } if values.len() == 1 => values[0].clone(),
        Arg::Range { .. } => err(ErrorCode::Value),
    }
}

fn text_arg(args: &[Arg<'_>], i: usize) -> Result<String, ErrorCode> {
    scalar(&args[i]).to_text()
}

fn number_arg(args: &[Arg<'_>], i: usize) -> Result<f64, ErrorCode> {
    scalar(&args[i]).to_number()
}

/// Optional non-negative count argument, truncated toward zero.
fn count_arg(args: &[Arg<'_>], i: usize, default: usize) -> Result<usize, ErrorCode> {
    match args.get(i) {
        None => Ok(default),
        Some(a) => {
            let n = libm::trunc(scalar(a).to_number()?);
            if n < 0.0 {
                Err(ErrorCode::Value)
            } else {
                Ok(n.min(usize::MAX as f64) as usize)
            }
        }
    }
}

fn lift(r: Result<CellValue, ErrorCode>) -> CellValue {
    r.unwrap_or_else(CellValue::Error)
}

fn if_eager(args: &[Arg<'_>]) -> CellValue {
    lift(scalar(&args[0]).to_bool().map(|c| {
        if c {
            scalar(&args[1])
        } else {
            args.get(2).map(scalar).unwrap_or(CellValue::Boolean(false))
        }
    }))
}

/// Numbers taken from the arguments: scalars are coerced, range members are
/// used only when they hold numbers.
fn numbers(args: &[Arg<'_>]) -> Result<Vec<f64>, ErrorCode> {
    let mut out = Vec::new();
    for arg in args {
        match arg {
            Arg::Scalar(v) => out.push(v.to_number()?),
            Arg::Range { values, .. } => out.extend(values.iter().filter_map(|v| match v {
                CellValue::Number(n) => Some(*n),
                _ => None,
            })),
        }
    }
    Ok(out)
}

fn sum(args: &[Arg<'_>]) -> CellValue {
    lift(numbers(args).map(|ns| CellValue::number(ns.iter().sum())))
}

fn count(args: &[Arg<'_>]) -> CellValue {
    let n: usize = args
        .iter()
        .map(|a| match a {
            Arg::Scalar(v) => usize::from(v.to_number().is_ok()),
            Arg::Range { values, .. } => values.iter().filter(|v| matches!(v, CellValue::Number(_))).count(),
        })
        .sum();
    CellValue::Number(n as f64)
}

fn min(args: &[Arg<'_>]) -> CellValue {
    lift(numbers(args).map(|ns| CellValue::number(ns.into_iter().reduce(f64::min).unwrap_or(0.0))))
}

fn max(args: &[Arg<'_>]) -> CellValue {
    lift(numbers(args).map(|ns| CellValue::number(ns.into_iter().reduce(f64::max).unwrap_or(0.0))))
}

fn booleans(args: &[Arg<'_>]) -> Result<Vec<bool>, ErrorCode> {
    let mut out = Vec::new();
    for arg in args {
        match arg {
            Arg::Scalar(v) => out.push(v.to_bool()?),
            Arg::Range { values, .. } => out.extend(values.iter().filter_map(|v| match v {
                CellValue::Boolean(b) => Some(*b),
                CellValue::Number(n) => Some(*n != 0.0),
                _ => None,
            })),
        }
    }
    if out.is_empty() {
        return Err(ErrorCode::Value);
    }
    Ok(out)
}

fn and(args: &[Arg<'_>]) -> CellValue {
    lift(booleans(args).map(|bs| CellValue::Boolean(bs.iter().all(|b| *b))))
}

fn or(args: &[Arg<'_>]) -> CellValue {
    lift(booleans(args).map(|bs| CellValue::Boolean(bs.iter().any(|b| *b))))
}

fn not(args: &[Arg<'_>]) -> CellValue {
    lift(scalar(&args[0]).to_bool().map(|b| CellValue::Boolean(!b)))
}

fn concatenate(args: &[Arg<'_>]) -> CellValue {
    let mut out = String::new();
    for a in args {
        match scalar(a).to_text() {
            Ok(t) => out.push_str(&t),
            Err(e) => return err(e),
        }
    }
    CellValue::Text(out)
}

fn len(args: &[Arg<'_>]) -> CellValue {
    lift(text_arg(args, 0).map(|t| CellValue::Number(t.chars().count() as f64)))
}

fn left(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let t = text_arg(args, 0)?;
        let n = count_arg(args, 1, 1)?;
        Ok(CellValue::Text(t.chars().take(n).collect()))
    })())
}

fn right(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let t = text_arg(args, 0)?;
        let n = count_arg(args, 1, 1)?;
        let total = t.chars().count();
        Ok(CellValue::Text(t.chars().skip(total.saturating_sub(n)).collect()))
    })())
}

fn mid(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let t = text_arg(args, 0)?;
        let start = libm::trunc(number_arg(args, 1)?);
        if start < 1.0 {
            return Err(ErrorCode::Value);
        }
        let n = count_arg(args, 2, 0)?;
        let skip = (start as usize).saturating_sub(1);
        Ok(CellValue::Text(t.chars().skip(skip).take(n).collect()))
    })())
}

fn substitute(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let text = text_arg(args, 0)?;
        let old = text_arg(args, 1)?;
        let new = text_arg(args, 2)?;
        if old.is_empty() {
            return Ok(CellValue::Text(text));
        }
        let Some(instance) = args.get(3) else {
            return Ok(CellValue::Text(text.replace(&old, &new)));
        };
        let k = libm::trunc(scalar(instance).to_number()?);
        if k < 1.0 {
            return Err(ErrorCode::Value);
        }
        let k = k as usize;
        match text.match_indices(old.as_str()).nth(k - 1) {
            Some((at, _)) => {
                let mut out = String::with_capacity(text.len());
                out.push_str(&text[..at]);
                out.push_str(&new);
                out.push_str(&text[at + old.len()..]);
                Ok(CellValue::Text(out))
            }
            None => Ok(CellValue::Text(text)),
        }
    })())
}

/// Strip leading and trailing spaces and collapse inner runs to one space.
pub fn trim_spaces(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn trim(args: &[Arg<'_>]) -> CellValue {
    lift(text_arg(args, 0).map(|t| CellValue::Text(trim_spaces(&t))))
}

fn upper(args: &[Arg<'_>]) -> CellValue {
    lift(text_arg(args, 0).map(|t| CellValue::Text(t.to_uppercase())))
}

fn lower(args: &[Arg<'_>]) -> CellValue {
    lift(text_arg(args, 0).map(|t| CellValue::Text(t.to_lowercase())))
}

fn value(args: &[Arg<'_>]) -> CellValue {
    match scalar(&args[0]) {
        CellValue::Blank => CellValue::Number(0.0),
        CellValue::Number(n) => CellValue::Number(n),
        CellValue::Text(t) => parse_number(&t).map(CellValue::Number).unwrap_or(err(ErrorCode::Value)),
        CellValue::Boolean(_) => err(ErrorCode::Value),
        CellValue::Error(e) => err(e),
    }
}

fn exact(args: &[Arg<'_>]) -> CellValue {
    lift((|| Ok(CellValue::Boolean(text_arg(args, 0)? == text_arg(args, 1)?)))())
}

fn isblank(args: &[Arg<'_>]) -> CellValue {
    match &args[0] {
        Arg::Scalar(v) => CellValue::Boolean(v.is_blank()),
        Arg::Range { values, .. } if values.len() == 1 => CellValue::Boolean(values[0].is_blank()),
        Arg::Range { .. } => err(ErrorCode::Value),
    }
}

fn lookup_matches(needle: &CellValue, candidate: &CellValue) -> bool {
    match (needle, candidate) {
        (CellValue::Number(a), CellValue::Number(b)) => a == b,
        (CellValue::Text(a), CellValue::Text(b)) => compare_text(a, b).is_eq(),
        (CellValue::Boolean(a), CellValue::Boolean(b)) => a == b,
        _ => false,
    }
}

/// Exact-match lookup down the first column of a table.
fn vlookup(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let needle = scalar(&args[0]);
        let (rows, cols, values) = match &args[1] {
            Arg::Range { rows, cols, values } => (*rows, *cols, values),
            Arg::Scalar(_) => return Err(ErrorCode::Value),
        };
        let col = libm::trunc(number_arg(args, 2)?);
        if col < 1.0 {
            return Err(ErrorCode::Value);
        }
        if col > cols as f64 {
            return Err(ErrorCode::Ref);
        }
        if let Some(mode) = args.get(3) {
            // approximate matching is not offered
            if scalar(mode).to_bool()? {
                return Err(ErrorCode::Value);
            }
        }
        let col = col as usize - 1;
        for r in 0..rows {
            if lookup_matches(&needle, values[r * cols]) {
                return Ok(match values[r * cols + col] {
                    CellValue::Blank => CellValue::Number(0.0),
                    other => other.clone(),
                });
            }
        }
        Err(ErrorCode::NotAvailable)
    })())
}

fn roman(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let n = number_arg(args, 0)?;
        if let Some(form) = args.get(1) {
            if scalar(form).to_number()? != 0.0 {
                return Err(ErrorCode::Value);
            }
        }
        if libm::trunc(n) != n || !(1.0..=f64::from(crate::roman::MAX)).contains(&n) {
            return Err(ErrorCode::Num);
        }
        to_roman(n as u32).map(CellValue::Text).ok_or(ErrorCode::Num)
    })())
}

fn arabic(args: &[Arg<'_>]) -> CellValue {
    lift((|| {
        let text = text_arg(args, 0)?;
        match from_roman(&text) {
            Ok(n) => Ok(CellValue::Number(f64::from(n))),
            Err(RomanError::Invalid) => Err(ErrorCode::Value),
            Err(RomanError::NonClassic | RomanError::OutOfRange) => Err(ErrorCode::Num),
        }
    })())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn t(s: &str) -> Arg<'static> {
        Arg::Scalar(CellValue::text(s))
    }

    fn n(x: f64) -> Arg<'static> {
        Arg::Scalar(CellValue::Number(x))
    }

    fn call(name: &str, args: &[Arg<'_>]) -> CellValue {
        let d = lookup(name).unwrap();
        assert!(d.accepts(args.len()), "{name} arity");
        d.call(args)
    }

    #[test]
    fn registry_names_unique() {
        let mut all: Vec<_> = registry().iter().map(|d| d.name.to_string()).collect();
        all.sort();
        let before = all.len();
        all.dedup();
        assert_eq!(before, all.len());
        assert!(lookup("vlookup").is_some());
        assert!(lookup("NOPE").is_none());
    }

    #[test]
    fn substitute_expansion_step() {
        assert_eq!(call("SUBSTITUTE", &[t("MCDLIX"), t("CD"), t("CCCC")]), CellValue::text("MCCCCLIX"));
        assert_eq!(call("SUBSTITUTE", &[t("a-b-c"), t("-"), t("+"), n(2.0)]), CellValue::text("a-b+c"));
        assert_eq!(call("SUBSTITUTE", &[t("abc"), t(""), t("x")]), CellValue::text("abc"));
        assert_eq!(call("SUBSTITUTE", &[t("abc"), t("b"), t("x"), n(0.0)]), CellValue::Error(ErrorCode::Value));
    }

    #[test]
    fn skip_sentinel_if() {
        assert_eq!(call("IF", &[Arg::Scalar(CellValue::Boolean(true)), t("Skip"), n(7.0)]), CellValue::text("Skip"));
        assert_eq!(call("IF", &[Arg::Scalar(CellValue::Boolean(false)), t("Skip")]), CellValue::Boolean(false));
    }

    // Table of the seven symbol values, checked row by row.
    #[test]
    fn vlookup_symbol_table() {
        let table: Vec<CellValue> = [("I", 1.0), ("V", 5.0), ("X", 10.0), ("L", 50.0), ("C", 100.0), ("D", 500.0), ("M", 1000.0)]
            .iter()
            .flat_map(|(s, v)| [CellValue::text(*s), CellValue::Number(*v)])
            .collect();
        let refs: Vec<&CellValue> = table.iter().collect();
        for row in 0..7 {
            let key = table[row * 2].clone();
            let expect = table[row * 2 + 1].clone();
            let got = call("VLOOKUP", &[Arg::Scalar(key), Arg::Range { rows: 7, cols: 2, values: refs.clone() }, n(2.0)]);
            assert_eq!(got, expect);
        }
        let range = || Arg::Range { rows: 7, cols: 2, values: refs.clone() };
        assert_eq!(call("VLOOKUP", &[t("d"), range(), n(2.0)]), CellValue::Number(500.0));
        assert_eq!(call("VLOOKUP", &[t("Q"), range(), n(2.0)]), CellValue::Error(ErrorCode::NotAvailable));
        assert_eq!(call("VLOOKUP", &[t("D"), range(), n(3.0)]), CellValue::Error(ErrorCode::Ref));
        assert_eq!(call("VLOOKUP", &[t("D"), range(), n(0.0)]), CellValue::Error(ErrorCode::Value));
        assert_eq!(
            call("VLOOKUP", &[t("D"), range(), n(2.0), Arg::Scalar(CellValue::Boolean(true))]),
            CellValue::Error(ErrorCode::Value)
        );
        assert_eq!(
            call("VLOOKUP", &[t("D"), range(), n(2.0), Arg::Scalar(CellValue::Boolean(false))]),
            CellValue::Number(500.0)
        );
    }

    #[test]
    fn trim_superfluous_spaces() {
        assert_eq!(call("TRIM", &[t("  Item ")]), CellValue::text("Item"));
        assert_eq!(call("TRIM", &[t(" a   b ")]), CellValue::text("a b"));
    }

    #[test]
    fn text_slicing() {
        assert_eq!(call("LEFT", &[t("Toga")]), CellValue::text("T"));
        assert_eq!(call("LEFT", &[t("Toga"), n(2.0)]), CellValue::text("To"));
        assert_eq!(call("RIGHT", &[t("Toga"), n(3.0)]), CellValue::text("oga"));
        assert_eq!(call("RIGHT", &[t("Toga"), n(9.0)]), CellValue::text("Toga"));
        assert_eq!(call("MID", &[t("Purple"), n(2.0), n(3.0)]), CellValue::text("urp"));
        assert_eq!(call("MID", &[t("Purple"), n(0.0), n(3.0)]), CellValue::Error(ErrorCode::Value));
        assert_eq!(call("LEFT", &[t("Toga"), n(-1.0)]), CellValue::Error(ErrorCode::Value));
        assert_eq!(call("LEN", &[t("café")]), CellValue::Number(4.0));
        assert_eq!(call("UPPER", &[t("toga")]), CellValue::text("TOGA"));
        assert_eq!(call("LOWER", &[t("TOGA")]), CellValue::text("toga"));
        assert_eq!(call("CONCATENATE", &[n(1.0), t(","), Arg::Scalar(CellValue::Boolean(true))]), CellValue::text("1,TRUE"));
    }

    #[test]
    fn aggregates_skip_text_in_ranges() {
        let cells = [CellValue::Number(1.0), CellValue::text("x"), CellValue::Blank, CellValue::Number(4.0)];
        let refs: Vec<&CellValue> = cells.iter().collect();
        let r = || Arg::Range { rows: 4, cols: 1, values: refs.clone() };
        assert_eq!(call("SUM", &[r(), t("3")]), CellValue::Number(8.0));
        assert_eq!(call("SUM", &[t("x")]), CellValue::Error(ErrorCode::Value));
        assert_eq!(call("COUNT", &[r(), t("x"), t("2")]), CellValue::Number(3.0));
        assert_eq!(call("MIN", &[r()]), CellValue::Number(1.0));
        assert_eq!(call("MAX", &[r(), n(-3.0)]), CellValue::Number(4.0));
        assert_eq!(call("MAX", &[Arg::Range { rows: 1, cols: 1, values: vec![&cells[1]] }]), CellValue::Number(0.0));
    }

    #[test]
    fn errors_propagate_first_in_order() {
        let na = CellValue::Error(ErrorCode::NotAvailable);
        let refs = vec![&na];
        assert_eq!(
            call("SUM", &[Arg::Range { rows: 1, cols: 1, values: refs }, Arg::Scalar(CellValue::Error(ErrorCode::Div0))]),
            CellValue::Error(ErrorCode::NotAvailable)
        );
        assert_eq!(call("LEN", &[Arg::Scalar(CellValue::Error(ErrorCode::Ref))]), CellValue::Error(ErrorCode::Ref));
    }

    #[test]
    fn logic() {
        let tr = || Arg::Scalar(CellValue::Boolean(true));
        let fa = || Arg::Scalar(CellValue::Boolean(false));
        assert_eq!(call("AND", &[tr(), tr()]), CellValue::Boolean(true));
        assert_eq!(call("AND", &[tr(), fa()]), CellValue::Boolean(false));
        assert_eq!(call("OR", &[fa(), n(2.0)]), CellValue::Boolean(true));
        assert_eq!(call("NOT", &[t("true")]), CellValue::Boolean(false));
        assert_eq!(call("AND", &[t("maybe")]), CellValue::Error(ErrorCode::Value));
        let txt = CellValue::text("x");
        assert_eq!(
            call("OR", &[Arg::Range { rows: 1, cols: 1, values: vec![&txt] }]),
            CellValue::Error(ErrorCode::Value)
        );
    }

    #[test]
    fn value_exact_isblank() {
        assert_eq!(call("VALUE", &[t(" 12.5 ")]), CellValue::Number(12.5));
        assert_eq!(call("VALUE", &[t("MCDLIX")]), CellValue::Error(ErrorCode::Value));
        assert_eq!(call("EXACT", &[t("Toga"), t("toga")]), CellValue::Boolean(false));
        assert_eq!(call("EXACT", &[t("Toga"), t("Toga")]), CellValue::Boolean(true));
        let blank = CellValue::Blank;
        assert_eq!(call("ISBLANK", &[Arg::Range { rows: 1, cols: 1, values: vec![&blank] }]), CellValue::Boolean(true));
        assert_eq!(call("ISBLANK", &[t("")]), CellValue::Boolean(false));
    }

    #[test]
    fn roman_functions() {
        assert_eq!(call("ARABIC", &[t("MCDLIX")]), CellValue::Number(1459.0));
        assert_eq!(call("ARABIC", &[t("")]), CellValue::Error(ErrorCode::Value));
        assert_eq!(call("ARABIC", &[t("IM")]), CellValue::Error(ErrorCode::Num));
        assert_eq!(call("ROMAN", &[n(1459.0)]), CellValue::text("MCDLIX"));
        assert_eq!(call("ROMAN", &[t("1459")]), CellValue::text("MCDLIX"));
        assert_eq!(call("ROMAN", &[n(0.0)]), CellValue::Error(ErrorCode::Num));
        assert_eq!(call("ROMAN", &[n(4000.0)]), CellValue::Error(ErrorCode::Num));
        assert_eq!(call("ROMAN", &[n(1.5)]), CellValue::Error(ErrorCode::Num));
        assert_eq!(call("ROMAN", &[t("x")]), CellValue::Error(ErrorCode::Value));
    }
}
