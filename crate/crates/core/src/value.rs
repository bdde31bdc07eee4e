//! Cell values and the coercion rules shared by operators and functions.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;

/// Error codes a cell can hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorCode {
    Div0,
    Value,
    Name,
    Ref,
    NotAvailable,
    Num,
    /// Reserved. Cycles are rejected when the dependency graph is built.
    Cycle,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::Div0,
        ErrorCode::Value,
        ErrorCode::Name,
        ErrorCode::Ref,
        ErrorCode::NotAvailable,
        ErrorCode::Num,
        ErrorCode::Cycle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Div0 => "#DIV/0!",
            ErrorCode::Value => "#VALUE!",
            ErrorCode::Name => "#NAME?",
            ErrorCode::Ref => "#REF!",
            ErrorCode::NotAvailable => "#N/A",
            ErrorCode::Num => "#NUM!",
            ErrorCode::Cycle => "#CYCLE!",
        }
    }

    pub fn from_code(text: &str) -> Option<ErrorCode> {
        ErrorCode::ALL
            .iter()
            .copied()
            .find(|code| code.as_str().eq_ignore_ascii_case(text))
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The scalar held by a cell.
///
/// `Number` is always finite; constructors route NaN and infinities to `#NUM!`.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum CellValue {
    #[default]
    Blank,
    Number(f64),
    Text(String),
    Boolean(bool),
    Error(ErrorCode),
}

impl CellValue {
    pub fn number(n: f64) -> CellValue {
        if n.is_finite() {
            CellValue::Number(n)
        } else {
            CellValue::Error(ErrorCode::Num)
        }
    }

    pub fn text(s: impl Into<String>) -> CellValue {
        CellValue::Text(s.into())
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, CellValue::Blank)
    }

    pub fn as_error(&self) -> Option<ErrorCode> {
        match self {
            CellValue::Error(e) => Some(*e),
            _ => None,
        }
    }

    /// Text form used by `&` and by output rendering.
    pub fn render(&self) -> String {
        match self {
            CellValue::Blank => String::new(),
            CellValue::Number(n) => format_number(*n),
            CellValue::Text(s) => s.clone(),
            CellValue::Boolean(b) => bool_text(*b).to_string(),
            CellValue::Error(e) => e.as_str().to_string(),
        }
    }

    pub fn to_number(&self) -> Result<f64, ErrorCode> {
        match self {
            CellValue::Blank => Ok(0.0),
            CellValue::Number(n) => Ok(*n),
            CellValue::Text(s) => parse_number(s).ok_or(ErrorCode::Value),
            CellValue::Boolean(b) => Ok(if *b { 1.0 } else { 0.0 }),
            CellValue::Error(e) => Err(*e),
        }
    }

    pub fn to_text(&self) -> Result<String, ErrorCode> {
        match self {
            CellValue::Error(e) => Err(*e),
            other => Ok(other.render()),
        }
    }

    pub fn to_bool(&self) -> Result<bool, ErrorCode> {
        match self {
            CellValue::Blank => Ok(false),
            CellValue::Number(n) => Ok(*n != 0.0),
            CellValue::Text(s) => {
                if s.eq_ignore_ascii_case("TRUE") {
                    Ok(true)
                } else if s.eq_ignore_ascii_case("FALSE") {
                    Ok(false)
                } else {
                    Err(ErrorCode::Value)
                }
            }
            CellValue::Boolean(b) => Ok(*b),
            CellValue::Error(e) => Err(*e),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<f64> for CellValue {
    fn from(n: f64) -> Self {
        CellValue::number(n)
    }
}

impl From<&str> for CellValue {
    fn from(s: &str) -> Self {
        CellValue::Text(s.into())
    }
}

impl From<String> for CellValue {
    fn from(s: String) -> Self {
        CellValue::Text(s)
    }
}

impl From<bool> for CellValue {
    fn from(b: bool) -> Self {
        CellValue::Boolean(b)
    }
}

impl From<ErrorCode> for CellValue {
    fn from(e: ErrorCode) -> Self {
        CellValue::Error(e)
    }
}

pub(crate) fn bool_text(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}

/// Integers render without a decimal point; everything else uses the
/// shortest decimal string that parses back to the same double.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        // also folds -0
        return "0".to_string();
    }
    n.to_string()
}

/// Strict decimal parse: optional sign, digits with an optional fraction,
/// optional exponent. Surrounding spaces are ignored. Unlike `str::parse`,
/// `inf` and `NaN` are rejected.
pub fn parse_number(text: &str) -> Option<f64> {
    let s = text.trim_matches(' ');
    let bytes = s.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return None;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != bytes.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|n| n.is_finite())
}

/// Rank used to order values of different types: numbers, then text, then booleans.
fn type_rank(v: &CellValue) -> u8 {
    match v {
        CellValue::Number(_) | CellValue::Blank => 0,
        CellValue::Text(_) => 1,
        CellValue::Boolean(_) => 2,
        CellValue::Error(_) => 3,
    }
}

/// Compare text case-insensitively over uppercased code points.
pub fn compare_text(a: &str, b: &str) -> Ordering {
    let ua = a.chars().flat_map(char::to_uppercase);
    let ub = b.chars().flat_map(char::to_uppercase);
    ua.cmp(ub)
}

/// Ordering used by the comparison operators.
///
/// A blank operand takes the zero value of the other operand's type. Errors
/// propagate, left operand first.
pub fn compare_values(a: &CellValue, b: &CellValue) -> Result<Ordering, ErrorCode> {
    if let CellValue::Error(e) = a {
        return Err(*e);
    }
    if let CellValue::Error(e) = b {
        return Err(*e);
    }
    let empty = String::new();
    let ord = match (a, b) {
        (CellValue::Blank, CellValue::Blank) => Ordering::Equal,
        (CellValue::Blank, CellValue::Text(t)) => compare_text(&empty, t),
        (CellValue::Text(t), CellValue::Blank) => compare_text(t, &empty),
        (CellValue::Blank, CellValue::Boolean(x)) => false.cmp(x),
        (CellValue::Boolean(x), CellValue::Blank) => x.cmp(&false),
        (CellValue::Blank, CellValue::Number(y)) => cmp_f64(0.0, *y),
        (CellValue::Number(x), CellValue::Blank) => cmp_f64(*x, 0.0),
        (CellValue::Number(x), CellValue::Number(y)) => cmp_f64(*x, *y),
        (CellValue::Text(x), CellValue::Text(y)) => compare_text(x, y),
        (CellValue::Boolean(x), CellValue::Boolean(y)) => x.cmp(y),
        (x, y) => type_rank(x).cmp(&type_rank(y)),
    };
    Ok(ord)
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_render_bare() {
        assert_eq!(format_number(1459.0), "1459");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(format_number(2.5), "2.5");
        assert_eq!(format_number(1e20), "100000000000000000000");
    }

    #[test]
    fn strict_number_parse() {
        assert_eq!(parse_number("3"), Some(3.0));
        assert_eq!(parse_number(" -1.5e2 "), Some(-150.0));
        assert_eq!(parse_number(".5"), Some(0.5));
        assert_eq!(parse_number("5."), Some(5.0));
        for bad in ["", "-", ".", "inf", "NaN", "1e", "1,000", "0x10", "1 2", "MCDLIX"] {
            assert_eq!(parse_number(bad), None, "{bad}");
        }
    }

    #[test]
    fn non_finite_numbers_become_num_errors() {
        assert_eq!(CellValue::number(f64::NAN), CellValue::Error(ErrorCode::Num));
        assert_eq!(CellValue::number(f64::INFINITY), CellValue::Error(ErrorCode::Num));
    }

    #[test]
    fn mixed_type_order() {
        let n = CellValue::Number(1e9);
        let t = CellValue::text("a");
        let b = CellValue::Boolean(false);
        assert_eq!(compare_values(&n, &t), Ok(Ordering::Less));
        assert_eq!(compare_values(&t, &b), Ok(Ordering::Less));
        assert_eq!(compare_values(&CellValue::text("abc"), &CellValue::text("ABC")), Ok(Ordering::Equal));
        assert_eq!(compare_values(&CellValue::Blank, &CellValue::text("")), Ok(Ordering::Equal));
        assert_eq!(compare_values(&CellValue::Blank, &CellValue::Boolean(false)), Ok(Ordering::Equal));
        assert_eq!(
            compare_values(&CellValue::Error(ErrorCode::Ref), &CellValue::Error(ErrorCode::Num)),
            Err(ErrorCode::Ref)
        );
    }

    #[test]
    fn error_codes_round_trip() {
        for code in ErrorCode::ALL {
            assert_eq!(ErrorCode::from_code(code.as_str()), Some(code));
        }
    }
}
