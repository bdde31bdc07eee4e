//! Roman numerals.
//!
//! Reading works the way the rule is laid out on a worksheet: rewrite every
//! subtractive pair into its additive spelling (`CD` → `CCCC`, `IX` → `VIIII`,
//! ...), then count the symbols. Additive spellings such as `IIII` are
//! therefore accepted as-is, while writing always produces classic form.

use alloc::string::String;

use thiserror::Error;

pub const MAX: u32 = 3999;

const SYMBOLS: [(char, u32); 7] = [('M', 1000), ('D', 500), ('C', 100), ('L', 50), ('X', 10), ('V', 5), ('I', 1)];

/// Fours first, then nines, one decade at a time.
pub const EXPAND_FOURS: [(&str, &str); 3] = [("CD", "CCCC"), ("XL", "XXXX"), ("IV", "IIII")];
pub const EXPAND_NINES: [(&str, &str); 3] = [("CM", "DCCCC"), ("XC", "LXXXX"), ("IX", "VIIII")];

const CLASSIC: [(&str, u32); 13] = [
    ("M", 1000),
    ("CM", 900),
    ("D", 500),
    ("CD", 400),
    ("C", 100),
    ("XC", 90),
    ("L", 50),
    ("XL", 40),
    ("X", 10),
    ("IX", 9),
    ("V", 5),
    ("IV", 4),
    ("I", 1),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum RomanError {
    #[error("not a roman numeral")]
    Invalid,
    #[error("roman numeral is not in a recognised form")]
    NonClassic,
    #[error("value outside 1..=3999")]
    OutOfRange,
}

/// Classic form of `n`, for `n` in `1..=3999`.
pub fn to_roman(n: u32) -> Option<String> {
    if n == 0 || n > MAX {
        return None;
    }
    let mut out = String::new();
    let mut rest = n;
    for (text, value) in CLASSIC {
        while rest >= value {
            out.push_str(text);
            rest -= value;
        }
    }
    Some(out)
}

/// Rewrite subtractive pairs into additive spelling.
pub fn expand_subtractive(numeral: &str) -> String {
    let mut s = String::from(numeral);
    for (from, to) in EXPAND_FOURS.iter().chain(EXPAND_NINES.iter()) {
        s = s.replace(from, to);
    }
    s
}

fn symbol_value(c: char) -> Option<u32> {
    SYMBOLS.iter().find(|(s, _)| *s == c).map(|(_, v)| *v)
}

/// Value of a numeral. Case-insensitive; surrounding spaces are ignored.
pub fn from_roman(numeral: &str) -> Result<u32, RomanError> {
    let upper = numeral.trim_matches(' ').to_ascii_uppercase();
    if upper.is_empty() || !upper.chars().all(|c| symbol_value(c).is_some()) {
        return Err(RomanError::Invalid);
    }
    let expanded = expand_subtractive(&upper);
    let mut total = 0u32;
    let mut previous = u32::MAX;
    for c in expanded.chars() {
        let v = symbol_value(c).ok_or(RomanError::Invalid)?;
        // after expansion a well-formed numeral never increases
        if v > previous {
            return Err(RomanError::NonClassic);
        }
        previous = v;
        total = total.saturating_add(v);
    }
    if total > MAX {
        return Err(RomanError::OutOfRange);
    }
    Ok(total)
}
