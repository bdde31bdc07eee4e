//! Delimited-record codec.
//!
//! Two dialects: RFC 4180 (quoted fields, `""` escapes, line breaks inside
//! quotes) and a naive split on every comma that mirrors a plain
//! `Split(line, ",")` with no quote handling at all.

use alloc::borrow::Cow;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// One row of text fields.
pub type Record = Vec<String>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CsvMode {
    #[default]
    Rfc4180,
    NaiveSplit,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CsvError {
    #[error("unterminated quoted field starting at character {offset}")]
    Unterminated { offset: usize },
    #[error("unexpected `{found}` after closing quote at character {offset}")]
    AfterQuote { offset: usize, found: char },
    #[error("line break inside a record is not allowed in naive-split mode")]
    EmbeddedNewline,
}

/// Whether `text` ends inside a quoted field, so the record continues on the
/// next physical line. Always false in naive mode.
pub fn is_incomplete(text: &str, mode: CsvMode) -> bool {
    mode == CsvMode::Rfc4180 && text.bytes().filter(|&b| b == b'"').count() % 2 == 1
}

pub fn split_fields(text: &str, mode: CsvMode) -> Result<Record, CsvError> {
    match mode {
        CsvMode::NaiveSplit => {
            if text.contains(['\n', '\r']) {
                return Err(CsvError::EmbeddedNewline);
            }
            Ok(text.split(',').map(String::from).collect())
        }
        CsvMode::Rfc4180 => split_rfc4180(text),
    }
}

fn split_rfc4180(text: &str) -> Result<Record, CsvError> {
    let mut fields = Vec::new();
    let mut chars = text.chars().enumerate().peekable();
    loop {
        let mut field = String::new();
        match chars.peek() {
            Some(&(start, '"')) => {
                chars.next();
                loop {
                    match chars.next() {
                        None => return Err(CsvError::Unterminated { offset: start }),
                        Some((_, '"')) => {
                            if matches!(chars.peek(), Some((_, '"'))) {
                                chars.next();
                                field.push('"');
                            } else {
                                break;
                            }
                        }
                        Some((_, c)) => field.push(c),
                    }
                }
                match chars.next() {
                    None => {
                        fields.push(field);
                        return Ok(fields);
                    }
                    Some((_, ',')) => fields.push(field),
                    Some((offset, found)) => return Err(CsvError::AfterQuote { offset, found }),
                }
            }
            _ => loop {
                match chars.next() {
                    None => {
                        fields.push(field);
                        return Ok(fields);
                    }
                    Some((_, ',')) => {
                        fields.push(field);
                        break;
                    }
                    Some((_, c)) => field.push(c),
                }
            },
        }
    }
}

/// Quote a field if it holds a comma, quote or line break.
pub fn quote_field(field: &str) -> Cow<'_, str> {
    if field.contains([',', '"', '\n', '\r']) {
        let mut out = String::with_capacity(field.len() + 2);
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
        Cow::Owned(out)
    } else {
        Cow::Borrowed(field)
    }
}

/// Join fields into one record line (no terminator).
pub fn join_fields<S: AsRef<str>>(fields: &[S], mode: CsvMode) -> String {
    let mut out = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match mode {
            CsvMode::Rfc4180 => out.push_str(&quote_field(f.as_ref())),
            CsvMode::NaiveSplit => out.push_str(f.as_ref()),
        }
    }
    out
}
