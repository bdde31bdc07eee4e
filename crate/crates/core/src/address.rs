//! A1-notation addressing.

use alloc::string::String;
use core::fmt;

use thiserror::Error;

/// Default row ceiling, matching desktop spreadsheets. Workbooks may raise it.
pub const MAX_ROWS: u32 = 1_048_576;
/// Column ceiling (`XFD`).
pub const MAX_COLS: u32 = 16_384;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("bad cell address `{text}`")]
pub struct BadAddress {
    pub text: String,
}

/// A sheet-relative position, 1-based. Ordered row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellPos {
    pub row: u32,
    pub col: u32,
}

impl CellPos {
    pub const fn new(row: u32, col: u32) -> Self {
        CellPos { row, col }
    }
}

impl fmt::Display for CellPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_column(f, self.col)?;
        write!(f, "{}", self.row)
    }
}

/// A fully qualified cell.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellAddress {
    pub sheet: String,
    pub row: u32,
    pub col: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, row: u32, col: u32) -> Self {
        CellAddress { sheet: sheet.into(), row, col }
    }

    pub fn pos(&self) -> CellPos {
        CellPos::new(self.row, self.col)
    }

    /// Parse `Sheet!A1`.
    pub fn parse(text: &str) -> Result<CellAddress, BadAddress> {
        let (sheet, cell) = text.split_once('!').ok_or_else(|| bad(text))?;
        if sheet.is_empty() {
            return Err(bad(text));
        }
        let pos = parse_a1(cell)?;
        Ok(CellAddress::new(sheet, pos.row, pos.col))
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", self.sheet, self.pos())
    }
}

/// A rectangle on one sheet. Corners are always normalized so that
/// `start <= end` on both axes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRange {
    pub sheet: String,
    pub start: CellPos,
    pub end: CellPos,
}

impl CellRange {
    pub fn new(sheet: impl Into<String>, a: CellPos, b: CellPos) -> Self {
        let (start, end) = normalize(a, b);
        CellRange { sheet: sheet.into(), start, end }
    }

    pub fn single(addr: &CellAddress) -> Self {
        CellRange::new(addr.sheet.clone(), addr.pos(), addr.pos())
    }

    /// Parse `Sheet!A1:B2` or `Sheet!A1`. Inverted corners are normalized.
    pub fn parse(text: &str) -> Result<CellRange, BadAddress> {
        let (sheet, rest) = text.split_once('!').ok_or_else(|| bad(text))?;
        let sheet = sheet.trim();
        if sheet.is_empty() {
            return Err(bad(text));
        }
        let (a, b) = match rest.split_once(':') {
            Some((a, b)) => (parse_a1(a.trim())?, parse_a1(b.trim())?),
            None => {
                let p = parse_a1(rest.trim())?;
                (p, p)
            }
        };
        Ok(CellRange::new(sheet, a, b))
    }

    pub fn rows(&self) -> usize {
        (self.end.row - self.start.row) as usize + 1
    }

    pub fn cols(&self) -> usize {
        (self.end.col - self.start.col) as usize + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Always false: a range covers at least one cell.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_single(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, pos: CellPos) -> bool {
        contains(self.start, self.end, pos)
    }

    /// Member cells in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = CellPos> + '_ {
        let (start, end) = (self.start, self.end);
        (start.row..=end.row).flat_map(move |r| (start.col..=end.col).map(move |c| CellPos::new(r, c)))
    }

    pub fn addresses(&self) -> impl Iterator<Item = CellAddress> + '_ {
        self.positions().map(|p| CellAddress::new(self.sheet.clone(), p.row, p.col))
    }
}

impl fmt::Display for CellRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_single() {
            write!(f, "{}!{}", self.sheet, self.start)
        } else {
            write!(f, "{}!{}:{}", self.sheet, self.start, self.end)
        }
    }
}

pub(crate) fn normalize(a: CellPos, b: CellPos) -> (CellPos, CellPos) {
    (
        CellPos::new(a.row.min(b.row), a.col.min(b.col)),
        CellPos::new(a.row.max(b.row), a.col.max(b.col)),
    )
}

pub(crate) fn contains(start: CellPos, end: CellPos, pos: CellPos) -> bool {
    pos.row >= start.row && pos.row <= end.row && pos.col >= start.col && pos.col <= end.col
}

fn bad(text: &str) -> BadAddress {
    BadAddress { text: text.into() }
}

/// `A` → 1, `Z` → 26, `AA` → 27. Case-insensitive. At most three letters and
/// no further than `XFD`.
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut col: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        col = col * 26 + u32::from(b.to_ascii_uppercase() - b'A' + 1);
    }
    (col <= MAX_COLS).then_some(col)
}

pub fn column_letters(col: u32) -> String {
    let mut out = String::new();
    let _ = write_column(&mut out, col);
    out
}

fn write_column(w: &mut impl fmt::Write, col: u32) -> fmt::Result {
    let mut buf = [0u8; 8];
    let mut n = col;
    let mut i = buf.len();
    while n > 0 {
        let rem = (n - 1) % 26;
        i -= 1;
        buf[i] = b'A' + rem as u8;
        n = (n - 1) / 26;
    }
    // buf holds only ASCII letters
    w.write_str(core::str::from_utf8(&buf[i..]).unwrap_or(""))
}

/// Parse a sheet-relative `A1` reference. `$` markers are accepted and ignored.
/// Rows are only checked for being non-zero here; workbooks enforce their own
/// row ceiling.
pub fn parse_a1(text: &str) -> Result<CellPos, BadAddress> {
    split_a1(text).ok_or_else(|| bad(text))
}

pub(crate) fn split_a1(text: &str) -> Option<CellPos> {
    let s = text.strip_prefix('$').unwrap_or(text);
    let letters_end = s.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(s.len());
    let (letters, rest) = s.split_at(letters_end);
    let digits = rest.strip_prefix('$').unwrap_or(rest);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let col = column_index(letters)?;
    let row: u32 = digits.parse().ok()?;
    Some(CellPos::new(row, col))
}

pub fn format_a1(pos: CellPos) -> String {
    use alloc::string::ToString;
    pos.to_string()
}
