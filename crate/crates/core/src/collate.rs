//! Sort keys and record comparison.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::value::{compare_text, parse_number};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SortOrder {
    #[default]
    Asc,
    Desc,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Collation {
    /// Case-insensitive comparison of uppercased code points.
    Text,
    /// Numeric when both fields are numbers, numbers before text otherwise,
    /// case-insensitive text between two non-numbers.
    #[default]
    NumericAware,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyColumn {
    /// 1-based.
    Index(usize),
    /// Header name, matched case-insensitively after trimming.
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortKey {
    pub column: KeyColumn,
    pub order: SortOrder,
    pub collation: Collation,
}

impl SortKey {
    pub fn column(index: usize, order: SortOrder) -> Self {
        SortKey { column: KeyColumn::Index(index), order, collation: Collation::default() }
    }
}

/// A key whose column has been resolved to a 0-based field index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolvedKey {
    pub index: usize,
    pub order: SortOrder,
    pub collation: Collation,
}

/// Precomputed comparison value of one key field.
#[derive(Clone, Debug, PartialEq)]
pub enum KeyPart {
    Number(f64),
    Text(String),
}

impl KeyPart {
    pub fn new(field: &str, collation: Collation) -> KeyPart {
        if collation == Collation::NumericAware {
            if let Some(n) = parse_number(field) {
                return KeyPart::Number(n);
            }
        }
        KeyPart::Text(field.chars().flat_map(char::to_uppercase).collect())
    }

    fn cmp(&self, other: &KeyPart) -> Ordering {
        match (self, other) {
            (KeyPart::Number(a), KeyPart::Number(b)) => a.total_cmp(b),
            (KeyPart::Number(_), KeyPart::Text(_)) => Ordering::Less,
            (KeyPart::Text(_), KeyPart::Number(_)) => Ordering::Greater,
            (KeyPart::Text(a), KeyPart::Text(b)) => a.cmp(b),
        }
    }
}

/// Compare two fields under one collation.
pub fn compare_fields(a: &str, b: &str, collation: Collation) -> Ordering {
    match collation {
        Collation::Text => compare_text(a, b),
        Collation::NumericAware => KeyPart::new(a, collation).cmp(&KeyPart::new(b, collation)),
    }
}

/// Key values for one record. Missing fields compare as empty text.
pub fn extract_key<S: AsRef<str>>(fields: &[S], keys: &[ResolvedKey]) -> Vec<KeyPart> {
    keys.iter()
        .map(|k| KeyPart::new(fields.get(k.index).map_or("", AsRef::as_ref), k.collation))
        .collect()
}

/// Compare two precomputed keys field by field, honouring each key's order.
pub fn compare_keys(a: &[KeyPart], b: &[KeyPart], keys: &[ResolvedKey]) -> Ordering {
    for ((x, y), k) in a.iter().zip(b).zip(keys) {
        let o = x.cmp(y);
        let o = match k.order {
            SortOrder::Asc => o,
            SortOrder::Desc => o.reverse(),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

pub fn compare_records<S: AsRef<str>>(a: &[S], b: &[S], keys: &[ResolvedKey]) -> Ordering {
    compare_keys(&extract_key(a, keys), &extract_key(b, keys), keys)
}

/// Stable sort of `records` by `keys`.
pub fn sort_records<S: AsRef<str>>(records: &mut Vec<Vec<S>>, keys: &[ResolvedKey]) {
    let mut keyed: Vec<(Vec<KeyPart>, Vec<S>)> =
        records.drain(..).map(|r| (extract_key(&r, keys), r)).collect();
    keyed.sort_by(|a, b| compare_keys(&a.0, &b.0, keys));
    records.extend(keyed.into_iter().map(|(_, r)| r));
}
