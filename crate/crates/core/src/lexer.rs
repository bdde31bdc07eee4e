//! Tokenizer for formula bodies (the text after the leading `=`).

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::address::split_a1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Number,
    String,
    Boolean,
    /// `A1`, `$A$1` or `Sheet!A1`.
    CellRef,
    Name,
    Operator,
    Punctuation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source text of the token.
    pub lexeme: String,
    /// Character index of the first character.
    pub offset: usize,
}

impl Token {
    /// Value of a string literal with the surrounding quotes removed and `""`
    /// collapsed to `"`. Other tokens return their lexeme.
    pub fn text_value(&self) -> String {
        if self.kind != TokenKind::String {
            return self.lexeme.clone();
        }
        let inner = &self.lexeme[1..self.lexeme.len() - 1];
        inner.replace("\"\"", "\"")
    }

    pub fn len_chars(&self) -> usize {
        self.lexeme.chars().count()
    }

    pub(crate) fn is_op(&self, op: &str) -> bool {
        matches!(self.kind, TokenKind::Operator | TokenKind::Punctuation) && self.lexeme == op
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string starting at offset {offset}")]
    UnterminatedString { offset: usize },
    #[error("unexpected character `{found}` at offset {offset}")]
    IllegalCharacter { offset: usize, found: char },
}

impl LexError {
    pub fn offset(&self) -> usize {
        match self {
            LexError::UnterminatedString { offset } | LexError::IllegalCharacter { offset, .. } => *offset,
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

/// Whether `text` is a valid defined name: initial letter or underscore, then
/// letters, digits, underscores or dots, and not readable as a cell reference
/// or boolean.
pub fn is_valid_name(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if is_name_start(c) => {}
        _ => return false,
    }
    if !chars.all(|c| is_name_char(c) && c != '$') {
        return false;
    }
    split_a1(text).is_none() && !text.eq_ignore_ascii_case("TRUE") && !text.eq_ignore_ascii_case("FALSE")
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let slice = |a: usize, b: usize| -> String { chars[a..b].iter().collect() };

    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
                continue;
            }
            '"' => {
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(LexError::UnterminatedString { offset: start }),
                        Some('"') if chars.get(i + 1) == Some(&'"') => i += 2,
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(Token { kind: TokenKind::String, lexeme: slice(start, i), offset: start });
            }
            '0'..='9' | '.' if c != '.' || chars.get(i + 1).is_some_and(char::is_ascii_digit) => {
                i = scan_number(&chars, i);
                tokens.push(Token { kind: TokenKind::Number, lexeme: slice(start, i), offset: start });
            }
            '<' | '>' => {
                i += 1;
                if matches!(chars.get(i), Some('=')) || (c == '<' && chars.get(i) == Some(&'>')) {
                    i += 1;
                }
                tokens.push(Token { kind: TokenKind::Operator, lexeme: slice(start, i), offset: start });
            }
            '+' | '-' | '*' | '/' | '^' | '&' | '=' => {
                i += 1;
                tokens.push(Token { kind: TokenKind::Operator, lexeme: slice(start, i), offset: start });
            }
            '(' | ')' | ',' | ':' => {
                i += 1;
                tokens.push(Token { kind: TokenKind::Punctuation, lexeme: slice(start, i), offset: start });
            }
            c if is_name_start(c) || c == '$' => {
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let word = slice(start, i);
                if chars.get(i) == Some(&'!') {
                    // sheet-qualified cell reference
                    if word.contains('$') || !is_name_start(chars[start]) {
                        return Err(illegal(&chars, start + word.find('$').unwrap_or(0)));
                    }
                    let cell_start = i + 1;
                    let mut j = cell_start;
                    while j < chars.len() && is_name_char(chars[j]) {
                        j += 1;
                    }
                    let cell = slice(cell_start, j);
                    if split_a1(&cell).is_none() {
                        return Err(illegal(&chars, i));
                    }
                    i = j;
                    tokens.push(Token { kind: TokenKind::CellRef, lexeme: slice(start, i), offset: start });
                } else if split_a1(&word).is_some() {
                    tokens.push(Token { kind: TokenKind::CellRef, lexeme: word, offset: start });
                } else if let Some(dollar) = word.find('$') {
                    return Err(illegal(&chars, start + dollar));
                } else if word.eq_ignore_ascii_case("TRUE") || word.eq_ignore_ascii_case("FALSE") {
                    tokens.push(Token { kind: TokenKind::Boolean, lexeme: word, offset: start });
                } else {
                    tokens.push(Token { kind: TokenKind::Name, lexeme: word, offset: start });
                }
            }
            _ => return Err(illegal(&chars, i)),
        }
    }
    Ok(tokens)
}

fn illegal(chars: &[char], offset: usize) -> LexError {
    LexError::IllegalCharacter { offset, found: chars.get(offset).copied().unwrap_or('\0') }
}

fn scan_number(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && chars[i].is_ascii_digit() {
        i += 1;
    }
    if chars.get(i) == Some(&'.') {
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
    }
    if matches!(chars.get(i), Some('e' | 'E')) {
        let mut j = i + 1;
        if matches!(chars.get(j), Some('+' | '-')) {
            j += 1;
        }
        if chars.get(j).is_some_and(char::is_ascii_digit) {
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.lexeme)).collect()
    }

    #[test]
    fn function_call_tokens() {
        use TokenKind::*;
        assert_eq!(
            kinds("ARABIC(D2)"),
            vec![
                (Name, "ARABIC".into()),
                (Punctuation, "(".into()),
                (CellRef, "D2".into()),
                (Punctuation, ")".into())
            ]
        );
    }

    #[test]
    fn doubled_quote_escape() {
        let toks = tokenize(r#""a""b""#).unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].kind, TokenKind::String);
        assert_eq!(toks[0].text_value(), "a\"b");
    }

    #[test]
    fn bare_comma_is_punctuation() {
        use TokenKind::*;
        assert_eq!(
            kinds("1,2"),
            vec![(Number, "1".into()), (Punctuation, ",".into()), (Number, "2".into())]
        );
    }

    #[test]
    fn names_cells_and_booleans() {
        use TokenKind::*;
        assert_eq!(kinds("Duplicate")[0].0, Name);
        assert_eq!(kinds("Data.x_1")[0].0, Name);
        assert_eq!(kinds("ITEM1")[0].0, Name); // four letters is past XFD
        assert_eq!(kinds("abc1")[0].0, CellRef);
        assert_eq!(kinds("$A$1")[0].0, CellRef);
        assert_eq!(kinds("Main!A2")[0], (CellRef, "Main!A2".into()));
        assert_eq!(kinds("true")[0].0, Boolean);
        assert_eq!(kinds("<>")[0], (Operator, "<>".into()));
        assert_eq!(kinds("<=")[0], (Operator, "<=".into()));
        assert_eq!(kinds("1.5e3")[0], (Number, "1.5e3".into()));
        assert_eq!(kinds(".5")[0], (Number, ".5".into()));
    }

    #[test]
    fn lex_errors_carry_offsets() {
        assert_eq!(tokenize("1 + \"abc"), Err(LexError::UnterminatedString { offset: 4 }));
        assert_eq!(tokenize("1 # 2"), Err(LexError::IllegalCharacter { offset: 2, found: '#' }));
        assert_eq!(tokenize("$Foo"), Err(LexError::IllegalCharacter { offset: 0, found: '$' }));
        assert_eq!(tokenize("Main!Foo"), Err(LexError::IllegalCharacter { offset: 4, found: '!' }));
        // offsets count characters, not bytes
        assert_eq!(tokenize("\"é\" ~"), Err(LexError::IllegalCharacter { offset: 4, found: '~' }));
    }

    #[test]
    fn valid_names() {
        assert!(is_valid_name("InputCells"));
        assert!(is_valid_name("_x.y"));
        assert!(!is_valid_name("A1"));
        assert!(!is_valid_name("1A"));
        assert!(!is_valid_name("True"));
        assert!(!is_valid_name("in put"));
        assert!(!is_valid_name(""));
    }
}
