//! Streaming reads and atomic writes of delimited files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use handsoff_core::record::{is_incomplete, split_fields, CsvError, CsvMode, Record};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// One record as read: its fields plus the exact source text, which sort
/// and pass-through headers reproduce byte for byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    /// 1-based line where the record starts.
    pub line: usize,
    pub text: String,
    pub fields: Record,
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Csv { line: usize, source: CsvError },
}

/// Reads records from LF or CRLF text, dropping a leading byte order mark
/// and skipping empty lines. In RFC 4180 mode a quoted field may span lines.
pub struct RecordReader<R> {
    inner: R,
    mode: CsvMode,
    line: usize,
    buf: String,
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path, mode: CsvMode) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(RecordReader::new(BufReader::with_capacity(1 << 16, file), mode))
    }
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R, mode: CsvMode) -> Self {
        RecordReader { inner, mode, line: 0, buf: String::new() }
    }

    fn read_line(&mut self) -> io::Result<bool> {
        self.buf.clear();
        if self.inner.read_line(&mut self.buf)? == 0 {
            return Ok(false);
        }
        self.line += 1;
        if self.buf.ends_with('\n') {
            self.buf.pop();
            if self.buf.ends_with('\r') {
                self.buf.pop();
            }
        }
        if self.line == 1 && self.buf.starts_with('\u{feff}') {
            self.buf.drain(..3);
        }
        Ok(true)
    }

    pub fn read_record(&mut self) -> Result<Option<RawRecord>, ReadError> {
        loop {
            if !self.read_line()? {
                return Ok(None);
            }
            if !self.buf.is_empty() {
                break;
            }
        }
        let start = self.line;
        let mut text = std::mem::take(&mut self.buf);
        while self.mode == CsvMode::Rfc4180 && is_incomplete(&text, self.mode) {
            if !self.read_line()? {
                break;
            }
            text.push('\n');
            text.push_str(&self.buf);
        }
        let fields = split_fields(&text, self.mode).map_err(|source| ReadError::Csv { line: start, source })?;
        Ok(Some(RawRecord { line: start, text, fields }))
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<RawRecord, ReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

/// Writes LF-terminated lines to a temporary file beside the target and
/// renames it into place on `finish`. Dropping without finishing leaves the
/// target untouched.
pub struct AtomicWriter {
    path: PathBuf,
    out: BufWriter<NamedTempFile>,
}

impl AtomicWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
        Ok(AtomicWriter { path: path.to_path_buf(), out: BufWriter::with_capacity(1 << 16, tmp) })
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write_str(&mut self, text: &str) -> Result<()> {
        self.out.write_all(text.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(self) -> Result<()> {
        let path = self.path;
        let tmp = self.out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

/// Map a read failure on `path` to the crate error.
pub fn read_error(path: &Path, e: ReadError) -> Error {
    match e {
        ReadError::Io(e) => Error::io(path, e),
        ReadError::Csv { line, source } => Error::data(path, line, source),
    }
}
