//! Sorting delimited files. Files that fit the row budget are sorted in
//! memory; larger ones are cut into sorted runs on disk and merged. Both
//! paths are stable and write identical bytes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Take, Write};
use std::path::{Path, PathBuf};

use handsoff_core::collate::{compare_keys, extract_key, KeyPart, ResolvedKey};
use handsoff_core::control::HeaderMap;
use handsoff_core::record::{split_fields, CsvMode};
use serde::Serialize;
use tempfile::TempDir;

use crate::config::SortJob;
use crate::csvio::{read_error, AtomicWriter, RecordReader};
use crate::error::{Error, Result};

/// Runs merged at once; more runs are merged in passes.
const FAN_IN: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingKey {
    /// A record too short for a key column is an error.
    #[default]
    Fail,
    /// A missing key field sorts as empty text.
    Empty,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SortOptions {
    pub csv_mode: CsvMode,
    pub missing_key: MissingKey,
    pub max_rows: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SortStats {
    pub rows: usize,
    /// Sorted runs written to scratch files; 0 for an in-memory sort.
    pub runs: usize,
}

struct Row {
    key: Vec<KeyPart>,
    text: String,
}

fn resolve_keys(job: &SortJob, header: Option<&HeaderMap>) -> Result<Vec<ResolvedKey>> {
    let empty = HeaderMap::default();
    let map = header.unwrap_or(&empty);
    job.spec
        .keys
        .iter()
        .map(|k| {
            let index = map.resolve(&k.column).map_err(|e| Error::Validation(format!("{}: {e}", job.input.display())))?;
            Ok(ResolvedKey { index, order: k.order, collation: k.collation })
        })
        .collect()
}

/// A scratch file holding many sorted runs back to back.
struct Spill {
    path: PathBuf,
    writer: BufWriter<File>,
    written: u64,
    runs: Vec<Run>,
}

/// A byte range of a spill file.
#[derive(Clone, Debug)]
struct Run {
    path: PathBuf,
    offset: u64,
    len: u64,
}

impl Spill {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Spill { path, writer: BufWriter::new(file), written: 0, runs: Vec::new() })
    }

    fn entry(&mut self, text: &str) -> Result<()> {
        let w = &mut self.writer;
        w.write_all(&(text.len() as u64).to_le_bytes())
            .and_then(|()| w.write_all(text.as_bytes()))
            .map_err(|e| Error::io(&self.path, e))?;
        self.written += 8 + text.len() as u64;
        Ok(())
    }

    /// Close the run started at `offset`.
    fn end_run(&mut self, offset: u64) {
        self.runs.push(Run { path: self.path.clone(), offset, len: self.written - offset });
    }

    fn finish(mut self) -> Result<Vec<Run>> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.runs)
    }
}

fn spill_run(spill: &mut Spill, rows: &[Row]) -> Result<()> {
    let offset = spill.written;
    for r in rows {
        spill.entry(&r.text)?;
    }
    spill.end_run(offset);
    Ok(())
}

struct RunReader {
    path: PathBuf,
    inner: BufReader<Take<File>>,
}

impl RunReader {
    fn open(run: &Run) -> Result<Self> {
        let mut file = File::open(&run.path).map_err(|e| Error::io(&run.path, e))?;
        file.seek(SeekFrom::Start(run.offset)).map_err(|e| Error::io(&run.path, e))?;
        Ok(RunReader { path: run.path.clone(), inner: BufReader::new(file.take(run.len)) })
    }

    fn next_text(&mut self) -> Result<Option<String>> {
        let mut len = [0u8; 8];
        match self.inner.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(Error::io(&self.path, e)),
        }
        let mut buf = vec![0u8; u64::from_le_bytes(len) as usize];
        self.inner.read_exact(&mut buf).map_err(|e| Error::io(&self.path, e))?;
        String::from_utf8(buf).map(Some).map_err(|e| Error::io(&self.path, io::Error::new(io::ErrorKind::InvalidData, e)))
    }
}

struct Head<'k> {
    key: Vec<KeyPart>,
    text: String,
    run: usize,
    keys: &'k [ResolvedKey],
}

impl Ord for Head<'_> {
    // Reversed: BinaryHeap is a max-heap and the smallest key, then the
    // earliest run, must come out first.
    fn cmp(&self, other: &Self) -> Ordering {
        compare_keys(&other.key, &self.key, self.keys).then(other.run.cmp(&self.run))
    }
}

impl PartialOrd for Head<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Head<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head<'_> {}

fn key_of(text: &str, keys: &[ResolvedKey], mode: CsvMode) -> Vec<KeyPart> {
    let fields = split_fields(text, mode).unwrap_or_default();
    extract_key(&fields, keys)
}

/// Merge consecutive runs, passing each record's text to `emit` in order.
fn merge(runs: &[Run], keys: &[ResolvedKey], mode: CsvMode, mut emit: impl FnMut(&str) -> Result<()>) -> Result<()> {
    let mut readers = runs.iter().map(RunReader::open).collect::<Result<Vec<_>>>()?;
    let mut heap = BinaryHeap::with_capacity(readers.len());
    for (run, r) in readers.iter_mut().enumerate() {
        if let Some(text) = r.next_text()? {
            heap.push(Head { key: key_of(&text, keys, mode), text, run, keys });
        }
    }
    while let Some(head) = heap.pop() {
        emit(&head.text)?;
        if let Some(text) = readers[head.run].next_text()? {
            heap.push(Head { key: key_of(&text, keys, mode), text, run: head.run, keys });
        }
    }
    Ok(())
}

/// Sort `job.input` into `job.output`. A heading line stays first.
pub fn sort_file(job: &SortJob, opts: &SortOptions) -> Result<SortStats> {
    let mode = opts.csv_mode;
    let budget = job.spec.memory_budget_rows.max(1);
    let mut reader = RecordReader::open(&job.input, mode)?;
    let header = if job.spec.has_headings { reader.read_record().map_err(|e| read_error(&job.input, e))? } else { None };
    let keys = resolve_keys(job, header.as_ref().map(|h| HeaderMap::new(&h.fields)).as_ref())?;
    let needed = keys.iter().map(|k| k.index + 1).max().unwrap_or(0);

    let mut stats = SortStats::default();
    let mut scratch: Option<(TempDir, Spill)> = None;
    let mut rows: Vec<Row> = Vec::new();
    while let Some(rec) = reader.read_record().map_err(|e| read_error(&job.input, e))? {
        stats.rows += 1;
        if opts.max_rows.is_some_and(|m| stats.rows > m) {
            return Err(Error::Validation(format!("{}: more than {} data records", job.input.display(), opts.max_rows.unwrap())));
        }
        if rec.fields.len() < needed && opts.missing_key == MissingKey::Fail {
            return Err(Error::data(
                &job.input,
                stats.rows,
                format!("line {}: missing sort column {} (record has {} fields)", rec.line, needed, rec.fields.len()),
            ));
        }
        rows.push(Row { key: extract_key(&rec.fields, &keys), text: rec.text });
        if rows.len() == budget {
            let (_, spill) = match &mut scratch {
                Some(s) => s,
                None => {
                    let d = match &job.scratch_dir {
                        Some(p) => tempfile::Builder::new().prefix("handsoff-sort").tempdir_in(p),
                        None => tempfile::Builder::new().prefix("handsoff-sort").tempdir(),
                    };
                    let d = d.map_err(|e| Error::io(job.scratch_dir.as_deref().unwrap_or(Path::new("scratch")), e))?;
                    let spill = Spill::create(d.path().join("runs0"))?;
                    scratch.insert((d, spill))
                }
            };
            rows.sort_by(|a, b| compare_keys(&a.key, &b.key, &keys));
            spill_run(spill, &rows)?;
            rows.clear();
        }
    }
    rows.sort_by(|a, b| compare_keys(&a.key, &b.key, &keys));

    let mut out = AtomicWriter::create(&job.output)?;
    if let Some(h) = &header {
        out.write_line(&h.text)?;
    }
    match scratch {
        None => {
            for r in &rows {
                out.write_line(&r.text)?;
            }
        }
        Some((dir, mut spill)) => {
            if !rows.is_empty() {
                spill_run(&mut spill, &rows)?;
            }
            drop(rows);
            let mut runs = spill.finish()?;
            stats.runs = runs.len();
            let mut generation = 0;
            while runs.len() > FAN_IN {
                generation += 1;
                let mut next = Spill::create(dir.path().join(format!("runs{generation}")))?;
                for group in runs.chunks(FAN_IN) {
                    let offset = next.written;
                    merge(group, &keys, mode, |t| next.entry(t))?;
                    next.end_run(offset);
                }
                let _ = std::fs::remove_file(&runs[0].path);
                runs = next.finish()?;
            }
            merge(&runs, &keys, mode, |t| out.write_line(t))?;
        }
    }
    out.finish()?;
    Ok(stats)
}
