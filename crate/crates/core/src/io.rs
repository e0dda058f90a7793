//! File plumbing shared by the stages: gzip sniffing, bounded line reads,
//! field sanitization, and atomic (temp-file + rename) output.

use std::borrow::Cow;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Opens `path` for buffered reading, transparently decompressing gzip input
/// (detected by magic bytes, not by extension).
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(&GZIP_MAGIC) {
        Ok(Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(reader),
        )))
    } else {
        Ok(Box::new(reader))
    }
}

/// One line pulled from a [`BoundedLines`] reader.
#[derive(Debug, PartialEq, Eq)]
pub enum BoundedLine {
    /// Line content without the trailing `\n` (and `\r`).
    Line(Vec<u8>),
    /// The line exceeded the byte limit; its content was discarded unread.
    Oversize { len: usize },
}

/// Line iterator that never buffers more than `max_bytes` of a single line,
/// so pathological multi-gigabyte lines cost time but not memory.
pub struct BoundedLines<R> {
    reader: R,
    max_bytes: usize,
    done: bool,
}

impl<R: BufRead> BoundedLines<R> {
    pub fn new(reader: R, max_bytes: usize) -> Self {
        BoundedLines {
            reader,
            max_bytes,
            done: false,
        }
    }

    fn next_line(&mut self) -> io::Result<Option<BoundedLine>> {
        if self.done {
            return Ok(None);
        }
        let mut buf = Vec::new();
        let mut len = 0usize;
        let mut saw_any = false;
        loop {
            let chunk = self.reader.fill_buf()?;
            if chunk.is_empty() {
                self.done = true;
                if !saw_any {
                    return Ok(None);
                }
                break;
            }
            saw_any = true;
            let (take, found_newline) = match chunk.iter().position(|&b| b == b'\n') {
                Some(i) => (i, true),
                None => (chunk.len(), false),
            };
            if len + take <= self.max_bytes + 1 {
                // One spare byte so a trailing '\r' can be trimmed before the
                // limit is applied.
                buf.extend_from_slice(&chunk[..take]);
            }
            len += take;
            let consumed = if found_newline { take + 1 } else { take };
            self.reader.consume(consumed);
            if found_newline {
                break;
            }
        }
        if buf.len() == len && buf.last() == Some(&b'\r') {
            buf.pop();
            len -= 1;
        }
        if len > self.max_bytes {
            Ok(Some(BoundedLine::Oversize { len }))
        } else {
            Ok(Some(BoundedLine::Line(buf)))
        }
    }
}

impl<R: BufRead> Iterator for BoundedLines<R> {
    type Item = io::Result<BoundedLine>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_line().transpose()
    }
}

/// Reads every line of a (possibly gzipped) text file as lossy UTF-8.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut reader = open_text(path)?;
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect())
}

/// Replaces every `;`, `\n` and `\r` with a single space so the value fits in
/// one `;`-separated field.
pub fn sanitize_field(value: &str) -> Cow<'_, str> {
    if value.contains([';', '\n', '\r']) {
        Cow::Owned(
            value
                .chars()
                .map(|c| {
                    if matches!(c, ';' | '\n' | '\r') {
                        ' '
                    } else {
                        c
                    }
                })
                .collect(),
        )
    } else {
        Cow::Borrowed(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    Plain,
    Gzip,
}

impl Compression {
    /// Gzip when the file name ends in `.gz`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension() {
            Some(ext) if ext == "gz" => Compression::Gzip,
            _ => Compression::Plain,
        }
    }
}

enum Sink {
    Plain(BufWriter<NamedTempFile>),
    Gzip(GzEncoder<BufWriter<NamedTempFile>>),
}

/// Output file written to a sibling temp file and renamed into place on
/// [`AtomicFile::commit`]. Dropping without committing leaves the target
/// untouched.
pub struct AtomicFile {
    path: PathBuf,
    sink: Sink,
}

impl AtomicFile {
    pub fn create(path: &Path, compression: Compression) -> Result<Self> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
        let buffered = BufWriter::with_capacity(1 << 16, tmp);
        let sink = match compression {
            Compression::Plain => Sink::Plain(buffered),
            Compression::Gzip => {
                Sink::Gzip(GzEncoder::new(buffered, flate2::Compression::default()))
            }
        };
        Ok(AtomicFile {
            path: path.to_path_buf(),
            sink,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn commit(self) -> Result<()> {
        let path = self.path;
        let buffered = match self.sink {
            Sink::Plain(w) => w,
            Sink::Gzip(enc) => enc.finish().map_err(|e| Error::io(&path, e))?,
        };
        let tmp = buffered
            .into_inner()
            .map_err(|e| Error::io(&path, e.into_error()))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

impl Write for AtomicFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match &mut self.sink {
            Sink::Plain(w) => w.write(buf),
            Sink::Gzip(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match &mut self.sink {
            Sink::Plain(w) => w.flush(),
            Sink::Gzip(w) => w.flush(),
        }
    }
}

/// Writes `lines` (each followed by `\n`) to `path` atomically.
pub fn write_lines<I, S>(path: &Path, compression: Compression, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = AtomicFile::create(path, compression)?;
    for line in lines {
        out.write_all(line.as_ref().as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    out.commit()
}
