//! Author-ID ingestion and parsing.
//!
//! An author ID is the raw commit-author string, normally `First Last <email>`.
//! Real data bends that shape in every direction (missing brackets, names
//! containing `<`, empty fields, absurdly long lines), so parsing is total: any
//! line within the size limit yields a [`ParsedAuthor`].

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{open_text, BoundedLine, BoundedLines};

pub const DEFAULT_MAX_RECORD_BYTES: usize = 10_000;

/// Structured view of one author-ID string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedAuthor {
    /// The original line, unchanged.
    pub id: String,
    pub full_name: String,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    /// Local part of `email`; empty unless the email has exactly one `@` with
    /// nonempty sides.
    pub username: String,
    pub domain: String,
}

/// Parses one author-ID line.
///
/// The email is taken between the last `<` and the last `>` after it, so stray
/// `<` characters inside the name do not confuse the split. Without such a
/// bracket pair the whole line is the name.
pub fn parse_author_id(raw: &str) -> ParsedAuthor {
    let (name_part, email) = match raw.rfind('<') {
        Some(open) => match raw[open + 1..].rfind('>') {
            Some(rel_close) => (&raw[..open], raw[open + 1..open + 1 + rel_close].trim()),
            None => (raw, ""),
        },
        None => (raw, ""),
    };
    let full_name = name_part.trim();
    let mut tokens = full_name.split_whitespace();
    let first_name = tokens.next().unwrap_or("");
    let last_name = tokens.last().unwrap_or("");

    let (username, domain) = split_email(email).unwrap_or(("", ""));

    ParsedAuthor {
        id: raw.to_string(),
        full_name: full_name.to_string(),
        first_name: first_name.to_string(),
        last_name: last_name.to_string(),
        email: email.to_string(),
        username: username.to_string(),
        domain: domain.to_string(),
    }
}

/// `Some((local, domain))` iff `email` has exactly one `@` with both sides
/// nonempty.
pub fn split_email(email: &str) -> Option<(&str, &str)> {
    let (local, domain) = email.split_once('@')?;
    if local.is_empty() || domain.is_empty() || domain.contains('@') {
        return None;
    }
    Some((local, domain))
}

/// Case-folds and strips leading/trailing non-alphanumeric characters.
pub fn normalize_name(name: &str) -> String {
    name.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

pub fn normalize_email(email: &str) -> String {
    email.trim().to_lowercase()
}

/// Result of reading a corpus file.
#[derive(Debug, Default)]
pub struct Corpus {
    pub records: Vec<ParsedAuthor>,
    /// Oversize or empty lines.
    pub skipped: usize,
    /// Exact repeats of an earlier line.
    pub duplicates: usize,
}

/// Reads one author ID per line from a plain or gzipped file.
///
/// Records keep file order. Lines longer than `max_record_bytes` and empty
/// lines are skipped and counted; exact duplicate lines are collapsed.
pub fn ingest_corpus(path: &Path, max_record_bytes: usize) -> Result<Corpus> {
    let reader = open_text(path)?;
    let mut corpus = Corpus::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in BoundedLines::new(reader, max_record_bytes).enumerate() {
        match line.map_err(|e| Error::io(path, e))? {
            BoundedLine::Oversize { len } => {
                log::debug!("{}:{}: skipping {len}-byte record", path.display(), idx + 1);
                corpus.skipped += 1;
            }
            BoundedLine::Line(bytes) if bytes.is_empty() => corpus.skipped += 1,
            BoundedLine::Line(bytes) => {
                let raw = String::from_utf8_lossy(&bytes).into_owned();
                if seen.contains(&raw) {
                    corpus.duplicates += 1;
                    continue;
                }
                corpus.records.push(parse_author_id(&raw));
                seen.insert(raw);
            }
        }
    }
    Ok(corpus)
}

/// Name and email frequencies over a record set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTables {
    pub first_name_count: HashMap<String, u64>,
    pub last_name_count: HashMap<String, u64>,
    /// Distinct author IDs per normalized email.
    pub email_count: HashMap<String, u64>,
}

impl FrequencyTables {
    pub fn first_name_freq(&self, first_name: &str) -> u64 {
        lookup(&self.first_name_count, &normalize_name(first_name))
    }

    pub fn last_name_freq(&self, last_name: &str) -> u64 {
        lookup(&self.last_name_count, &normalize_name(last_name))
    }

    pub fn email_freq(&self, email: &str) -> u64 {
        lookup(&self.email_count, &normalize_email(email))
    }

    /// Adds another table's counts into this one (shard merge).
    pub fn merge(&mut self, other: &FrequencyTables) {
        for (dst, src) in [
            (&mut self.first_name_count, &other.first_name_count),
            (&mut self.last_name_count, &other.last_name_count),
            (&mut self.email_count, &other.email_count),
        ] {
            for (k, v) in src {
                *dst.entry(k.clone()).or_insert(0) += v;
            }
        }
    }
}

fn lookup(map: &HashMap<String, u64>, key: &str) -> u64 {
    if key.is_empty() {
        0
    } else {
        map.get(key).copied().unwrap_or(0)
    }
}

/// Counts normalized first names, last names and emails. Records are assumed
/// distinct (as produced by [`ingest_corpus`]), so the email count is a count
/// of distinct author IDs.
pub fn build_frequency_tables(records: &[ParsedAuthor]) -> FrequencyTables {
    let mut tables = FrequencyTables::default();
    for rec in records {
        let first = normalize_name(&rec.first_name);
        if !first.is_empty() {
            *tables.first_name_count.entry(first).or_insert(0) += 1;
        }
        let last = normalize_name(&rec.last_name);
        if !last.is_empty() {
            *tables.last_name_count.entry(last).or_insert(0) += 1;
        }
        let email = normalize_email(&rec.email);
        if !email.is_empty() {
            *tables.email_count.entry(email).or_insert(0) += 1;
        }
    }
    tables
}
