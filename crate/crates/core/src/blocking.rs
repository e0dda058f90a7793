//! Blocking: candidate groups from shared emails, uncommon exact names and
//! GitHub handles, closed transitively into disjoint blocks.
//!
//! Pairwise matching only ever runs inside a block, so the block partition
//! bounds both the cost of resolution and the links it can find.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{normalize_email, normalize_name, FrequencyTables, ParsedAuthor};
use crate::error::{Error, Result};
use crate::filters::{
    detect_junk_emails, is_informative_name, is_valid_email, FilterConfig, Filters,
};
use crate::io::{open_text, read_lines, sanitize_field, AtomicFile, Compression};
use crate::union_find::{union_find_closure, UnionFind};

/// Sorted record indices presumed to belong together.
pub type IdGroup = Vec<usize>;

/// Which maps feed the closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapSelection {
    pub email: bool,
    pub name: bool,
    pub handle: bool,
}

impl MapSelection {
    pub const ALL: MapSelection = MapSelection {
        email: true,
        name: true,
        handle: true,
    };
}

impl Default for MapSelection {
    fn default() -> Self {
        MapSelection::ALL
    }
}

impl FromStr for MapSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut sel = MapSelection {
            email: false,
            name: false,
            handle: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "email" => sel.email = true,
                "name" => sel.name = true,
                "handle" => sel.handle = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown map `{other}` (expected email, name, handle)"
                    )))
                }
            }
        }
        if !(sel.email || sel.name || sel.handle) {
            return Err(Error::Config("at least one map must be selected".into()));
        }
        Ok(sel)
    }
}

impl fmt::Display for MapSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.email, "email"),
            (self.name, "name"),
            (self.handle, "handle"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        f.write_str(&names.join(","))
    }
}

fn groups_from_keys<K: Ord>(keyed: BTreeMap<K, Vec<usize>>, max_size: usize) -> Vec<IdGroup> {
    let mut groups: Vec<IdGroup> = keyed
        .into_values()
        .filter(|g| g.len() >= 2 && g.len() <= max_size)
        .collect();
    for g in &mut groups {
        g.sort_unstable();
        g.dedup();
    }
    groups.retain(|g| g.len() >= 2);
    groups.sort();
    groups
}

/// One group per valid, non-junk email shared by at least two records.
pub fn build_email_map(
    records: &[ParsedAuthor],
    junk: &HashSet<String>,
    cfg: &FilterConfig,
) -> Vec<IdGroup> {
    let mut by_email: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        if is_valid_email(&rec.email, junk, cfg) {
            by_email
                .entry(normalize_email(&rec.email))
                .or_default()
                .push(i);
        }
    }
    groups_from_keys(by_email, usize::MAX)
}

/// One group per informative normalized `(first, last)` name shared by at
/// least two and at most `name_group_max` records. Larger groups are common
/// names and are dropped whole.
pub fn build_name_map(records: &[ParsedAuthor], cfg: &FilterConfig) -> Vec<IdGroup> {
    let mut by_name: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        let first = normalize_name(&rec.first_name);
        let last = normalize_name(&rec.last_name);
        if is_informative_name(&first, &last, cfg) {
            by_name.entry((first, last)).or_default().push(i);
        }
    }
    let dropped = by_name
        .values()
        .filter(|g| g.len() > cfg.name_group_max)
        .count();
    if dropped > 0 {
        log::info!(
            "name map: dropped {dropped} groups larger than {}",
            cfg.name_group_max
        );
    }
    groups_from_keys(by_name, cfg.name_group_max)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandleMapEntry {
    pub handle: String,
    pub author_id: String,
}

/// Reads `handle;author_id` lines. The split is at the first `;`, so author
/// IDs may themselves contain `;`. Lines without a separator or with an empty
/// handle are counted and skipped.
pub fn read_handle_file(path: &Path) -> Result<(Vec<HandleMapEntry>, usize)> {
    let mut entries = Vec::new();
    let mut malformed = 0;
    for line in read_lines(path)? {
        if line.is_empty() {
            continue;
        }
        match line.split_once(';') {
            Some((handle, author_id)) if !handle.trim().is_empty() && !author_id.is_empty() => {
                entries.push(HandleMapEntry {
                    handle: handle.trim().to_string(),
                    author_id: author_id.to_string(),
                })
            }
            _ => malformed += 1,
        }
    }
    Ok((entries, malformed))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HandleMap {
    pub groups: Vec<IdGroup>,
    /// Entries whose author ID is not in the corpus.
    pub ignored: usize,
}

/// One group per handle linked to at least two known records.
pub fn build_handle_map(entries: &[HandleMapEntry], records: &[ParsedAuthor]) -> HandleMap {
    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut by_handle: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut ignored = 0;
    for entry in entries {
        match index.get(entry.author_id.as_str()) {
            Some(&i) => by_handle.entry(entry.handle.as_str()).or_default().push(i),
            None => ignored += 1,
        }
    }
    HandleMap {
        groups: groups_from_keys(by_handle, usize::MAX),
        ignored,
    }
}

/// A connected component of the blocking graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub block_id: usize,
    /// Record indices, ascending.
    pub members: Vec<usize>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    /// Number of unordered member pairs.
    pub fn pair_count(&self) -> u64 {
        choose2(self.members.len() as u64)
    }
}

pub fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Turns the closure into blocks. Block ids follow the ascending order of each
/// component's lexicographically smallest author ID, so they do not depend on
/// input order.
pub fn form_blocks(records: &[ParsedAuthor], uf: &mut UnionFind) -> Vec<Block> {
    assert_eq!(
        records.len(),
        uf.len(),
        "union-find size must match record count"
    );
    let mut comps: Vec<(&str, Vec<usize>)> = uf
        .components()
        .into_iter()
        .map(|members| {
            let min_id = members
                .iter()
                .map(|&i| records[i].id.as_str())
                .min()
                .expect("components are nonempty");
            (min_id, members)
        })
        .collect();
    comps.sort_by(|a, b| a.0.cmp(b.0));
    comps
        .into_iter()
        .enumerate()
        .map(|(block_id, (_, members))| Block { block_id, members })
        .collect()
}

/// Everything the block stage produces.
#[derive(Debug, Clone)]
pub struct Blocking {
    pub blocks: Vec<Block>,
    pub junk_emails: usize,
    pub email_groups: usize,
    pub name_groups: usize,
    pub handle_groups: usize,
    pub handles_ignored: usize,
}

/// Runs the selected maps and closes them into blocks.
pub fn build_blocks(
    records: &[ParsedAuthor],
    tables: &FrequencyTables,
    filters: &Filters,
    maps: MapSelection,
    handles: &[HandleMapEntry],
) -> Blocking {
    let junk = detect_junk_emails(tables, filters);
    let mut edges: Vec<IdGroup> = Vec::new();
    let mut email_groups = 0;
    let mut name_groups = 0;
    let mut handle_groups = 0;
    let mut handles_ignored = 0;
    if maps.email {
        let groups = build_email_map(records, &junk, &filters.cfg);
        email_groups = groups.len();
        edges.extend(groups);
    }
    if maps.name {
        let groups = build_name_map(records, &filters.cfg);
        name_groups = groups.len();
        edges.extend(groups);
    }
    if maps.handle {
        let hm = build_handle_map(handles, records);
        handle_groups = hm.groups.len();
        handles_ignored = hm.ignored;
        edges.extend(hm.groups);
    }
    let mut uf = union_find_closure(records.len(), &edges);
    Blocking {
        blocks: form_blocks(records, &mut uf),
        junk_emails: junk.len(),
        email_groups,
        name_groups,
        handle_groups,
        handles_ignored,
    }
}

/// Size summary of a block partition, including the all-pairs reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    pub records: usize,
    pub blocks: usize,
    pub multi_blocks: usize,
    pub ids_in_multi_blocks: usize,
    pub max_block_size: usize,
    pub block_pairs: u64,
    pub all_pairs: u64,
}

impl BlockStats {
    pub fn from_blocks(blocks: &[Block]) -> Self {
        let records: usize = blocks.iter().map(Block::len).sum();
        let multi: Vec<&Block> = blocks.iter().filter(|b| b.len() >= 2).collect();
        BlockStats {
            records,
            blocks: blocks.len(),
            multi_blocks: multi.len(),
            ids_in_multi_blocks: multi.iter().map(|b| b.len()).sum(),
            max_block_size: blocks.iter().map(Block::len).max().unwrap_or(0),
            block_pairs: blocks.iter().map(Block::pair_count).sum(),
            all_pairs: choose2(records as u64),
        }
    }

    /// `all_pairs / block_pairs`; infinite when no block has a pair.
    pub fn reduction_factor(&self) -> f64 {
        if self.block_pairs == 0 {
            f64::INFINITY
        } else {
            self.all_pairs as f64 / self.block_pairs as f64
        }
    }

    pub fn to_key_values(&self) -> Vec<String> {
        vec![
            format!("records={}", self.records),
            format!("blocks={}", self.blocks),
            format!("blocks_size_2_plus={}", self.multi_blocks),
            format!("ids_in_blocks_size_2_plus={}", self.ids_in_multi_blocks),
            format!("max_block_size={}", self.max_block_size),
            format!("block_pairs={}", self.block_pairs),
            format!("all_pairs={}", self.all_pairs),
            format!("reduction_factor={:.3}", self.reduction_factor()),
        ]
    }
}

/// Writes the gzipped blocks file: one
/// `block_id;first_name_freq;last_name_freq;full_name;email;author_id` line
/// per member, sorted by block id then author ID.
pub fn write_blocks_file(
    blocks: &[Block],
    records: &[ParsedAuthor],
    tables: &FrequencyTables,
    path: &Path,
) -> Result<()> {
    let mut out = AtomicFile::create(path, Compression::Gzip)?;
    let mut sorted: Vec<&Block> = blocks.iter().collect();
    sorted.sort_by_key(|b| b.block_id);
    for block in sorted {
        let mut lines: Vec<(String, &ParsedAuthor)> = block
            .members
            .iter()
            .map(|&i| (sanitize_field(&records[i].id).into_owned(), &records[i]))
            .collect();
        lines.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        for (author_id, rec) in lines {
            writeln!(
                out,
                "{};{};{};{};{};{}",
                block.block_id,
                tables.first_name_freq(&rec.first_name),
                tables.last_name_freq(&rec.last_name),
                sanitize_field(&rec.full_name),
                sanitize_field(&rec.email),
                author_id
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    out.commit()
}

/// Maps sanitized author IDs in a blocks or alias file back to record indices.
/// IDs that sanitize identically are handed out in record order.
pub struct SanitizedIndex {
    slots: HashMap<String, Vec<usize>>,
    cursor: HashMap<String, usize>,
}

impl SanitizedIndex {
    pub fn new(records: &[ParsedAuthor]) -> Self {
        let mut slots: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            slots
                .entry(sanitize_field(&r.id).into_owned())
                .or_default()
                .push(i);
        }
        SanitizedIndex {
            slots,
            cursor: HashMap::new(),
        }
    }

    /// Next unclaimed record carrying this sanitized ID.
    pub fn claim(&mut self, sanitized: &str) -> Option<usize> {
        let slots = self.slots.get(sanitized)?;
        let cursor = self.cursor.entry(sanitized.to_string()).or_insert(0);
        let found = slots.get(*cursor).copied();
        *cursor += 1;
        found
    }
}

/// Reads a blocks file back into blocks over `records`.
pub fn read_blocks_file(path: &Path, records: &[ParsedAuthor]) -> Result<Vec<Block>> {
    use std::io::BufRead;
    let reader = open_text(path)?;
    let mut index = SanitizedIndex::new(records);
    let mut by_id: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(6, ';').collect();
        if fields.len() != 6 {
            return Err(Error::parse(path, n + 1, "expected 6 `;`-separated fields"));
        }
        let block_id: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("bad block id `{}`", fields[0])))?;
        let rec = index.claim(fields[5]).ok_or_else(|| {
            Error::parse(
                path,
                n + 1,
                format!("author ID not in corpus: {}", fields[5]),
            )
        })?;
        by_id.entry(block_id).or_default().push(rec);
    }
    Ok(by_id
        .into_iter()
        .map(|(block_id, mut members)| {
            members.sort_unstable();
            Block { block_id, members }
        })
        .collect())
}

/// `block_id;author_id` for every singleton block.
pub fn write_singleton_report(
    blocks: &[Block],
    records: &[ParsedAuthor],
    path: &Path,
) -> Result<()> {
    let lines = blocks.iter().filter(|b| b.is_singleton()).map(|b| {
        format!(
            "{};{}",
            b.block_id,
            sanitize_field(&records[b.members[0]].id)
        )
    });
    crate::io::write_lines(path, Compression::from_path(path), lines)
}
