//! Within-block pair classification and closure into alias groups, plus the
//! alias-map writers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use sha1::{Digest, Sha1};

use crate::blocking::{Block, SanitizedIndex};
use crate::classifier::ForestModel;
use crate::corpus::ParsedAuthor;
use crate::error::{Error, Result};
use crate::io::{read_lines, sanitize_field, AtomicFile, Compression};
use crate::similarity::pair_features;
use crate::union_find::UnionFind;

pub const DEFAULT_MAX_BLOCK_SIZE: usize = 1024;

/// Author IDs resolved to one developer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AliasGroup {
    /// Smallest member; names the group in output files.
    pub leader: String,
    /// Sorted, distinct, at least two.
    pub members: Vec<String>,
}

impl AliasGroup {
    /// Builds a group from any member order. Returns `None` for fewer than two
    /// distinct members.
    pub fn new(mut members: Vec<String>) -> Option<Self> {
        members.sort();
        members.dedup();
        if members.len() < 2 {
            return None;
        }
        Some(AliasGroup {
            leader: members[0].clone(),
            members,
        })
    }
}

/// Outcome of resolving one block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockResolution {
    pub groups: Vec<AliasGroup>,
    /// Classifier invocations, `C(|block|, 2)`.
    pub pairs_scored: u64,
}

/// Scores every pair in `block`, links pairs with probability `>= threshold`,
/// and returns the connected components of size two or more.
pub fn resolve_block(
    block: &Block,
    records: &[ParsedAuthor],
    model: &ForestModel,
    threshold: f64,
) -> BlockResolution {
    let members = &block.members;
    let n = members.len();
    let mut uf = UnionFind::new(n);
    let mut pairs_scored = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let f = pair_features(&records[members[i]], &records[members[j]]);
            pairs_scored += 1;
            if model.predict_prob(&f) >= threshold {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<AliasGroup> = uf
        .components()
        .into_iter()
        .filter_map(|comp| {
            AliasGroup::new(
                comp.into_iter()
                    .map(|k| records[members[k]].id.clone())
                    .collect(),
            )
        })
        .collect();
    groups.sort();
    BlockResolution {
        groups,
        pairs_scored,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    /// Sorted by leader.
    pub groups: Vec<AliasGroup>,
    /// `(block_id, size)` of blocks over the size limit, in block-id order.
    pub skipped_blocks: Vec<(usize, usize)>,
    pub blocks_processed: usize,
    pub pairs_scored: u64,
}

/// Resolves every block of two or more members on a pool of `workers`
/// threads. Blocks larger than `max_block_size` are skipped and reported.
/// The result does not depend on `workers`.
pub fn resolve_all(
    blocks: &[Block],
    records: &[ParsedAuthor],
    model: &ForestModel,
    threshold: f64,
    workers: usize,
    max_block_size: usize,
) -> Result<Resolution> {
    let mut skipped_blocks: Vec<(usize, usize)> = blocks
        .iter()
        .filter(|b| b.len() > max_block_size)
        .map(|b| (b.block_id, b.len()))
        .collect();
    skipped_blocks.sort_unstable();
    let work: Vec<&Block> = blocks
        .iter()
        .filter(|b| b.len() >= 2 && b.len() <= max_block_size)
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let per_block: Vec<BlockResolution> = pool.install(|| {
        work.par_iter()
            .map(|b| resolve_block(b, records, model, threshold))
            .collect()
    });

    let pairs_scored = per_block.iter().map(|r| r.pairs_scored).sum();
    let mut groups: Vec<AliasGroup> = per_block.into_iter().flat_map(|r| r.groups).collect();
    groups.sort();
    Ok(Resolution {
        groups,
        skipped_blocks,
        blocks_processed: work.len(),
        pairs_scored,
    })
}

fn alias_lines<'a>(
    groups: &'a [AliasGroup],
    render: impl Fn(&'a str) -> String + 'a,
) -> impl Iterator<Item = String> + 'a {
    let mut ordered: Vec<&AliasGroup> = groups.iter().collect();
    ordered.sort_by(|a, b| a.leader.cmp(&b.leader));
    ordered.into_iter().flat_map(move |g| {
        let leader = render(&g.leader);
        std::iter::once(format!("{leader};{leader}")).chain(
            g.members
                .iter()
                .filter(move |m| **m != g.leader)
                .map(|m| format!("{};{}", leader, render(m)))
                .collect::<Vec<_>>(),
        )
    })
}

/// Writes `leader;leader` then `leader;member` per group, groups in leader
/// order. Gzipped when `path` ends in `.gz`.
pub fn write_alias_map(groups: &[AliasGroup], path: &Path) -> Result<()> {
    crate::io::write_lines(
        path,
        Compression::from_path(path),
        alias_lines(groups, |id| sanitize_field(id).into_owned()),
    )
}

/// Lowercase hex SHA1 of the exact UTF-8 bytes of `id`.
pub fn sha1_hex(id: &str) -> String {
    let digest = Sha1::digest(id.as_bytes());
    let mut out = String::with_capacity(40);
    for byte in digest {
        use std::fmt::Write as _;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Same layout as [`write_alias_map`] with every ID replaced by its SHA1.
pub fn write_hashed_alias_map(groups: &[AliasGroup], path: &Path) -> Result<()> {
    crate::io::write_lines(
        path,
        Compression::from_path(path),
        alias_lines(groups, sha1_hex),
    )
}

/// Reads an alias map back into groups. With `records`, sanitized IDs are
/// mapped back to the exact corpus strings.
pub fn read_alias_map(path: &Path, records: Option<&[ParsedAuthor]>) -> Result<Vec<AliasGroup>> {
    let mut index = records.map(SanitizedIndex::new);
    let mut by_leader: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut exact: BTreeMap<String, String> = BTreeMap::new();
    for (n, line) in read_lines(path)?.into_iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((leader, member)) = line.split_once(';') else {
            return Err(Error::parse(path, n + 1, "expected `leader;member`"));
        };
        let member = match index.as_mut() {
            Some(idx) => {
                let rec = idx.claim(member).ok_or_else(|| {
                    Error::parse(path, n + 1, format!("author ID not in corpus: {member}"))
                })?;
                records.expect("index implies records")[rec].id.clone()
            }
            None => member.to_string(),
        };
        if leader == sanitize_field(&member) {
            exact.insert(leader.to_string(), member.clone());
        }
        by_leader
            .entry(leader.to_string())
            .or_default()
            .push(member);
    }
    let mut groups = Vec::with_capacity(by_leader.len());
    for (leader, members) in by_leader {
        if !exact.contains_key(&leader) {
            return Err(Error::parse(
                path,
                0,
                format!("group `{leader}` has no `leader;leader` line"),
            ));
        }
        if let Some(g) = AliasGroup::new(members) {
            groups.push(g);
        }
    }
    groups.sort();
    Ok(groups)
}

/// `block_id;size` for every skipped block.
pub fn write_skipped_blocks(skipped: &[(usize, usize)], path: &Path) -> Result<()> {
    let mut out = AtomicFile::create(path, Compression::Plain)?;
    for (id, size) in skipped {
        writeln!(out, "{id};{size}").map_err(|e| Error::io(path, e))?;
    }
    out.commit()
}
