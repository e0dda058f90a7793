//! Jaro / Jaro-Winkler similarity and the per-pair feature vector.
//!
//! Scores are similarities in `[0, 1]` (1 = identical), never distances.

use crate::corpus::ParsedAuthor;

/// Jaro-Winkler prefix scale.
pub const WINKLER_SCALE: f64 = 0.1;
/// Longest common prefix that earns the Winkler boost.
pub const WINKLER_MAX_PREFIX: usize = 4;

/// Jaro similarity over Unicode code points (case-sensitive).
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_chars(&a, &b)
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);

    let mut b_matched = vec![false; b.len()];
    let mut a_matched = vec![false; a.len()];
    let mut matches = 0usize;
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                b_matched[j] = true;
                a_matched[i] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }

    let mut half_transpositions = 0usize;
    let mut matched_b = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    for (ca, _) in a.iter().zip(&a_matched).filter(|(_, &m)| m) {
        if matched_b.next() != Some(ca) {
            half_transpositions += 1;
        }
    }

    let m = matches as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler similarity of the case-folded inputs:
/// `jaro + prefix * 0.1 * (1 - jaro)` with the common prefix capped at 4.
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.to_lowercase().chars().collect();
    let b: Vec<char> = b.to_lowercase().chars().collect();
    let sim = jaro_chars(&a, &b);
    let prefix = a
        .iter()
        .zip(&b)
        .take(WINKLER_MAX_PREFIX)
        .take_while(|(x, y)| x == y)
        .count();
    sim + prefix as f64 * WINKLER_SCALE * (1.0 - sim)
}

pub const FEATURE_COUNT: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "first",
    "last",
    "full",
    "username",
    "email",
    "first_vs_last",
    "last_vs_first",
];

/// Similarity scores for one pair of author IDs, laid out as
/// [`FEATURE_NAMES`]. The last two compare first name against last name in
/// both directions to catch swapped names.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures(pub [f64; FEATURE_COUNT]);

impl PairFeatures {
    pub fn get(&self, idx: usize) -> f64 {
        self.0[idx]
    }
}

/// Like [`jaro_winkler`], but two blank fields score 0: a shared absence says
/// nothing about identity.
fn field_similarity(a: &str, b: &str) -> f64 {
    if a.is_empty() && b.is_empty() {
        0.0
    } else {
        jaro_winkler(a, b)
    }
}

pub fn pair_features(p: &ParsedAuthor, q: &ParsedAuthor) -> PairFeatures {
    PairFeatures([
        field_similarity(&p.first_name, &q.first_name),
        field_similarity(&p.last_name, &q.last_name),
        field_similarity(&p.full_name, &q.full_name),
        field_similarity(&p.username, &q.username),
        field_similarity(&p.email, &q.email),
        field_similarity(&p.first_name, &q.last_name),
        field_similarity(&p.last_name, &q.first_name),
    ])
}
