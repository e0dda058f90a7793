//! Seeded synthetic author-ID corpora with known alias ground truth.
//!
//! Each developer gets a base `First Last <user@domain>` ID and a drawn number
//! of aliases derived from it by the perturbations seen in real commit data:
//! shortened or initial-only first names, swapped name order, typos, alternate
//! email addresses, blank or placeholder fields. A slice of developers share
//! a handful of very common names so the name-group size limit is exercised.
//! Everything is driven by one ChaCha stream, so a seed fixes the output
//! byte for byte.

use std::collections::{HashMap, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::classifier::LabeledPair;
use crate::corpus::{normalize_name, parse_author_id};
use crate::error::{Error, Result};
use crate::evaluation::TruthSet;

const FIRST_NAMES: &str = include_str!("../data/first_names.txt");
const LAST_NAMES: &str = include_str!("../data/last_names.txt");

const DOMAINS: [&str; 20] = [
    "gmail.com",
    "yahoo.com",
    "hotmail.com",
    "outlook.com",
    "protonmail.com",
    "icloud.com",
    "mail.ru",
    "qq.com",
    "163.com",
    "gmx.de",
    "web.de",
    "yandex.ru",
    "live.com",
    "aol.com",
    "fastmail.com",
    "acme-corp.com",
    "initech.io",
    "globex.net",
    "umbrella.dev",
    "hooli.xyz",
];

const COMMON_NAMES: [(&str, &str); 6] = [
    ("John", "Smith"),
    ("David", "Lee"),
    ("Michael", "Johnson"),
    ("Maria", "Garcia"),
    ("Wei", "Zhang"),
    ("Mohammed", "Ali"),
];

/// Placeholder emails that many unrelated developers end up sharing.
const JUNK_EMAILS: [&str; 5] = [
    "root@localhost",
    "user@example.com",
    "none@none",
    "you@example.com",
    "dev@localhost.localdomain",
];

/// Per-alias perturbation probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRates {
    /// Shortened first name.
    pub nickname: f64,
    /// First name reduced to an initial (or last name to an initial).
    pub initials: f64,
    /// Last name written first.
    pub swap_names: f64,
    /// Different email address, same name.
    pub email_variant: f64,
    /// Single-character edit in a name.
    pub typo: f64,
    /// Blank name, blank email, or placeholder email.
    pub blank_field: f64,
}

impl Default for PerturbationRates {
    fn default() -> Self {
        PerturbationRates {
            nickname: 0.25,
            initials: 0.15,
            swap_names: 0.08,
            email_variant: 0.35,
            typo: 0.12,
            blank_field: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_developers: usize,
    /// `(alias_count, weight)`; a developer's ID count is drawn from this.
    pub alias_distribution: Vec<(usize, f64)>,
    pub perturbation_rates: PerturbationRates,
    pub common_name_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_developers: 1000,
            alias_distribution: vec![
                (1, 0.30),
                (2, 0.30),
                (3, 0.20),
                (4, 0.10),
                (5, 0.06),
                (6, 0.04),
            ],
            perturbation_rates: PerturbationRates::default(),
            common_name_fraction: 0.02,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alias_distribution.is_empty() {
            return Err(Error::Config("alias distribution is empty".into()));
        }
        for &(count, weight) in &self.alias_distribution {
            if count == 0 {
                return Err(Error::Config("alias counts must be at least 1".into()));
            }
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::Config(format!(
                    "alias weight {weight} must be positive"
                )));
            }
        }
        let r = &self.perturbation_rates;
        let probs = [
            ("nickname", r.nickname),
            ("initials", r.initials),
            ("swap_names", r.swap_names),
            ("email_variant", r.email_variant),
            ("typo", r.typo),
            ("blank_field", r.blank_field),
            ("common_name_fraction", self.common_name_fraction),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "{name} must be a probability, got {p}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Author IDs in shuffled output order.
    pub ids: Vec<String>,
    /// One group per developer.
    pub truth: TruthSet,
    /// Drawn alias count per developer, in developer order.
    pub alias_counts: Vec<usize>,
}

struct Pools {
    first: Vec<&'static str>,
    last: Vec<&'static str>,
}

impl Pools {
    fn load() -> Self {
        let words = |s: &'static str| s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        Pools {
            first: words(FIRST_NAMES),
            last: words(LAST_NAMES),
        }
    }
}

struct Developer {
    first: String,
    last: String,
    user: String,
    domain: &'static str,
}

struct Generator<'a> {
    rng: ChaCha8Rng,
    rates: PerturbationRates,
    pools: &'a Pools,
    used_ids: HashSet<String>,
    /// Real (non-placeholder) email → owning developer.
    email_owner: HashMap<String, usize>,
}

impl Generator<'_> {
    fn pick<'s>(&mut self, items: &[&'s str]) -> &'s str {
        items[self.rng.gen_range(0..items.len())]
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn username(&mut self, first: &str, last: &str) -> String {
        let f = ascii_lower(first);
        let l = ascii_lower(last);
        let fi = &f[..1];
        let li = &l[..1];
        let mut user = match self.rng.gen_range(0..7) {
            0 => format!("{f}.{l}"),
            1 => format!("{f}{l}"),
            2 => format!("{fi}{l}"),
            3 => format!("{f}{li}"),
            4 => format!("{f}_{l}"),
            5 => format!("{l}.{f}"),
            _ => f.clone(),
        };
        if self.chance(0.3) {
            user.push_str(&self.rng.gen_range(1..100).to_string());
        }
        user
    }

    /// Claims `user@domain` for developer `dev`, adding digits until the
    /// address belongs to nobody else.
    fn claim_email(&mut self, dev: usize, user: &str, domain: &str) -> String {
        let mut candidate = format!("{user}@{domain}");
        while matches!(self.email_owner.get(&candidate), Some(&owner) if owner != dev) {
            let n = self.rng.gen_range(1..10_000);
            candidate = format!("{user}{n}@{domain}");
        }
        self.email_owner.insert(candidate.clone(), dev);
        candidate
    }

    fn nickname(&mut self, first: &str) -> Option<String> {
        let chars: Vec<char> = first.chars().collect();
        if chars.len() < 5 {
            return None;
        }
        let keep = self.rng.gen_range(3..=4.min(chars.len() - 2));
        Some(chars[..keep].iter().collect())
    }

    fn typo(&mut self, word: &str) -> Option<String> {
        let mut chars: Vec<char> = word.chars().collect();
        if chars.len() < 4 {
            return None;
        }
        let pos = self.rng.gen_range(1..chars.len());
        let letter = (b'a' + self.rng.gen_range(0..26u8)) as char;
        match self.rng.gen_range(0..4) {
            0 => chars[pos] = letter,
            1 => {
                chars.remove(pos);
            }
            2 => chars.insert(pos, letter),
            _ => chars.swap(pos - 1, pos),
        }
        let out: String = chars.into_iter().collect();
        (out != word).then_some(out)
    }

    /// A name string different from the base display name, email unchanged.
    fn perturbed_name(&mut self, dev: &Developer) -> String {
        let r = self.rates;
        let total = r.nickname + r.initials + r.swap_names + r.typo;
        let roll = self.rng.gen::<f64>();
        let (first, last) = (dev.first.as_str(), dev.last.as_str());
        let choice = if total > 0.0 && roll < total.min(1.0) {
            let x = self.rng.gen::<f64>() * total;
            if x < r.nickname {
                0
            } else if x < r.nickname + r.initials {
                1
            } else if x < r.nickname + r.initials + r.swap_names {
                2
            } else {
                3
            }
        } else {
            4
        };
        let perturbed = match choice {
            0 => self.nickname(first).map(|n| format!("{n} {last}")),
            1 => Some(if self.chance(0.7) {
                format!("{}. {last}", &first[..1])
            } else {
                format!("{first} {}.", &last[..1])
            }),
            2 => Some(if self.chance(0.5) {
                format!("{last} {first}")
            } else {
                format!("{last}, {first}")
            }),
            3 => {
                if self.chance(0.5) {
                    self.typo(first).map(|t| format!("{t} {last}"))
                } else {
                    self.typo(last).map(|t| format!("{first} {t}"))
                }
            }
            _ => None,
        };
        perturbed.unwrap_or_else(|| match self.rng.gen_range(0..3) {
            0 => format!("{} {}", first.to_lowercase(), last.to_lowercase()),
            1 => dev.user.clone(),
            _ => first.to_string(),
        })
    }

    fn alias(&mut self, dev_idx: usize, dev: &Developer) -> String {
        let base_name = format!("{} {}", dev.first, dev.last);
        let base_email = format!("{}@{}", dev.user, dev.domain);
        if self.chance(self.rates.email_variant) {
            let email = match self.rng.gen_range(0..10) {
                0..=4 => {
                    let domain = self.other_domain(dev.domain);
                    self.claim_email(dev_idx, &dev.user, domain)
                }
                5 | 6 => {
                    let user = self.username(&dev.first, &dev.last);
                    self.claim_email(dev_idx, &user, dev.domain)
                }
                _ => {
                    let user = self.username(&dev.first, &dev.last);
                    let domain = self.other_domain(dev.domain);
                    self.claim_email(dev_idx, &user, domain)
                }
            };
            let name = if self.chance(0.2) {
                base_name.to_lowercase()
            } else {
                base_name
            };
            return format!("{name} <{email}>");
        }
        if self.chance(self.rates.blank_field) {
            return match self.rng.gen_range(0..10) {
                0..=3 => format!("{base_name} <>"),
                4..=6 => format!("<{base_email}>"),
                _ => {
                    let junk = self.pick(&JUNK_EMAILS);
                    format!("{base_name} <{junk}>")
                }
            };
        }
        let name = self.perturbed_name(dev);
        format!("{name} <{base_email}>")
    }

    fn other_domain(&mut self, current: &str) -> &'static str {
        loop {
            let d = DOMAINS[self.rng.gen_range(0..DOMAINS.len())];
            if d != current {
                return d;
            }
        }
    }
}

fn ascii_lower(s: &str) -> String {
    let lower: String = s
        .to_lowercase()
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .collect();
    if lower.is_empty() {
        "dev".to_string()
    } else {
        lower
    }
}

/// Redraws allowed before an uncommon base name may repeat another developer's.
const MAX_NAME_REDRAWS: usize = 50;

/// Generates a corpus and its ground truth.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let pools = Pools::load();
    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        rates: cfg.perturbation_rates,
        pools: &pools,
        used_ids: HashSet::new(),
        email_owner: HashMap::new(),
    };
    let weights = WeightedIndex::new(cfg.alias_distribution.iter().map(|(_, w)| *w))
        .map_err(|e| Error::Config(format!("alias distribution: {e}")))?;

    let mut groups: Vec<Vec<String>> = Vec::with_capacity(cfg.n_developers);
    let mut alias_counts = Vec::with_capacity(cfg.n_developers);
    let mut used_names: HashSet<(&str, &str)> = HashSet::new();
    for dev_idx in 0..cfg.n_developers {
        let count = cfg.alias_distribution[weights.sample(&mut gen.rng)].0;
        let (first, last) = if gen.chance(cfg.common_name_fraction) {
            COMMON_NAMES[gen.rng.gen_range(0..COMMON_NAMES.len())]
        } else {
            let mut pair = (gen.pick(&gen.pools.first), gen.pick(&gen.pools.last));
            for _ in 0..MAX_NAME_REDRAWS {
                if !used_names.contains(&pair) {
                    break;
                }
                pair = (gen.pick(&gen.pools.first), gen.pick(&gen.pools.last));
            }
            used_names.insert(pair);
            pair
        };
        let user = gen.username(first, last);
        let domain = DOMAINS[gen.rng.gen_range(0..DOMAINS.len())];
        let email = gen.claim_email(dev_idx, &user, domain);
        let (user, domain) = email.split_once('@').expect("claimed emails contain @");
        let dev = Developer {
            first: first.to_string(),
            last: last.to_string(),
            user: user.to_string(),
            domain: DOMAINS
                .iter()
                .find(|d| **d == domain)
                .expect("domain from pool"),
        };

        let mut ids = Vec::with_capacity(count);
        let base = format!("{first} {last} <{email}>");
        gen.used_ids.insert(base.clone());
        ids.push(base);
        while ids.len() < count {
            let mut id = None;
            for _ in 0..20 {
                let candidate = gen.alias(dev_idx, &dev);
                if !gen.used_ids.contains(&candidate) {
                    id = Some(candidate);
                    break;
                }
            }
            let id = id.unwrap_or_else(|| {
                let domain = gen.other_domain(dev.domain);
                let email = gen.claim_email(dev_idx, &format!("{}{}", dev.user, ids.len()), domain);
                format!("{} {} <{email}>", dev.first, dev.last)
            });
            gen.used_ids.insert(id.clone());
            ids.push(id);
        }
        alias_counts.push(count);
        groups.push(ids);
    }

    let mut all: Vec<String> = groups.iter().flatten().cloned().collect();
    all.shuffle(&mut gen.rng);
    Ok(SynthCorpus {
        ids: all,
        truth: TruthSet::new(groups)?,
        alias_counts,
    })
}

/// Samples balanced labeled pairs from a truth set: positives uniformly from
/// in-group pairs, negatives from cross-group pairs with half of them forced
/// to share a first or last name.
pub fn generate_training_pairs(
    truth: &TruthSet,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let in_group: Vec<(usize, usize, usize)> = truth
        .groups
        .iter()
        .enumerate()
        .flat_map(|(g, members)| {
            (0..members.len()).flat_map(move |i| ((i + 1)..members.len()).map(move |j| (g, i, j)))
        })
        .collect();
    if n_pos > in_group.len() {
        return Err(Error::Sampling(format!(
            "requested {n_pos} positive pairs but the truth set has only {} in-group pairs",
            in_group.len()
        )));
    }
    let mut pairs: Vec<LabeledPair> = rand::seq::index::sample(&mut rng, in_group.len(), n_pos)
        .into_iter()
        .map(|k| {
            let (g, i, j) = in_group[k];
            LabeledPair {
                label: true,
                id1: truth.groups[g][i].clone(),
                id2: truth.groups[g][j].clone(),
            }
        })
        .collect();

    if n_neg > 0 {
        pairs.extend(sample_negatives(truth, n_neg, &mut rng)?);
    }
    pairs.shuffle(&mut rng);
    Ok(pairs)
}

fn sample_negatives(
    truth: &TruthSet,
    n_neg: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledPair>> {
    let members: Vec<(usize, &str)> = truth
        .groups
        .iter()
        .enumerate()
        .flat_map(|(g, ids)| ids.iter().map(move |id| (g, id.as_str())))
        .collect();
    if truth.groups.len() < 2 {
        return Err(Error::Sampling(format!(
            "requested {n_neg} negative pairs but the truth set has {} group(s)",
            truth.groups.len()
        )));
    }

    // Buckets of member positions sharing a normalized first or last name.
    let mut buckets: HashMap<String, Vec<usize>> = HashMap::new();
    for (pos, (_, id)) in members.iter().enumerate() {
        let p = parse_author_id(id);
        for (tag, name) in [("f", &p.first_name), ("l", &p.last_name)] {
            let key = normalize_name(name);
            if !key.is_empty() {
                buckets.entry(format!("{tag}:{key}")).or_default().push(pos);
            }
        }
    }
    let mut bucket_keys: Vec<&String> = buckets.keys().filter(|k| buckets[*k].len() >= 2).collect();
    bucket_keys.sort();

    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Vec::with_capacity(n_neg);
    let max_attempts = n_neg.saturating_mul(100).max(1000);
    let mut attempts = 0;
    while out.len() < n_neg {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Sampling(format!(
                "found only {} of {n_neg} distinct cross-group pairs",
                out.len()
            )));
        }
        let hard = out.len() % 2 == 0 && !bucket_keys.is_empty();
        let (a, b) = if hard {
            let bucket = &buckets[bucket_keys[rng.gen_range(0..bucket_keys.len())]];
            (
                bucket[rng.gen_range(0..bucket.len())],
                bucket[rng.gen_range(0..bucket.len())],
            )
        } else {
            (
                rng.gen_range(0..members.len()),
                rng.gen_range(0..members.len()),
            )
        };
        if members[a].0 == members[b].0 {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            continue;
        }
        out.push(LabeledPair {
            label: false,
            id1: members[key.0].1.to_string(),
            id2: members[key.1].1.to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            n_developers: n,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn single_developer_single_id() {
        let cfg = SynthConfig {
            n_developers: 1,
            alias_distribution: vec![(1, 1.0)],
            ..SynthConfig::default()
        };
        let c = generate_corpus(&cfg).unwrap();
        assert_eq!(c.ids.len(), 1);
        assert_eq!(c.truth.groups, vec![c.ids.clone()]);
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate_corpus(&small(300, 5)).unwrap();
        let b = generate_corpus(&small(300, 5)).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&small(300, 6)).unwrap();
        assert_ne!(a.ids, c.ids);
    }

    #[test]
    fn id_count_matches_drawn_counts() {
        let c = generate_corpus(&small(1000, 42)).unwrap();
        let drawn: usize = c.alias_counts.iter().sum();
        assert_eq!(c.ids.len(), drawn);
        assert_eq!(c.truth.id_count(), drawn);
        for (group, &count) in c.truth.groups.iter().zip(&c.alias_counts) {
            assert_eq!(group.len(), count);
        }
    }

    #[test]
    fn ids_are_unique_and_covered_by_truth() {
        let c = generate_corpus(&small(2000, 9)).unwrap();
        let unique: HashSet<&String> = c.ids.iter().collect();
        assert_eq!(unique.len(), c.ids.len());
        let in_truth: HashSet<&String> = c.truth.groups.iter().flatten().collect();
        assert_eq!(unique, in_truth);
        assert!(c.ids.iter().all(|id| !id.contains(['\n', ';'])));
    }

    #[test]
    fn common_names_exceed_group_limit() {
        let c = generate_corpus(&small(5000, 1)).unwrap();
        let smiths = c
            .ids
            .iter()
            .filter(|id| id.starts_with("John Smith <"))
            .count();
        assert!(smiths > 12, "only {smiths} John Smith IDs");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = small(10, 1);
        cfg.alias_distribution = vec![(2, 0.0)];
        assert!(generate_corpus(&cfg).is_err());
        let mut cfg = small(10, 1);
        cfg.perturbation_rates.typo = 1.5;
        assert!(generate_corpus(&cfg).is_err());
    }

    #[test]
    fn training_pairs_respect_truth() {
        let c = generate_corpus(&small(500, 3)).unwrap();
        let pairs = generate_training_pairs(&c.truth, 200, 200, 11).unwrap();
        assert_eq!(pairs.len(), 400);
        let group_of: HashMap<&str, usize> = c
            .truth
            .groups
            .iter()
            .enumerate()
            .flat_map(|(g, ids)| ids.iter().map(move |id| (id.as_str(), g)))
            .collect();
        for p in &pairs {
            assert_ne!(p.id1, p.id2);
            assert_eq!(
                group_of[p.id1.as_str()] == group_of[p.id2.as_str()],
                p.label
            );
        }
        assert_eq!(pairs.iter().filter(|p| p.label).count(), 200);
        assert_eq!(
            pairs,
            generate_training_pairs(&c.truth, 200, 200, 11).unwrap()
        );

        let hard = pairs
            .iter()
            .filter(|p| !p.label)
            .filter(|p| {
                let (a, b) = (parse_author_id(&p.id1), parse_author_id(&p.id2));
                normalize_name(&a.first_name) == normalize_name(&b.first_name)
                    || normalize_name(&a.last_name) == normalize_name(&b.last_name)
            })
            .count();
        assert!(hard >= 100, "only {hard} hard negatives");
    }

    #[test]
    fn empty_request_gives_empty_list() {
        let c = generate_corpus(&small(20, 3)).unwrap();
        assert!(generate_training_pairs(&c.truth, 0, 0, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn singleton_truth_cannot_supply_positives() {
        let truth = TruthSet::new(vec![vec!["a".into()], vec!["b".into()]]).unwrap();
        let err = generate_training_pairs(&truth, 1, 0, 1).unwrap_err();
        assert!(err.to_string().contains("only 0 in-group pairs"), "{err}");
    }
}
