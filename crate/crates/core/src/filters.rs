//! Junk-email and uninformative-name suppression.
//!
//! Blocking links IDs that share an email or an exact name, so placeholder
//! emails (`root@localhost`, `john@example.com`) and placeholder or very
//! common names would glue unrelated developers together. These predicates
//! decide which values are allowed to act as blocking keys.

use std::collections::HashSet;

use regex::Regex;

use crate::config::KeyValueFile;
use crate::corpus::{normalize_email, FrequencyTables};
use crate::error::{Error, Result};

pub const DEFAULT_JUNK_PATTERNS: &[&str] = &[
    r"@([a-z0-9-]+\.)*example\.(com|org)$",
    r"@(.+\.)?(localhost|localdomain)$",
    r"^(none|nobody|devnull|unknown|root|admin|test|user|email|noreply|no-reply)@",
    r"^[^@]*$",
];

pub const DEFAULT_NAME_STOPLIST: &[&str] = &[
    "unknown",
    "test",
    "admin",
    "root",
    "user",
    "administrator",
    "nobody",
    "anonymous",
    "example",
    "name",
    "firstname",
    "lastname",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Emails carried by at least this many distinct author IDs are junk.
    pub junk_email_freq_threshold: u64,
    pub junk_email_patterns: Vec<String>,
    pub min_email_len: usize,
    pub name_min_token_len: usize,
    pub name_stoplist: Vec<String>,
    /// Exact-name groups larger than this are dropped from the name map.
    pub name_group_max: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            junk_email_freq_threshold: 100,
            junk_email_patterns: DEFAULT_JUNK_PATTERNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            min_email_len: 6,
            name_min_token_len: 2,
            name_stoplist: DEFAULT_NAME_STOPLIST
                .iter()
                .map(|s| s.to_string())
                .collect(),
            name_group_max: 12,
        }
    }
}

impl FilterConfig {
    pub const FILE_KEYS: &'static [&'static str] = &[
        "junk_email_freq_threshold",
        "junk_pattern",
        "min_email_len",
        "name_min_token_len",
        "name_stop",
        "name_group_max",
    ];

    /// Overrides fields present in `file`. Any `junk_pattern` / `name_stop`
    /// lines replace the corresponding default list.
    pub fn apply_file(&mut self, file: &KeyValueFile) -> Result<()> {
        if let Some(v) = file.parse_value("junk_email_freq_threshold")? {
            self.junk_email_freq_threshold = v;
        }
        if let Some(v) = file.parse_value("min_email_len")? {
            self.min_email_len = v;
        }
        if let Some(v) = file.parse_value("name_min_token_len")? {
            self.name_min_token_len = v;
        }
        if let Some(v) = file.parse_value("name_group_max")? {
            self.name_group_max = v;
        }
        let patterns = file.get_all("junk_pattern");
        if !patterns.is_empty() {
            self.junk_email_patterns = patterns.into_iter().map(str::to_string).collect();
        }
        let stops = file.get_all("name_stop");
        if !stops.is_empty() {
            self.name_stoplist = stops.into_iter().map(str::to_lowercase).collect();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (
                "junk_email_freq_threshold",
                self.junk_email_freq_threshold as usize,
            ),
            ("min_email_len", self.min_email_len),
            ("name_min_token_len", self.name_min_token_len),
            ("name_group_max", self.name_group_max),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        Ok(())
    }
}

/// A validated [`FilterConfig`] with its junk patterns compiled.
#[derive(Debug, Clone)]
pub struct Filters {
    pub cfg: FilterConfig,
    patterns: Vec<Regex>,
}

impl Filters {
    pub fn new(cfg: FilterConfig) -> Result<Self> {
        cfg.validate()?;
        let patterns = cfg
            .junk_email_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|source| Error::Pattern {
                    pattern: p.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Filters { cfg, patterns })
    }

    /// True if a normalized email matches any junk pattern.
    pub fn matches_junk_pattern(&self, email: &str) -> bool {
        self.patterns.iter().any(|re| re.is_match(email))
    }
}

/// Emails (normalized) that are too frequent or match a junk pattern.
pub fn detect_junk_emails(tables: &FrequencyTables, filters: &Filters) -> HashSet<String> {
    tables
        .email_count
        .iter()
        .filter(|(email, &count)| {
            count >= filters.cfg.junk_email_freq_threshold || filters.matches_junk_pattern(email)
        })
        .map(|(email, _)| email.clone())
        .collect()
}

/// Whether `email` may act as a blocking key.
pub fn is_valid_email(email: &str, junk: &HashSet<String>, cfg: &FilterConfig) -> bool {
    let email = normalize_email(email);
    if email.is_empty() || email.chars().count() < cfg.min_email_len {
        return false;
    }
    let mut parts = email.split('@');
    let (Some(_), Some(domain), None) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    domain.contains('.') && !junk.contains(&email)
}

/// Whether a normalized `(first, last)` name pair may act as a blocking key.
pub fn is_informative_name(first: &str, last: &str, cfg: &FilterConfig) -> bool {
    [first, last].iter().all(|token| {
        token.chars().count() >= cfg.name_min_token_len
            && token.chars().any(char::is_alphabetic)
            && !cfg.name_stoplist.iter().any(|s| s == token)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_frequency_tables, parse_author_id};
    use proptest::prelude::*;

    fn tables_with(emails: &[(&str, u64)]) -> FrequencyTables {
        let mut t = FrequencyTables::default();
        for (e, c) in emails {
            t.email_count.insert(e.to_string(), *c);
        }
        t
    }

    fn default_filters() -> Filters {
        Filters::new(FilterConfig::default()).unwrap()
    }

    #[test]
    fn frequent_email_is_junk() {
        let junk = detect_junk_emails(
            &tables_with(&[("john@example.com", 5000)]),
            &default_filters(),
        );
        assert!(junk.contains("john@example.com"));
    }

    #[test]
    fn rare_email_is_not_junk() {
        let junk = detect_junk_emails(
            &tables_with(&[("rare.person@small.org", 2)]),
            &default_filters(),
        );
        assert!(junk.is_empty());
    }

    #[test]
    fn default_patterns_flag_placeholders() {
        let f = default_filters();
        for junk in [
            "root@localhost",
            "me@box.localdomain",
            "dev@localhost.localdomain",
            "a@example.com",
            "a@mail.example.org",
            "noreply@github.com",
            "no-reply@x.io",
            "nobody@nowhere.net",
            "justtext",
        ] {
            assert!(f.matches_junk_pattern(junk), "{junk}");
        }
        for ok in [
            "john@me.com",
            "rooter@x.io",
            "a@myexample.com",
            "user1@x.io",
            "a@localhost.dev.io",
        ] {
            assert!(!f.matches_junk_pattern(ok), "{ok}");
        }
        let junk = detect_junk_emails(&tables_with(&[("root@localhost", 1)]), &f);
        assert!(junk.contains("root@localhost"));
    }

    #[test]
    fn malformed_pattern_is_rejected() {
        let cfg = FilterConfig {
            junk_email_patterns: vec!["(unclosed".into()],
            ..FilterConfig::default()
        };
        assert!(matches!(Filters::new(cfg), Err(Error::Pattern { .. })));
    }

    #[test]
    fn zero_threshold_is_rejected() {
        let cfg = FilterConfig {
            name_group_max: 0,
            ..FilterConfig::default()
        };
        assert!(matches!(Filters::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn email_validity_rules() {
        let cfg = FilterConfig::default();
        let none = HashSet::new();
        assert!(is_valid_email("john@me.com", &none, &cfg));
        assert!(is_valid_email("John@Me.COM", &none, &cfg));
        assert!(!is_valid_email("", &none, &cfg));
        assert!(!is_valid_email("a@b", &none, &cfg));
        assert!(
            !is_valid_email("a@b.c", &none, &cfg),
            "shorter than min_email_len"
        );
        assert!(!is_valid_email("ab@@cd.ef", &none, &cfg));
        let junk: HashSet<String> = ["john@me.com".to_string()].into();
        assert!(!is_valid_email("JOHN@me.com", &junk, &cfg));
    }

    #[test]
    fn name_rules() {
        let cfg = FilterConfig::default();
        assert!(is_informative_name("john", "doe", &cfg));
        assert!(!is_informative_name("j", "doe", &cfg));
        assert!(!is_informative_name("unknown", "user", &cfg));
        assert!(!is_informative_name("john", "", &cfg));
        assert!(!is_informative_name("1234", "doe", &cfg));
        assert!(!is_informative_name("john", "--", &cfg));
        assert!(is_informative_name(
            "李",
            "小龙",
            &FilterConfig {
                name_min_token_len: 1,
                ..cfg
            }
        ));
    }

    #[test]
    fn config_file_overrides() {
        let kv = KeyValueFile::parse(
            std::path::Path::new("f.conf"),
            "name_group_max = 5\njunk_pattern = ^x@\nname_stop = Bob\n",
        )
        .unwrap();
        let mut cfg = FilterConfig::default();
        cfg.apply_file(&kv).unwrap();
        assert_eq!(cfg.name_group_max, 5);
        assert_eq!(cfg.junk_email_patterns, vec!["^x@"]);
        assert_eq!(cfg.name_stoplist, vec!["bob"]);
        assert_eq!(cfg.min_email_len, 6);
    }

    proptest! {
        #[test]
        fn valid_never_junk(ids in proptest::collection::vec("[a-d]{1,3}@[e-g]{1,3}(\\.[a-z]{2})?", 1..40), threshold in 1u64..5) {
            let recs: Vec<_> = ids.iter().map(|e| parse_author_id(&format!("A B <{e}>"))).collect();
            let tables = build_frequency_tables(&recs);
            let filters = Filters::new(FilterConfig { junk_email_freq_threshold: threshold, ..FilterConfig::default() }).unwrap();
            let junk = detect_junk_emails(&tables, &filters);
            for r in &recs {
                if is_valid_email(&r.email, &junk, &filters.cfg) {
                    prop_assert!(!junk.contains(&normalize_email(&r.email)));
                }
            }
        }

        #[test]
        fn raising_threshold_never_grows_frequency_junk(
            counts in proptest::collection::vec(1u64..300, 0..30),
            lo in 1u64..200,
            bump in 0u64..200,
        ) {
            let emails: Vec<(String, u64)> = counts.iter().enumerate().map(|(i, &c)| (format!("u{i}@d{i}.com"), c)).collect();
            let mut t = FrequencyTables::default();
            for (e, c) in &emails { t.email_count.insert(e.clone(), *c); }
            let mk = |threshold| Filters::new(FilterConfig { junk_email_freq_threshold: threshold, ..FilterConfig::default() }).unwrap();
            let low = detect_junk_emails(&t, &mk(lo));
            let high = detect_junk_emails(&t, &mk(lo + bump));
            prop_assert!(high.is_subset(&low));
            prop_assert_eq!(&low, &detect_junk_emails(&t, &mk(lo)));
        }
    }
}
