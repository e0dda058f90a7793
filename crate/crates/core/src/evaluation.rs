//! Pairwise precision/recall against ground truth, group statistics, and ROC
//! AUC for classifier checks.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_lines;
use crate::resolution::AliasGroup;

/// Ground-truth alias groups (disjoint).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruthSet {
    pub groups: Vec<Vec<String>>,
}

impl TruthSet {
    pub fn new(groups: Vec<Vec<String>>) -> Result<Self> {
        let truth = TruthSet { groups };
        truth.group_index()?;
        Ok(truth)
    }

    /// ID → group index. Fails on IDs that appear in more than one group.
    fn group_index(&self) -> Result<HashMap<&str, usize>> {
        let mut index = HashMap::new();
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Truth(format!("group {g} is empty")));
            }
            for id in members {
                if let Some(prev) = index.insert(id.as_str(), g) {
                    if prev != g {
                        return Err(Error::Truth(format!(
                            "`{id}` appears in groups {prev} and {g}"
                        )));
                    }
                }
            }
        }
        Ok(index)
    }

    pub fn id_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Reads a truth file: one group per line, members joined by `;`.
pub fn read_truth_file(path: &Path) -> Result<TruthSet> {
    let groups: Vec<Vec<String>> = read_lines(path)?
        .into_iter()
        .filter(|l| !l.is_empty())
        .map(|l| l.split(';').map(str::to_string).collect())
        .collect();
    TruthSet::new(groups)
}

pub fn write_truth_file(truth: &TruthSet, path: &Path) -> Result<()> {
    crate::io::write_lines(
        path,
        crate::io::Compression::from_path(path),
        truth.groups.iter().map(|g| g.join(";")),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub true_links: u64,
    pub predicted_links_in_scope: u64,
    pub true_positives: u64,
    pub precision: f64,
    pub recall: f64,
    /// IDs present in the ground truth.
    pub id_universe: usize,
}

impl MetricsReport {
    fn fields(&self) -> [(&'static str, String); 6] {
        [
            ("id_universe", self.id_universe.to_string()),
            ("true_links", self.true_links.to_string()),
            (
                "predicted_links_in_scope",
                self.predicted_links_in_scope.to_string(),
            ),
            ("true_positives", self.true_positives.to_string()),
            ("precision", format!("{:.6}", self.precision)),
            ("recall", format!("{:.6}", self.recall)),
        ]
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> Vec<String> {
        self.fields()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect()
    }

    /// Human-readable, column-aligned report.
    pub fn to_aligned(&self) -> String {
        let fields = self.fields();
        let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        fields
            .iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Pairwise precision and recall of `predicted` against `truth`, restricted to
/// IDs that appear in the truth set.
pub fn pairwise_metrics(predicted: &[AliasGroup], truth: &TruthSet) -> Result<MetricsReport> {
    let truth_group = truth.group_index()?;
    let ids: Vec<&str> = {
        let mut v: Vec<&str> = truth_group.keys().copied().collect();
        v.sort_unstable();
        v
    };
    let id_of: HashMap<&str, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i as u32))
        .collect();

    let true_links: u64 = truth
        .groups
        .iter()
        .map(|g| {
            let distinct: HashSet<&String> = g.iter().collect();
            crate::blocking::choose2(distinct.len() as u64)
        })
        .sum();

    let mut predicted_links: HashSet<(u32, u32)> = HashSet::new();
    for group in predicted {
        let mut in_scope: Vec<u32> = group
            .members
            .iter()
            .filter_map(|m| id_of.get(m.as_str()).copied())
            .collect();
        in_scope.sort_unstable();
        in_scope.dedup();
        for (i, &a) in in_scope.iter().enumerate() {
            for &b in &in_scope[i + 1..] {
                predicted_links.insert(ordered(a, b));
            }
        }
    }
    let true_positives = predicted_links
        .iter()
        .filter(|(a, b)| truth_group[ids[*a as usize]] == truth_group[ids[*b as usize]])
        .count() as u64;
    let predicted_links_in_scope = predicted_links.len() as u64;

    let ratio = |num: u64, den: u64| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(MetricsReport {
        true_links,
        predicted_links_in_scope,
        true_positives,
        precision: ratio(true_positives, predicted_links_in_scope),
        recall: ratio(true_positives, true_links),
        id_universe: ids.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupStats {
    pub group_count: usize,
    pub id_count: usize,
    /// Lower median for an even number of groups.
    pub median_group_size: usize,
    pub max_group_size: usize,
}

impl GroupStats {
    pub fn to_key_values(&self) -> Vec<String> {
        vec![
            format!("group_count={}", self.group_count),
            format!("id_count={}", self.id_count),
            format!("median_group_size={}", self.median_group_size),
            format!("max_group_size={}", self.max_group_size),
        ]
    }
}

pub fn group_stats(groups: &[AliasGroup]) -> GroupStats {
    let mut sizes: Vec<usize> = groups.iter().map(|g| g.members.len()).collect();
    sizes.sort_unstable();
    GroupStats {
        group_count: sizes.len(),
        id_count: sizes.iter().sum(),
        median_group_size: lower_median(&sizes),
        max_group_size: sizes.last().copied().unwrap_or(0),
    }
}

/// Lower median of an ascending slice; 0 when empty.
pub fn lower_median(sorted: &[usize]) -> usize {
    if sorted.is_empty() {
        0
    } else {
        sorted[(sorted.len() - 1) / 2]
    }
}

/// Area under the ROC curve of `scores` for binary `labels`, counting tied
/// scores as half-correct. `None` unless both classes are present.
pub fn roc_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let positives = scored.iter().filter(|(_, l)| *l).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney U with average ranks for ties.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += avg_rank * sorted[i..j].iter().filter(|(_, l)| *l).count() as f64;
        i = j;
    }
    let p = positives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Some(u / (p * negatives as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn group(ids: &[&str]) -> AliasGroup {
        AliasGroup::new(ids.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn truth(groups: &[&[&str]]) -> TruthSet {
        TruthSet::new(
            groups
                .iter()
                .map(|g| g.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn partial_recall_fixture() {
        let m = pairwise_metrics(&[group(&["a", "b"])], &truth(&[&["a", "b", "c"]])).unwrap();
        assert_eq!(
            (m.true_links, m.predicted_links_in_scope, m.true_positives),
            (3, 1, 1)
        );
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0 / 3.0);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let t = truth(&[&["a", "b"], &["c", "d", "e"], &["f"]]);
        let m = pairwise_metrics(&[group(&["a", "b"]), group(&["c", "d", "e"])], &t).unwrap();
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
        let m = pairwise_metrics(&[], &t).unwrap();
        assert_eq!((m.precision, m.recall), (1.0, 0.0));
        assert_eq!(m.id_universe, 6);
    }

    #[test]
    fn out_of_scope_links_are_ignored() {
        let t = truth(&[&["a", "b"]]);
        let m = pairwise_metrics(&[group(&["a", "b", "zz"]), group(&["x", "y"])], &t).unwrap();
        assert_eq!(m.predicted_links_in_scope, 1);
        assert_eq!(m.precision, 1.0);
    }

    #[test]
    fn false_links_lower_precision() {
        let t = truth(&[&["a", "b"], &["c"]]);
        let m = pairwise_metrics(&[group(&["a", "b", "c"])], &t).unwrap();
        assert_eq!((m.true_positives, m.predicted_links_in_scope), (1, 3));
    }

    #[test]
    fn overlapping_truth_is_rejected() {
        let groups = vec![
            vec!["a".to_string(), "b".into()],
            vec!["b".into(), "c".into()],
        ];
        assert!(matches!(TruthSet::new(groups), Err(Error::Truth(_))));
    }

    #[test]
    fn stats_use_lower_median() {
        let g = |n: usize| AliasGroup::new((0..n).map(|i| format!("{n}-{i}")).collect()).unwrap();
        assert_eq!(group_stats(&[g(2), g(2), g(3)]).median_group_size, 2);
        assert_eq!(group_stats(&[g(2), g(4)]).median_group_size, 2);
        let s = group_stats(&[g(2), g(4)]);
        assert_eq!((s.group_count, s.id_count, s.max_group_size), (2, 6, 4));
        assert_eq!(group_stats(&[]), GroupStats::default());
    }

    #[test]
    fn report_renderings() {
        let m = pairwise_metrics(&[group(&["a", "b"])], &truth(&[&["a", "b", "c"]])).unwrap();
        let kv = m.to_key_values();
        assert!(kv.contains(&"precision=1.000000".to_string()));
        assert!(kv.contains(&"recall=0.333333".to_string()));
        let aligned = m.to_aligned();
        assert!(
            aligned.contains("precision                 1.000000"),
            "{aligned}"
        );
    }

    #[test]
    fn auc_basics() {
        assert_eq!(roc_auc(&[(0.9, true), (0.1, false)]), Some(1.0));
        assert_eq!(roc_auc(&[(0.1, true), (0.9, false)]), Some(0.0));
        assert_eq!(roc_auc(&[(0.5, true), (0.5, false)]), Some(0.5));
        assert_eq!(roc_auc(&[(0.5, true)]), None);
    }

    #[test]
    fn truth_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.txt");
        let t = truth(&[&["a", "b"], &["c"]]);
        write_truth_file(&t, &path).unwrap();
        assert_eq!(read_truth_file(&path).unwrap(), t);
    }

    fn partition_strategy() -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(0usize..6, 1..14)
    }

    fn groups_from_labels(labels: &[usize]) -> Vec<Vec<String>> {
        let mut by: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            by.entry(l).or_default().push(format!("id{i:02}"));
        }
        by.into_values().collect()
    }

    proptest! {
        #[test]
        fn metric_invariants(truth_labels in partition_strategy(), pred_labels in partition_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let t = TruthSet::new(groups_from_labels(&truth_labels)).unwrap();
            let preds: Vec<AliasGroup> = groups_from_labels(&pred_labels).into_iter().filter_map(AliasGroup::new).collect();
            let m = pairwise_metrics(&preds, &t).unwrap();
            prop_assert!(m.true_positives <= m.true_links.min(m.predicted_links_in_scope));

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = preds.clone();
            shuffled.shuffle(&mut rng);
            let mut t2 = t.clone();
            t2.groups.shuffle(&mut rng);
            prop_assert_eq!(m, pairwise_metrics(&shuffled, &t2).unwrap());

            if preds.len() >= 2 {
                let mut merged_members = preds[0].members.clone();
                merged_members.extend(preds[1].members.iter().cloned());
                let mut merged = vec![AliasGroup::new(merged_members).unwrap()];
                merged.extend(preds[2..].iter().cloned());
                prop_assert!(pairwise_metrics(&merged, &t).unwrap().recall >= m.recall);
            }
        }
    }
}
