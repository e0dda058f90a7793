//! Random-forest pair classifier over [`PairFeatures`].
//!
//! Trees are CART-style binary trees grown on bootstrap samples with Gini
//! impurity, drawing a random subset of features at each split. A leaf keeps
//! the positive fraction of the training rows that reached it, and the forest
//! probability is the mean over trees. Training is fully determined by the
//! seed: tree `t` uses its own ChaCha stream seeded with `seed + t`, so trees
//! can be grown in parallel without changing the result.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::parse_author_id;
use crate::error::{Error, Result};
use crate::io::{read_lines, AtomicFile, Compression};
use crate::similarity::{pair_features, PairFeatures, FEATURE_COUNT};

pub const MODEL_MAGIC: &str = "idres-forest";
pub const MODEL_VERSION: &str = "v1";
/// Default probability at or above which a pair is linked.
pub const DEFAULT_LINK_THRESHOLD: f64 = 0.5;

const MAX_LOAD_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `features[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, f: &PairFeatures) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { positive_fraction } => return *positive_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if f.0[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub seed: u64,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn feature_count(&self) -> usize {
        FEATURE_COUNT
    }

    /// Mean leaf fraction over all trees.
    pub fn predict_prob(&self, f: &PairFeatures) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(f)).sum();
        sum / self.trees.len() as f64
    }

    /// Serializes to the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MODEL_MAGIC} {MODEL_VERSION} trees={} seed={}\n",
            self.trees.len(),
            self.seed
        );
        for tree in &self.trees {
            write_preorder(tree, &mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| model_err(1, "empty model file"))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.first() != Some(&MODEL_MAGIC) {
            return Err(model_err(
                1,
                format!("not a forest model (expected `{MODEL_MAGIC}`)"),
            ));
        }
        match tokens.get(1) {
            Some(&MODEL_VERSION) => {}
            Some(v) => {
                return Err(model_err(
                    1,
                    format!("unsupported version `{v}` (expected `{MODEL_VERSION}`)"),
                ))
            }
            None => return Err(model_err(1, "missing version")),
        }
        if tokens.len() != 4 {
            return Err(model_err(
                1,
                "expected `trees=<n> seed=<s>` after the version",
            ));
        }
        let n_trees: usize = header_value(tokens[2], "trees")?;
        let seed: u64 = header_value(tokens[3], "seed")?;
        if n_trees == 0 {
            return Err(model_err(1, "model must contain at least one tree"));
        }

        let mut last_line = 1;
        let mut trees = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            trees.push(read_node(&mut lines, &mut last_line, t, 0)?);
        }
        if let Some((n, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(model_err(
                n,
                format!("unexpected trailing content `{line}`"),
            ));
        }
        Ok(ForestModel { trees, seed })
    }
}

fn write_preorder(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf { positive_fraction } => {
            let _ = writeln!(out, "L {positive_fraction:.16e}");
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "I {feature} {threshold:.16e}");
            write_preorder(left, out);
            write_preorder(right, out);
        }
    }
}

fn model_err(line: usize, message: impl Into<String>) -> Error {
    Error::Model {
        line,
        message: message.into(),
    }
}

fn header_value<T: std::str::FromStr>(token: &str, key: &str) -> Result<T> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| model_err(1, format!("expected `{key}=<n>`, found `{token}`")))
}

fn read_node<'a, I>(
    lines: &mut I,
    last_line: &mut usize,
    tree: usize,
    depth: usize,
) -> Result<TreeNode>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let Some((n, line)) = lines.next() else {
        return Err(model_err(
            *last_line + 1,
            format!("unexpected end of file inside tree {tree}"),
        ));
    };
    *last_line = n;
    if depth > MAX_LOAD_DEPTH {
        return Err(model_err(n, "tree deeper than supported"));
    }
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        ["L", fraction] => {
            let positive_fraction: f64 = fraction
                .parse()
                .map_err(|_| model_err(n, format!("bad leaf fraction `{fraction}`")))?;
            if !(0.0..=1.0).contains(&positive_fraction) {
                return Err(model_err(n, "leaf fraction outside [0, 1]"));
            }
            Ok(TreeNode::Leaf { positive_fraction })
        }
        ["I", feature, threshold] => {
            let feature: usize = feature
                .parse()
                .ok()
                .filter(|&f| f < FEATURE_COUNT)
                .ok_or_else(|| model_err(n, format!("bad feature index `{feature}`")))?;
            let threshold: f64 = threshold
                .parse()
                .ok()
                .filter(|t: &f64| t.is_finite())
                .ok_or_else(|| model_err(n, format!("bad threshold `{threshold}`")))?;
            let left = read_node(lines, last_line, tree, depth + 1)?;
            let right = read_node(lines, last_line, tree, depth + 1)?;
            Ok(TreeNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(model_err(n, format!("malformed node line `{line}`"))),
    }
}

pub fn save_model(model: &ForestModel, path: &Path) -> Result<()> {
    let mut out = AtomicFile::create(path, Compression::Plain)?;
    out.write_all(model.to_text().as_bytes())
        .map_err(|e| Error::io(path, e))?;
    out.commit()
}

pub fn load_model(path: &Path) -> Result<ForestModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ForestModel::from_text(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            features_per_split: 3,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Training("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Training("min_leaf must be at least 1".into()));
        }
        if self.features_per_split == 0 || self.features_per_split > FEATURE_COUNT {
            return Err(Error::Training(format!(
                "features_per_split must be in 1..={FEATURE_COUNT}"
            )));
        }
        Ok(())
    }
}

/// One labeled training pair of author IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub label: bool,
    pub id1: String,
    pub id2: String,
}

/// Minimum number of pairs required per class.
pub const MIN_PAIRS_PER_CLASS: usize = 10;

/// Trains a forest on labeled author-ID pairs.
pub fn train_forest(pairs: &[LabeledPair], params: &ForestParams) -> Result<ForestModel> {
    let samples: Vec<(PairFeatures, bool)> = pairs
        .iter()
        .map(|p| {
            let a = parse_author_id(&p.id1);
            let b = parse_author_id(&p.id2);
            (pair_features(&a, &b), p.label)
        })
        .collect();
    train_on_features(&samples, params)
}

/// Trains a forest on precomputed feature rows.
pub fn train_on_features(
    samples: &[(PairFeatures, bool)],
    params: &ForestParams,
) -> Result<ForestModel> {
    params.validate()?;
    let positives = samples.iter().filter(|(_, l)| *l).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Training(format!(
            "training set has a single class ({positives} positive, {negatives} negative pairs)"
        )));
    }
    if positives < MIN_PAIRS_PER_CLASS || negatives < MIN_PAIRS_PER_CLASS {
        return Err(Error::Training(format!(
            "need at least {MIN_PAIRS_PER_CLASS} pairs of each label, got {positives} positive and {negatives} negative"
        )));
    }

    let rows: Vec<[f64; FEATURE_COUNT]> = samples.iter().map(|(f, _)| f.0).collect();
    let labels: Vec<bool> = samples.iter().map(|(_, l)| *l).collect();
    let data = TrainingData {
        rows: &rows,
        labels: &labels,
    };

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            let mut idx: Vec<usize> = (0..rows.len())
                .map(|_| rng.gen_range(0..rows.len()))
                .collect();
            grow(&data, &mut idx, 0, params, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees,
        seed: params.seed,
    })
}

struct TrainingData<'a> {
    rows: &'a [[f64; FEATURE_COUNT]],
    labels: &'a [bool],
}

/// Sum over both sides of `count * gini`, i.e. `count * impurity` unnormalized.
fn weighted_gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    n as f64 * 2.0 * p * (1.0 - p)
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn grow(
    data: &TrainingData<'_>,
    idx: &mut [usize],
    depth: usize,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| data.labels[i]).count();
    let leaf = TreeNode::Leaf {
        positive_fraction: pos as f64 / n as f64,
    };
    if depth >= params.max_depth || n < 2 * params.min_leaf || pos == 0 || pos == n {
        return leaf;
    }

    let parent = weighted_gini(pos, n);
    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
    for feature in sample(rng, FEATURE_COUNT, params.features_per_split).into_iter() {
        column.clear();
        column.extend(idx.iter().map(|&i| (data.rows[i][feature], data.labels[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0usize;
        for k in 1..n {
            left_pos += column[k - 1].1 as usize;
            let (lo, hi) = (column[k - 1].0, column[k].0);
            if lo == hi || k < params.min_leaf || n - k < params.min_leaf {
                continue;
            }
            let score = weighted_gini(left_pos, k) + weighted_gini(pos - left_pos, n - k);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Split {
                    feature,
                    threshold: midpoint(lo, hi),
                    score,
                });
            }
        }
    }

    let Some(split) = best.filter(|s| s.score < parent - 1e-12) else {
        return leaf;
    };
    let mut boundary = 0;
    for k in 0..n {
        if data.rows[idx[k]][split.feature] < split.threshold {
            idx.swap(k, boundary);
            boundary += 1;
        }
    }
    let (left_idx, right_idx) = idx.split_at_mut(boundary);
    let left = grow(data, left_idx, depth + 1, params, rng);
    let right = grow(data, right_idx, depth + 1, params, rng);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// A threshold `t` with `lo < t <= hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Fraction of samples whose thresholded prediction matches the label.
pub fn accuracy(model: &ForestModel, samples: &[(PairFeatures, bool)], threshold: f64) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let correct = samples
        .iter()
        .filter(|(f, label)| (model.predict_prob(f) >= threshold) == *label)
        .count();
    correct as f64 / samples.len() as f64
}

/// Splits `rest` = `id1;id2` into the two IDs. When an ID contains `;` the
/// split goes after the first `>` that is directly followed by `;`.
fn split_id_pair(rest: &str) -> Option<(&str, &str)> {
    let positions: Vec<usize> = rest.match_indices(';').map(|(i, _)| i).collect();
    let pos = match positions.as_slice() {
        [] => return None,
        [only] => *only,
        many => many
            .iter()
            .copied()
            .find(|&i| rest[..i].ends_with('>'))
            .unwrap_or(many[0]),
    };
    Some((&rest[..pos], &rest[pos + 1..]))
}

/// Reads a `label;id1;id2` training-pairs file.
pub fn read_training_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    let mut pairs = Vec::new();
    for (n, line) in read_lines(path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parsed = line.split_once(';').and_then(|(label, rest)| {
            let label = match label {
                "0" => false,
                "1" => true,
                _ => return None,
            };
            let (id1, id2) = split_id_pair(rest)?;
            Some(LabeledPair {
                label,
                id1: id1.to_string(),
                id2: id2.to_string(),
            })
        });
        match parsed {
            Some(p) if p.id1 != p.id2 => pairs.push(p),
            Some(_) => return Err(Error::parse(path, n + 1, "pair joins an ID to itself")),
            None => {
                return Err(Error::parse(
                    path,
                    n + 1,
                    "expected `label;id1;id2` with label 0 or 1",
                ))
            }
        }
    }
    Ok(pairs)
}

pub fn write_training_pairs(pairs: &[LabeledPair], path: &Path) -> Result<()> {
    let lines = pairs
        .iter()
        .map(|p| format!("{};{};{}", p.label as u8, p.id1, p.id2));
    crate::io::write_lines(path, Compression::from_path(path), lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_samples(n: usize, seed: u64) -> Vec<(PairFeatures, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2 == 0;
                let base = if label { 0.8 } else { 0.3 };
                let mut f = [0.0; FEATURE_COUNT];
                for v in &mut f {
                    *v = (base + rng.gen_range(-0.25..0.25f64)).clamp(0.0, 1.0);
                }
                (PairFeatures(f), label)
            })
            .collect()
    }

    fn params(seed: u64) -> ForestParams {
        ForestParams {
            n_trees: 15,
            seed,
            ..ForestParams::default()
        }
    }

    #[test]
    fn learns_separable_toy_data() {
        let data = toy_samples(200, 1);
        let model = train_on_features(&data, &params(3)).unwrap();
        assert_eq!(model.n_trees(), 15);
        assert!(accuracy(&model, &data, 0.5) >= 0.95);
        assert!(model.trees.iter().all(|t| t.depth() <= 12));
        assert!(model.predict_prob(&PairFeatures([1.0; FEATURE_COUNT])) > 0.9);
        assert!(model.predict_prob(&PairFeatures([0.0; FEATURE_COUNT])) < 0.1);
    }

    #[test]
    fn training_is_deterministic_and_thread_independent() {
        let data = toy_samples(120, 2);
        let a = train_on_features(&data, &params(9)).unwrap().to_text();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| train_on_features(&data, &params(9)).unwrap().to_text());
        assert_eq!(a, b);
        let c = train_on_features(&data, &params(10)).unwrap().to_text();
        assert_ne!(a, c);
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<_> = toy_samples(40, 3)
            .into_iter()
            .map(|(f, _)| (f, true))
            .collect();
        let err = train_on_features(&data, &params(1)).unwrap_err();
        assert!(err.to_string().contains("single class"), "{err}");
    }

    #[test]
    fn too_few_per_class_is_rejected() {
        let mut data = toy_samples(40, 3);
        data.retain(|(_, l)| *l);
        data.extend(toy_samples(10, 4).into_iter().filter(|(_, l)| !*l));
        assert!(matches!(
            train_on_features(&data, &params(1)),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn constant_leaf_forest() {
        let model = ForestModel {
            trees: vec![TreeNode::Leaf {
                positive_fraction: 0.5,
            }],
            seed: 0,
        };
        assert_eq!(model.predict_prob(&PairFeatures([0.3; FEATURE_COUNT])), 0.5);
    }

    #[test]
    fn routing_is_strict_less_than() {
        let tree = TreeNode::Split {
            feature: 2,
            threshold: 0.5,
            left: Box::new(TreeNode::Leaf {
                positive_fraction: 0.0,
            }),
            right: Box::new(TreeNode::Leaf {
                positive_fraction: 1.0,
            }),
        };
        let mut f = [0.0; FEATURE_COUNT];
        f[2] = 0.5;
        assert_eq!(tree.predict(&PairFeatures(f)), 1.0);
        f[2] = 0.4999;
        assert_eq!(tree.predict(&PairFeatures(f)), 0.0);
    }

    #[test]
    fn adding_constant_tree_moves_mean_toward_it() {
        let data = toy_samples(100, 5);
        let mut model = train_on_features(&data, &params(2)).unwrap();
        let f = data[7].0;
        let before = model.predict_prob(&f);
        model.trees.push(TreeNode::Leaf {
            positive_fraction: 1.0,
        });
        let after = model.predict_prob(&f);
        assert!(after >= before && after <= 1.0);
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let data = toy_samples(150, 6);
        let model = train_on_features(&data, &params(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let mut f = [0.0; FEATURE_COUNT];
            for v in &mut f {
                *v = rng.gen();
            }
            let f = PairFeatures(f);
            assert_eq!(loaded.predict_prob(&f), model.predict_prob(&f));
        }
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .starts_with("idres-forest v1 trees=15 seed=4\n"));
    }

    #[test]
    fn text_format_layout() {
        let model = ForestModel {
            trees: vec![TreeNode::Split {
                feature: 0,
                threshold: 0.75,
                left: Box::new(TreeNode::Leaf {
                    positive_fraction: 0.1,
                }),
                right: Box::new(TreeNode::Leaf {
                    positive_fraction: 1.0,
                }),
            }],
            seed: 42,
        };
        assert_eq!(
            model.to_text(),
            "idres-forest v1 trees=1 seed=42\nI 0 7.5000000000000000e-1\nL 1.0000000000000001e-1\nL 1.0000000000000000e0\n"
        );
    }

    #[test]
    fn load_errors_name_the_line() {
        let err = ForestModel::from_text("idres-forest v2 trees=1 seed=0\nL 0.5\n").unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
        assert!(matches!(err, Error::Model { line: 1, .. }));

        let err = ForestModel::from_text(
            "idres-forest v1 trees=2 seed=0\nI 0 0.5\nL 0.1\nL 0.2\nI 1 0.5\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Model { line: 6, .. }), "{err}");
        assert!(err.to_string().contains("end of file"), "{err}");

        let err = ForestModel::from_text("idres-forest v1 trees=1 seed=0\nI 9 0.5\nL 0\nL 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Model { line: 2, .. }), "{err}");

        let err =
            ForestModel::from_text("idres-forest v1 trees=1 seed=0\nL 0.5\nL 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Model { line: 3, .. }), "{err}");

        let err = ForestModel::from_text("idres-forest v1 trees=1 seed=0\nX\n").unwrap_err();
        assert!(matches!(err, Error::Model { line: 2, .. }), "{err}");

        assert!(ForestModel::from_text("idres-forest v1 trees=0 seed=0\n").is_err());
    }

    #[test]
    fn training_pairs_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.txt");
        let pairs = vec![
            LabeledPair {
                label: true,
                id1: "A B <a@b.cd>".into(),
                id2: "A. B <a@b.cd>".into(),
            },
            LabeledPair {
                label: false,
                id1: "A;B <a@b.cd>".into(),
                id2: "C <c@d.ef>".into(),
            },
        ];
        write_training_pairs(&pairs, &path).unwrap();
        assert_eq!(read_training_pairs(&path).unwrap(), pairs);

        std::fs::write(&path, "1;a;b\n2;a;b\n").unwrap();
        let err = read_training_pairs(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        std::fs::write(&path, "1;same;same\n").unwrap();
        assert!(read_training_pairs(&path).is_err());
    }
}
