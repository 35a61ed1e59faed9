//! Random forest of CART trees (Gini impurity, bootstrap resampling,
//! per-split feature subsampling) behind a small classifier interface.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fengine::{catalog, CATALOG_VERSION, FEATURE_COUNT};
use crate::labeling::LabeledSample;

pub const MODEL_FORMAT: &str = "memfail-forest/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("training data must contain both classes (got {n0} negative, {n1} positive samples)")]
    SingleClass { n0: usize, n1: usize },
    #[error("non-finite value in sample {sample}, feature {feature}")]
    NonFinite { sample: String, feature: String },
    #[error("feature vector length {got} does not match model width {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    BadParams(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("catalog version mismatch: model built for {model}, data uses {data}")]
    CatalogMismatch { model: String, data: String },
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: None, min_samples_split: 2, features_per_split: None, seed: 0 }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::BadParams("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::BadParams("min_samples_split must be at least 2".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(ForestError::BadParams("features_per_split must be at least 1".into()));
        }
        Ok(())
    }

    fn candidates(&self, d: usize) -> usize {
        self.features_per_split.unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1)).min(d)
    }
}

/// Gini impurity `1 - sum p_c^2` of a class-count vector.
pub fn gini(counts: &[u32]) -> f64 {
    let n: f64 = counts.iter().map(|&c| c as f64).sum();
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize, counts: [u32; 2] },
    Leaf { counts: [u32; 2] },
}

impl Node {
    fn counts(&self) -> [u32; 2] {
        match self {
            Node::Split { counts, .. } | Node::Leaf { counts } => *counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Builds a tree from an explicit node array (root at index 0).
    /// Children must come after their parent.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self, ForestError> {
        let tree = DecisionTree { nodes };
        tree.validate(n_features)?;
        Ok(tree)
    }

    pub fn leaf(counts: [u32; 2]) -> Self {
        DecisionTree { nodes: vec![Node::Leaf { counts }] }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        if self.nodes.is_empty() {
            return Err(ForestError::InvalidTree("tree has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let c = node.counts();
            match node {
                Node::Leaf { .. } => {
                    if c[0] + c[1] == 0 {
                        return Err(ForestError::InvalidTree(format!("leaf {i} has no samples")));
                    }
                }
                Node::Split { feature, left, right, threshold, .. } => {
                    if *feature >= n_features {
                        return Err(ForestError::InvalidTree(format!(
                            "node {i} splits on feature {feature} >= {n_features}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(ForestError::InvalidTree(format!("node {i} has a non-finite threshold")));
                    }
                    for child in [*left, *right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(ForestError::InvalidTree(format!("node {i} has invalid child {child}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn leaf_for(&self, x: &[f64]) -> [u32; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Positive-class fraction of the leaf reached by `x`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let c = self.leaf_for(x);
        c[1] as f64 / (c[0] + c[1]) as f64
    }

    /// Weighted Gini decrease per feature, scaled by the root weight.
    fn impurity_decrease(&self, n_features: usize) -> Vec<f64> {
        let weighted = |c: [u32; 2]| {
            let n = (c[0] + c[1]) as f64;
            gini(&c) * n
        };
        let root = self.nodes[0].counts();
        let total = (root[0] + root[1]) as f64;
        let mut out = vec![0.0; n_features];
        for node in &self.nodes {
            if let Node::Split { feature, left, right, counts, .. } = node {
                let dec = weighted(*counts)
                    - weighted(self.nodes[*left].counts())
                    - weighted(self.nodes[*right].counts());
                out[*feature] += dec / total;
            }
        }
        out
    }
}

/// Probabilistic binary classifier consumed by the evaluation harness.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Result<f64, ForestError>;
    fn to_json(&self) -> Result<String, ForestError>;
}

/// Something that fits a [`Classifier`] on labeled samples.
pub trait Learner: Send + Sync {
    type Model: Classifier;
    fn fit(&self, samples: &[&LabeledSample]) -> Result<Self::Model, ForestError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub format: String,
    pub catalog_version: String,
    pub n_features: usize,
    pub params: ForestParams,
    pub trees: Vec<DecisionTree>,
}

impl TrainedForest {
    /// Assembles a forest from prebuilt trees.
    pub fn from_trees(
        trees: Vec<DecisionTree>,
        n_features: usize,
        params: ForestParams,
        catalog_version: &str,
    ) -> Result<Self, ForestError> {
        if trees.is_empty() {
            return Err(ForestError::InvalidTree("forest has no trees".into()));
        }
        for t in &trees {
            t.validate(n_features)?;
        }
        Ok(TrainedForest {
            format: MODEL_FORMAT.to_string(),
            catalog_version: catalog_version.to_string(),
            n_features,
            params,
            trees,
        })
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let f: TrainedForest = serde_json::from_str(s).map_err(|e| ForestError::Format(e.to_string()))?;
        if f.format != MODEL_FORMAT {
            return Err(ForestError::Format(format!("unsupported model format {:?}", f.format)));
        }
        TrainedForest::from_trees(f.trees, f.n_features, f.params, &f.catalog_version)
    }

    pub fn check_catalog(&self, data_version: &str) -> Result<(), ForestError> {
        if self.catalog_version != data_version {
            return Err(ForestError::CatalogMismatch {
                model: self.catalog_version.clone(),
                data: data_version.to_string(),
            });
        }
        Ok(())
    }

    /// Mean decrease in Gini impurity per feature, normalized to sum 1.
    /// A forest without splits yields the uniform vector.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            for (acc, v) in total.iter_mut().zip(t.impurity_decrease(self.n_features)) {
                *acc += v;
            }
        }
        let sum: f64 = total.iter().sum();
        if sum <= 0.0 {
            return vec![1.0 / self.n_features as f64; self.n_features];
        }
        total.iter().map(|v| v / sum).collect()
    }
}

impl Classifier for TrainedForest {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::LengthMismatch { expected: self.n_features, got: x.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    fn to_json(&self) -> Result<String, ForestError> {
        serde_json::to_string(self).map_err(|e| ForestError::Format(e.to_string()))
    }
}

impl Learner for ForestParams {
    type Model = TrainedForest;

    fn fit(&self, samples: &[&LabeledSample]) -> Result<TrainedForest, ForestError> {
        train(samples, self)
    }
}

/// Trains on catalog feature vectors.
pub fn train(samples: &[&LabeledSample], params: &ForestParams) -> Result<TrainedForest, ForestError> {
    let names: Vec<String> = catalog().iter().map(|s| s.name.to_string()).collect();
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.values()).collect();
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let ids = |i: usize| format!("{}@{}", samples[i].dimm, samples[i].ts);
    fit_matrix(&rows, &labels, FEATURE_COUNT, params, CATALOG_VERSION, &ids, &|j| names[j].clone())
}

/// Trains on an arbitrary row-major matrix; `catalog_version` is recorded
/// in the model as given.
pub fn train_matrix(
    rows: &[&[f64]],
    labels: &[u8],
    params: &ForestParams,
    catalog_version: &str,
) -> Result<TrainedForest, ForestError> {
    let d = rows.first().map_or(0, |r| r.len());
    fit_matrix(rows, labels, d, params, catalog_version, &|i| format!("row {i}"), &|j| format!("column {j}"))
}

fn fit_matrix(
    rows: &[&[f64]],
    labels: &[u8],
    d: usize,
    params: &ForestParams,
    catalog_version: &str,
    sample_name: &dyn Fn(usize) -> String,
    feature_name: &dyn Fn(usize) -> String,
) -> Result<TrainedForest, ForestError> {
    params.validate()?;
    if rows.len() != labels.len() {
        return Err(ForestError::BadParams(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.iter().filter(|&&l| l == 0).count();
    if n0 + n1 != labels.len() {
        return Err(ForestError::BadParams("labels must be 0 or 1".into()));
    }
    if n0 == 0 || n1 == 0 {
        return Err(ForestError::SingleClass { n0, n1 });
    }
    if d == 0 {
        return Err(ForestError::BadParams("feature vectors are empty".into()));
    }
    let mut columns = vec![Vec::with_capacity(rows.len()); d];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(ForestError::LengthMismatch { expected: d, got: row.len() });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(ForestError::NonFinite { sample: sample_name(i), feature: feature_name(j) });
            }
            columns[j].push(v);
        }
    }
    let data = Columns::new(columns, labels.to_vec());
    let k = params.candidates(d);
    let trees: Vec<DecisionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            TreeBuilder { data: &data, params, k, rng }.build()
        })
        .collect();
    TrainedForest::from_trees(trees, d, params.clone(), catalog_version)
}

/// Training matrix with each value replaced by its rank among the
/// feature's distinct values.
struct Columns {
    ranks: Vec<Vec<u32>>,
    distinct: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Columns {
    fn new(columns: Vec<Vec<f64>>, labels: Vec<u8>) -> Self {
        let mut ranks = Vec::with_capacity(columns.len());
        let mut distinct = Vec::with_capacity(columns.len());
        for col in columns {
            let mut vals = col.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            ranks.push(col.iter().map(|v| vals.partition_point(|x| x < v) as u32).collect());
            distinct.push(vals);
        }
        Columns { ranks, distinct, labels }
    }
}

struct Best {
    feature: usize,
    /// Largest rank sent left.
    rank: u32,
    threshold: f64,
    score: f64,
}

struct TreeBuilder<'a> {
    data: &'a Columns,
    params: &'a ForestParams,
    k: usize,
    rng: ChaCha8Rng,
}

/// Per-node scratch space.
#[derive(Default)]
struct Scratch {
    hist: Vec<[u32; 2]>,
    items: Vec<(u32, [u32; 2])>,
    runs: Vec<(u32, [u32; 2])>,
}

impl TreeBuilder<'_> {
    fn build(mut self) -> DecisionTree {
        let n = self.data.labels.len();
        let mut weight = vec![0u32; n];
        for _ in 0..n {
            weight[self.rng.random_range(0..n)] += 1;
        }
        // in-bag samples with their bootstrap multiplicity
        let mut idx: Vec<(u32, u32)> =
            (0..n).filter(|&i| weight[i] > 0).map(|i| (i as u32, weight[i])).collect();
        drop(weight);

        let d = self.data.ranks.len();
        let mut features: Vec<usize> = (0..d).collect();
        let mut scratch = Scratch::default();
        let mut nodes = vec![Node::Leaf { counts: [0, 0] }];
        let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
        while let Some((node, start, end, depth)) = stack.pop() {
            let slice = &mut idx[start..end];
            let mut counts = [0u32; 2];
            for &(i, w) in slice.iter() {
                counts[self.data.labels[i as usize] as usize] += w;
            }
            let total = counts[0] + counts[1];
            let stop = counts[0] == 0
                || counts[1] == 0
                || (total as usize) < self.params.min_samples_split
                || self.params.max_depth.is_some_and(|m| depth >= m);
            let best = if stop { None } else { self.best_split(slice, counts, &mut features, &mut scratch) };
            let Some(best) = best else {
                nodes[node] = Node::Leaf { counts };
                continue;
            };
            let ranks = &self.data.ranks[best.feature];
            let mut mid = 0;
            for j in 0..slice.len() {
                if ranks[slice[j].0 as usize] <= best.rank {
                    slice.swap(mid, j);
                    mid += 1;
                }
            }
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { counts: [0, 0] });
            nodes.push(Node::Leaf { counts: [0, 0] });
            nodes[node] = Node::Split { feature: best.feature, threshold: best.threshold, left, right, counts };
            stack.push((right, start + mid, end, depth + 1));
            stack.push((left, start, start + mid, depth + 1));
        }
        DecisionTree { nodes }
    }

    /// Visits features in random order until `k` non-constant ones have
    /// been scored; constant features do not count toward `k`.
    fn best_split(
        &mut self,
        slice: &[(u32, u32)],
        counts: [u32; 2],
        features: &mut [usize],
        s: &mut Scratch,
    ) -> Option<Best> {
        features.shuffle(&mut self.rng);
        let labels = &self.data.labels;
        let mut best: Option<Best> = None;
        let mut scored = 0;
        for &f in features.iter() {
            if scored == self.k {
                break;
            }
            let ranks = &self.data.ranks[f];
            let vals = &self.data.distinct[f];
            if vals.len() < 2 {
                continue;
            }
            // class weights per distinct value, ascending
            s.runs.clear();
            if vals.len() <= 2 * slice.len() {
                s.hist.clear();
                s.hist.resize(vals.len(), [0, 0]);
                for &(i, w) in slice {
                    s.hist[ranks[i as usize] as usize][labels[i as usize] as usize] += w;
                }
                s.runs.extend(
                    s.hist.iter().enumerate().filter(|(_, c)| c[0] + c[1] > 0).map(|(r, c)| (r as u32, *c)),
                );
            } else {
                s.items.clear();
                s.items.extend(slice.iter().map(|&(i, w)| {
                    let mut c = [0u32; 2];
                    c[labels[i as usize] as usize] = w;
                    (ranks[i as usize], c)
                }));
                s.items.sort_unstable_by_key(|x| x.0);
                for &(r, c) in &s.items {
                    match s.runs.last_mut() {
                        Some((last, acc)) if *last == r => {
                            acc[0] += c[0];
                            acc[1] += c[1];
                        }
                        _ => s.runs.push((r, c)),
                    }
                }
            }
            if s.runs.len() < 2 {
                continue;
            }
            scored += 1;
            let (t0, t1) = (counts[0] as f64, counts[1] as f64);
            let (mut l0, mut l1) = (0.0f64, 0.0f64);
            for pair in s.runs.windows(2) {
                let (ra, ca) = pair[0];
                l0 += ca[0] as f64;
                l1 += ca[1] as f64;
                let (r0, r1) = (t0 - l0, t1 - l1);
                // maximizing this minimizes the weighted child Gini impurity
                let score = (l0 * l0 + l1 * l1) / (l0 + l1) + (r0 * r0 + r1 * r1) / (r0 + r1);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let (a, b) = (vals[ra as usize], vals[pair[1].0 as usize]);
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Best { feature: f, rank: ra, threshold, score });
                }
            }
        }
        best
    }
}

/// DIMM-level verdict from chronological per-CE probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimmVerdict {
    pub fail: bool,
    pub first_alarm_ts: Option<i64>,
    pub max_proba: f64,
}

/// Alarms at the first CE whose probability reaches `threshold`.
pub fn predict_dimm<'a, C, I>(model: &C, rows: I, threshold: f64) -> Result<DimmVerdict, ForestError>
where
    C: Classifier + ?Sized,
    I: IntoIterator<Item = (i64, &'a [f64])>,
{
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ForestError::BadParams(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let mut verdict = DimmVerdict { fail: false, first_alarm_ts: None, max_proba: 0.0 };
    for (ts, x) in rows {
        let p = model.predict_proba(x)?;
        verdict.max_proba = verdict.max_proba.max(p);
        if p >= threshold && !verdict.fail {
            verdict.fail = true;
            verdict.first_alarm_ts = Some(ts);
        }
    }
    Ok(verdict)
}
