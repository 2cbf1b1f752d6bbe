//! Second-order gradient-boosted decision trees for binary classification
//! under logistic loss, with exact greedy split enumeration.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub max_depth: usize,
    #[serde(with = "f64_17")]
    pub learning_rate: f64,
    pub n_estimators: usize,
    #[serde(with = "f64_17")]
    pub gamma: f64,
    #[serde(with = "f64_17")]
    pub lambda: f64,
    #[serde(with = "f64_17")]
    pub min_child_weight: f64,
    #[serde(with = "f64_17")]
    pub base_score: f64,
    /// Reserved for row/column subsampling, which is not implemented.
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            learning_rate: 0.3,
            n_estimators: 100,
            gamma: 0.0,
            lambda: 1.0,
            min_child_weight: 1.0,
            base_score: 0.5,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must be in (0, 1], got {}", self.learning_rate));
        }
        if self.n_estimators == 0 {
            return bad("n_estimators must be >= 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!("min_child_weight must be >= 0, got {}", self.min_child_weight));
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad(format!("base_score must be in (0, 1), got {}", self.base_score));
        }
        Ok(())
    }

    /// `(max_depth, learning_rate, n_estimators, gamma)` as a display tuple.
    pub fn summary(&self) -> String {
        format!("({}, {}, {}, {})", self.max_depth, self.learning_rate, self.n_estimators, self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Samples with `x[feature] < threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Nodes in breadth-first order; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_weight(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Split { feature, threshold, left, right } => {
                    id = if x[feature] < threshold { left } else { right };
                }
                Node::Leaf { weight } => return weight,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Split feature indices in node order.
    pub fn split_features(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn leaf_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { weight } => Some(*weight),
                Node::Split { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub params: TrainParams,
    pub config_id: String,
    pub n_features: usize,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Mean binary cross-entropy computed from raw margins:
/// `softplus(m) - y * m`, evaluated without forming the probability so that
/// confident samples keep full precision.
pub fn logloss_margins(margins: &[f64], labels: &[u8]) -> f64 {
    let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
    let sum: f64 = margins.iter().zip(labels).map(|(&m, &y)| if y == 1 { softplus(-m) } else { softplus(m) }).sum();
    sum / margins.len() as f64
}

/// Mean binary cross-entropy of probabilities against labels.
pub fn logloss(probs: &[f64], labels: &[u8]) -> f64 {
    const EPS: f64 = 1e-15;
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    sum / probs.len() as f64
}

impl GbdtModel {
    /// Model without trees; predicts `base_score` everywhere.
    pub fn empty(params: TrainParams, config_id: impl Into<String>, n_features: usize) -> Self {
        Self { trees: Vec::new(), params, config_id: config_id.into(), n_features }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::ShapeMismatch(format!("model expects {} features, got {}", self.n_features, x.len())));
        }
        if let Some(column) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row: 0, column });
        }
        Ok(())
    }

    /// Raw log-odds: `logit(base_score)` plus every tree's leaf weight.
    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.margin_unchecked(x))
    }

    fn margin_unchecked(&self, x: &[f64]) -> f64 {
        self.trees.iter().fold(logit(self.params.base_score), |m, t| m + t.leaf_weight(x))
    }

    /// Probability that `x` is blurred.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.predict_margin(x).map(sigmoid)
    }

    /// 1 iff the probability strictly exceeds `threshold`.
    pub fn predict_label(&self, x: &[f64], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? > threshold))
    }

    pub fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelFormat(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Feature matrix stored by column, with each column's sort order.
struct Columns {
    n_rows: usize,
    values: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Columns {
    fn new(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_features = rows[0].len();
        let values: Vec<Vec<f64>> = (0..n_features).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = values
            .par_iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { n_rows, values, order }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenNode {
    id: usize,
    grad: f64,
    hess: f64,
}

const UNASSIGNED: u32 = u32::MAX;

/// Midpoint of two adjacent distinct sorted values, nudged so that
/// `lo < threshold <= hi` holds in floating point.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Split gain `1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

fn validate_training_set(rows: &[Vec<f64>], labels: &[u8]) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} feature rows but {} labels", rows.len(), labels.len())));
    }
    if rows.len() < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 samples, got {}", rows.len())));
    }
    let n = rows[0].len();
    if n == 0 {
        return Err(Error::ShapeMismatch("feature vectors are empty".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::ShapeMismatch(format!("row {i} has {} features, expected {n}", r.len())));
        }
        if let Some(column) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row: i, column });
        }
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidParams(format!("label {bad} is not 0 or 1")));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels(labels[0]));
    }
    Ok(())
}

/// Trains a boosted ensemble on `rows` (one feature vector each) and 0/1 `labels`.
pub fn train(
    rows: &[Vec<f64>],
    labels: &[u8],
    params: &TrainParams,
    config_id: impl Into<String>,
) -> Result<GbdtModel> {
    train_with_history(rows, labels, params, config_id).map(|(m, _)| m)
}

/// Like [`train`], also returning the training logloss before the first round
/// and after every round (`n_estimators + 1` values).
pub fn train_with_history(
    rows: &[Vec<f64>],
    labels: &[u8],
    params: &TrainParams,
    config_id: impl Into<String>,
) -> Result<(GbdtModel, Vec<f64>)> {
    params.validate()?;
    validate_training_set(rows, labels)?;
    let cols = Columns::new(rows);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut margins = vec![logit(params.base_score); cols.n_rows];
    let mut model = GbdtModel::empty(*params, config_id, rows[0].len());

    let mut history = vec![logloss_margins(&margins, labels)];

    for _ in 0..params.n_estimators {
        let (grad, hess): (Vec<f64>, Vec<f64>) = margins
            .iter()
            .zip(&y)
            .map(|(&m, &t)| {
                let p = sigmoid(m);
                (p - t, p * (1.0 - p))
            })
            .unzip();
        let (tree, leaf_of) = grow_tree(&cols, &grad, &hess, params);
        for (m, &leaf) in margins.iter_mut().zip(&leaf_of) {
            if let Node::Leaf { weight } = tree.nodes[leaf] {
                *m += weight;
            }
        }
        model.trees.push(tree);
        history.push(logloss_margins(&margins, labels));
    }
    Ok((model, history))
}

/// Grows one tree level by level. Returns the tree and the leaf id each
/// training row lands in.
fn grow_tree(cols: &Columns, grad: &[f64], hess: &[f64], p: &TrainParams) -> (Tree, Vec<usize>) {
    let n = cols.n_rows;
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut node_of = vec![0usize; n];
    let mut open = vec![OpenNode { id: 0, grad: grad.iter().sum(), hess: hess.iter().sum() }];
    let mut depth = 0;

    while !open.is_empty() {
        let best = if depth < p.max_depth {
            find_splits(cols, grad, hess, &node_of, &open, p)
        } else {
            vec![None; open.len()]
        };

        let mut next = Vec::new();
        let mut child_slot = vec![(0usize, 0usize); open.len()];
        for (slot, (node, cand)) in open.iter().zip(&best).enumerate() {
            match cand {
                Some(c) => {
                    let (left, right) = (nodes.len(), nodes.len() + 1);
                    nodes.push(None);
                    nodes.push(None);
                    nodes[node.id] = Some(Node::Split { feature: c.feature, threshold: c.threshold, left, right });
                    child_slot[slot] = (next.len(), next.len() + 1);
                    next.push(OpenNode { id: left, grad: 0.0, hess: 0.0 });
                    next.push(OpenNode { id: right, grad: 0.0, hess: 0.0 });
                }
                None => {
                    let weight = -node.grad / (node.hess + p.lambda) * p.learning_rate;
                    nodes[node.id] = Some(Node::Leaf { weight });
                }
            }
        }

        if next.is_empty() {
            break;
        }
        let slot_of_id: std::collections::HashMap<usize, usize> =
            open.iter().enumerate().map(|(s, o)| (o.id, s)).collect();
        for i in 0..n {
            let Some(&slot) = slot_of_id.get(&node_of[i]) else { continue };
            if let Some(c) = &best[slot] {
                let (l, r) = child_slot[slot];
                let target = if cols.values[c.feature][i] < c.threshold { l } else { r };
                next[target].grad += grad[i];
                next[target].hess += hess[i];
                node_of[i] = next[target].id;
            }
        }
        open = next;
        depth += 1;
    }

    let nodes = nodes.into_iter().map(|n| n.expect("every allocated node is finalized")).collect();
    (Tree { nodes }, node_of)
}

/// Best split per open node, scanning every feature's sorted order once.
/// Ties keep the lower feature index, then the lower threshold.
fn find_splits(
    cols: &Columns,
    grad: &[f64],
    hess: &[f64],
    node_of: &[usize],
    open: &[OpenNode],
    p: &TrainParams,
) -> Vec<Option<Candidate>> {
    let max_id = open.iter().map(|o| o.id).max().unwrap_or(0);
    let mut slot_of = vec![UNASSIGNED; max_id + 1];
    for (s, o) in open.iter().enumerate() {
        slot_of[o.id] = s as u32;
    }

    let per_feature: Vec<Vec<Option<Candidate>>> = (0..cols.values.len())
        .into_par_iter()
        .map(|f| {
            let col = &cols.values[f];
            let mut gl = vec![0.0; open.len()];
            let mut hl = vec![0.0; open.len()];
            let mut last: Vec<Option<f64>> = vec![None; open.len()];
            let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
            for &i in &cols.order[f] {
                let i = i as usize;
                let node = node_of[i];
                let s = match slot_of.get(node) {
                    Some(&s) if s != UNASSIGNED => s as usize,
                    _ => continue,
                };
                let x = col[i];
                if let Some(prev) = last[s] {
                    if x > prev {
                        let (g, h) = (open[s].grad, open[s].hess);
                        let (gr, hr) = (g - gl[s], h - hl[s]);
                        if hl[s] >= p.min_child_weight && hr >= p.min_child_weight {
                            let gain = split_gain(gl[s], hl[s], gr, hr, p.lambda, p.gamma);
                            if gain > best[s].map_or(0.0, |c| c.gain) {
                                best[s] = Some(Candidate { gain, feature: f, threshold: midpoint(prev, x) });
                            }
                        }
                    }
                }
                gl[s] += grad[i];
                hl[s] += hess[i];
                last[s] = Some(x);
            }
            best
        })
        .collect();

    let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
    for feature_best in per_feature {
        for (b, c) in best.iter_mut().zip(feature_best) {
            if let Some(c) = c {
                if b.is_none_or(|cur| c.gain > cur.gain) {
                    *b = Some(c);
                }
            }
        }
    }
    best
}

// On-disk representation.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    params: TrainParams,
    config_id: String,
    n_features: usize,
    trees: Vec<TreeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64_17")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64_17")]
    leaf: Option<f64>,
}

impl From<&GbdtModel> for ModelDoc {
    fn from(m: &GbdtModel) -> Self {
        let trees = m
            .trees
            .iter()
            .map(|t| TreeDoc {
                nodes: t
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(id, n)| match *n {
                        Node::Split { feature, threshold, left, right } => NodeDoc {
                            id,
                            feature: Some(feature),
                            threshold: Some(threshold),
                            left: Some(left),
                            right: Some(right),
                            leaf: None,
                        },
                        Node::Leaf { weight } => {
                            NodeDoc { id, feature: None, threshold: None, left: None, right: None, leaf: Some(weight) }
                        }
                    })
                    .collect(),
            })
            .collect();
        ModelDoc {
            format_version: FORMAT_VERSION,
            params: m.params,
            config_id: m.config_id.clone(),
            n_features: m.n_features,
            trees,
        }
    }
}

impl TryFrom<ModelDoc> for GbdtModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let bad = |m: String| Error::ModelFormat(m);
        if doc.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format_version {}", doc.format_version)));
        }
        doc.params.validate()?;
        let mut trees = Vec::with_capacity(doc.trees.len());
        for (t, tree) in doc.trees.into_iter().enumerate() {
            let count = tree.nodes.len();
            if count == 0 {
                return Err(bad(format!("tree {t} has no nodes")));
            }
            let mut nodes = Vec::with_capacity(count);
            for (pos, n) in tree.nodes.into_iter().enumerate() {
                if n.id != pos {
                    return Err(bad(format!("tree {t}: node at position {pos} has id {}", n.id)));
                }
                let node = match (n.feature, n.threshold, n.left, n.right, n.leaf) {
                    (Some(feature), Some(threshold), Some(left), Some(right), None) => {
                        if feature >= doc.n_features {
                            return Err(bad(format!("tree {t}: feature {feature} out of range")));
                        }
                        // Children after their parent rules out cycles.
                        if left <= pos || right <= pos || left >= count || right >= count || left == right {
                            return Err(bad(format!("tree {t}: node {pos} has invalid children")));
                        }
                        if !threshold.is_finite() {
                            return Err(bad(format!("tree {t}: node {pos} threshold is not finite")));
                        }
                        Node::Split { feature, threshold, left, right }
                    }
                    (None, None, None, None, Some(weight)) if weight.is_finite() => Node::Leaf { weight },
                    _ => return Err(bad(format!("tree {t}: node {pos} is neither a split nor a leaf"))),
                };
                nodes.push(node);
            }
            let mut parents = vec![0u32; count];
            for n in &nodes {
                if let Node::Split { left, right, .. } = n {
                    parents[*left] += 1;
                    parents[*right] += 1;
                }
            }
            if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
                return Err(bad(format!("tree {t} is not a well-formed binary tree")));
            }
            trees.push(Tree { nodes });
        }
        Ok(GbdtModel { trees, params: doc.params, config_id: doc.config_id, n_features: doc.n_features })
    }
}

/// Serializes `f64` as a JSON number with 17 significant digits.
mod f64_17 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::str::FromStr;

    pub fn to_number(v: f64) -> serde_json::Number {
        serde_json::Number::from_str(&format!("{v:.16e}")).expect("finite float formats as a JSON number")
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if !v.is_finite() {
            return Err(serde::ser::Error::custom("non-finite number"));
        }
        to_number(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}

mod opt_f64_17 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::f64_17::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}
