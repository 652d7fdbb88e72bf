//! Binary decision tree on numeric features: gain-ratio threshold splits,
//! Laplace-smoothed leaves, stratified k-fold cross-validation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;

/// Version tag written into every serialized model.
pub const MODEL_FORMAT: &str = "epiprep-tree/1";
pub const DEFAULT_MIN_LEAF: usize = 8;

const GAIN_EPS: f64 = 1e-12;
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DtreeError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("row has {got} values, schema has {expected}")]
    RaggedRow { expected: usize, got: usize },
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("cannot split {rows} rows into {k} folds")]
    FoldError { k: usize, rows: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelSchemaError {
    #[error("model schema {found:?} does not match expected {expected:?}")]
    Schema { expected: Vec<String>, found: Vec<String> },
    #[error("input vector has {got} values, model expects {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelLoadError {
    #[error("unsupported model format {0:?}")]
    Version(String),
    #[error("malformed model: {0}")]
    Structure(&'static str),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub schema: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl LabeledDataset {
    pub fn new(schema: &[&str]) -> Self {
        Self {
            schema: schema.iter().map(|s| String::from(*s)).collect(),
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>, label: bool) -> Result<(), DtreeError> {
        if row.len() != self.schema.len() {
            return Err(DtreeError::RaggedRow { expected: self.schema.len(), got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DtreeError::NonFinite(self.rows.len()));
        }
        self.rows.push(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn extend(&mut self, other: &LabeledDataset) -> Result<(), DtreeError> {
        for (r, &l) in other.rows.iter().zip(&other.labels) {
            self.push(r.clone(), l)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn validate(&self) -> Result<(), DtreeError> {
        if self.rows.is_empty() {
            return Err(DtreeError::EmptyDataset);
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != self.schema.len() {
                return Err(DtreeError::RaggedRow { expected: self.schema.len(), got: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(DtreeError::NonFinite(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Smallest number of rows either child of a split may hold.
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { min_leaf: DEFAULT_MIN_LEAF, max_depth: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `v[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { inliers: u32, total: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub format: String,
    pub schema: Vec<String>,
    /// Root first; children always come after their parent.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn from_parts(schema: Vec<String>, nodes: Vec<Node>) -> Self {
        Self { format: String::from(MODEL_FORMAT), schema, nodes }
    }

    /// Checks the version tag and the node structure of a deserialized model.
    pub fn validate(&self) -> Result<(), ModelLoadError> {
        if self.format != MODEL_FORMAT {
            return Err(ModelLoadError::Version(self.format.clone()));
        }
        if self.nodes.is_empty() {
            return Err(ModelLoadError::Structure("no nodes"));
        }
        if self.schema.is_empty() {
            return Err(ModelLoadError::Structure("empty schema"));
        }
        let mut parents = alloc::vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split { feature, threshold, left, right } => {
                    if feature >= self.schema.len() {
                        return Err(ModelLoadError::Structure("split feature out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(ModelLoadError::Structure("non-finite threshold"));
                    }
                    for c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(ModelLoadError::Structure("bad child index"));
                        }
                        parents[c] += 1;
                    }
                }
                Node::Leaf { inliers, total } => {
                    if total == 0 || inliers > total {
                        return Err(ModelLoadError::Structure("bad leaf counts"));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(ModelLoadError::Structure("nodes do not form a tree"));
        }
        Ok(())
    }

    pub fn check_schema(&self, expected: &[&str]) -> Result<(), ModelSchemaError> {
        if self.schema.len() == expected.len() && self.schema.iter().zip(expected).all(|(a, b)| a == b) {
            Ok(())
        } else {
            Err(ModelSchemaError::Schema {
                expected: expected.iter().map(|s| String::from(*s)).collect(),
                found: self.schema.clone(),
            })
        }
    }

    /// Index of the leaf `v` lands in.
    pub fn leaf_index(&self, v: &[f64]) -> Result<usize, ModelSchemaError> {
        if v.len() != self.schema.len() {
            return Err(ModelSchemaError::Length { expected: self.schema.len(), got: v.len() });
        }
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if v[feature] <= threshold { left } else { right };
                }
                Node::Leaf { .. } => return Ok(i),
            }
        }
    }

    /// `(inliers + 1) / (total + 2)` of the leaf `v` lands in.
    pub fn predict_proba(&self, v: &[f64]) -> Result<f64, ModelSchemaError> {
        match self.nodes[self.leaf_index(v)?] {
            Node::Leaf { inliers, total } => Ok(f64::from(inliers + 1) / f64::from(total + 2)),
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Binary entropy in bits of `pos` out of `n`.
fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p))
}

/// Gain ratio of splitting `(pos, n)` into a left part `(lpos, nl)`, or
/// `None` when the information gain is not positive.
fn gain_ratio(pos: usize, n: usize, lpos: usize, nl: usize) -> Option<f64> {
    let nr = n - nl;
    let rpos = pos - lpos;
    let wl = nl as f64 / n as f64;
    let wr = nr as f64 / n as f64;
    let gain = entropy(pos, n) - wl * entropy(lpos, nl) - wr * entropy(rpos, nr);
    if gain <= GAIN_EPS {
        return None;
    }
    Some(gain / entropy(nl, n))
}

/// A split point strictly below `b` and not below `a`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

fn beats(candidate: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => candidate > b + TIE_EPS * b.abs().max(1.0),
    }
}

struct Builder<'a> {
    data: &'a LabeledDataset,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, pos: usize, n: usize) -> usize {
        self.nodes.push(Node::Leaf { inliers: pos as u32, total: n as u32 });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize], pos: usize) -> Option<(usize, f64)> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
        for f in 0..self.data.schema.len() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.data.rows[r][f], self.data.labels[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut lpos = 0;
            for i in 0..n - 1 {
                if sorted[i].1 {
                    lpos += 1;
                }
                let nl = i + 1;
                if sorted[i].0 == sorted[i + 1].0 || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                if let Some(ratio) = gain_ratio(pos, n, lpos, nl) {
                    if beats(ratio, best.map(|b| b.0)) {
                        best = Some((ratio, f, midpoint(sorted[i].0, sorted[i + 1].0)));
                    }
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.data.labels[r]).count();
        if pos == 0 || pos == n || self.params.max_depth.is_some_and(|d| depth >= d) {
            return self.leaf(pos, n);
        }
        let Some((feature, threshold)) = self.best_split(&rows, pos) else {
            return self.leaf(pos, n);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.data.rows[i][feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Greedy top-down induction. Among candidate splits the highest gain ratio
/// wins; near-ties keep the earlier feature and the lower threshold.
pub fn train_tree(data: &LabeledDataset, params: &TreeParams) -> Result<TreeModel, DtreeError> {
    data.validate()?;
    let mut b = Builder { data, params: *params, nodes: Vec::new() };
    b.build((0..data.len()).collect(), 0);
    Ok(TreeModel::from_parts(data.schema.clone(), b.nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub folds: usize,
    pub rows: usize,
}

/// Assigns every row to one of `k` folds, spreading each class evenly.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>, DtreeError> {
    if k < 2 || k > labels.len() {
        return Err(DtreeError::FoldError { k, rows: labels.len() });
    }
    let mut rng = seed::rng(seed, "cv-folds");
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = alloc::vec![0; labels.len()];
    for (j, &i) in pos.iter().chain(neg.iter()).enumerate() {
        fold[i] = j % k;
    }
    Ok(fold)
}

/// k-fold cross-validation with a 0.5 decision threshold on held-out rows.
pub fn cross_validate(data: &LabeledDataset, k: usize, seed: u64, params: &TreeParams) -> Result<CvMetrics, DtreeError> {
    data.validate()?;
    let fold = stratified_folds(&data.labels, k, seed)?;
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for f in 0..k {
        let mut train = LabeledDataset { schema: data.schema.clone(), ..Default::default() };
        for i in (0..data.len()).filter(|&i| fold[i] != f) {
            train.rows.push(data.rows[i].clone());
            train.labels.push(data.labels[i]);
        }
        let model = train_tree(&train, params)?;
        for i in (0..data.len()).filter(|&i| fold[i] == f) {
            let p = model.predict_proba(&data.rows[i]).expect("row length checked");
            match (p > 0.5, data.labels[i]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fneg += 1,
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(CvMetrics {
        accuracy: ratio(tp + tn, data.len()),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
        folds: k,
        rows: data.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ds(rows: &[(&[f64], bool)]) -> LabeledDataset {
        let nf = rows[0].0.len();
        let names = ["a", "b", "c", "d"];
        let mut d = LabeledDataset::new(&names[..nf]);
        for (r, l) in rows {
            d.push(r.to_vec(), *l).unwrap();
        }
        d
    }

    #[test]
    fn separable_single_feature() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let v = i as f64 / 40.0;
            rows.push((vec![v], false));
            rows.push((vec![0.6 + v], true));
        }
        let mut d = LabeledDataset::new(&["x"]);
        for (r, l) in rows {
            d.push(r, l).unwrap();
        }
        let m = train_tree(&d, &TreeParams::default()).unwrap();
        assert_eq!(m.depth(), 1);
        match m.nodes[0] {
            Node::Split { threshold, .. } => assert!(threshold > 19.0 / 40.0 && threshold < 0.6),
            _ => panic!("expected split"),
        }
        assert!((m.predict_proba(&[0.9]).unwrap() - 21.0 / 22.0).abs() < 1e-15);
    }

    #[test]
    fn uninformative_feature_gives_leaf() {
        let d = ds(&[
            (&[1.0], true),
            (&[1.0], false),
            (&[2.0], true),
            (&[2.0], false),
        ]);
        let m = train_tree(&d, &TreeParams { min_leaf: 1, max_depth: None }).unwrap();
        assert_eq!(m.nodes.len(), 1);
    }

    #[test]
    fn single_class_is_one_leaf() {
        let d = ds(&[(&[1.0], true), (&[3.0], true)]);
        let m = train_tree(&d, &TreeParams::default()).unwrap();
        assert_eq!(m.nodes, vec![Node::Leaf { inliers: 2, total: 2 }]);
    }

    #[test]
    fn laplace_values() {
        let m = TreeModel::from_parts(vec!["x".into()], vec![Node::Leaf { inliers: 4102, total: 31352 }]);
        assert!((m.predict_proba(&[0.0]).unwrap() - 0.1308604962684187).abs() < 1e-15);
        let m = TreeModel::from_parts(vec!["x".into()], vec![Node::Leaf { inliers: 9, total: 9 }]);
        assert!((m.predict_proba(&[0.0]).unwrap() - 10.0 / 11.0).abs() < 1e-15);
    }

    fn three_node() -> TreeModel {
        TreeModel::from_parts(
            vec!["a".into(), "b".into()],
            vec![
                Node::Split { feature: 1, threshold: 0.5, left: 1, right: 2 },
                Node::Leaf { inliers: 1, total: 10 },
                Node::Split { feature: 0, threshold: -2.0, left: 3, right: 4 },
                Node::Leaf { inliers: 5, total: 6 },
                Node::Leaf { inliers: 0, total: 3 },
            ],
        )
    }

    #[test]
    fn manual_trace() {
        let m = three_node();
        m.validate().unwrap();
        assert_eq!(m.leaf_index(&[9.0, 0.5]).unwrap(), 1);
        assert_eq!(m.leaf_index(&[-2.0, 0.6]).unwrap(), 3);
        assert_eq!(m.leaf_index(&[-1.9, 0.6]).unwrap(), 4);
        assert!((m.predict_proba(&[-3.0, 1.0]).unwrap() - 6.0 / 8.0).abs() < 1e-15);
        assert!(m.predict_proba(&[0.0]).is_err());
    }

    #[test]
    fn validate_catches_bad_models() {
        let mut m = three_node();
        m.format = "other/9".into();
        assert!(matches!(m.validate(), Err(ModelLoadError::Version(_))));
        let mut m = three_node();
        m.nodes[2] = Node::Split { feature: 0, threshold: 0.0, left: 1, right: 4 };
        assert!(m.validate().is_err());
        let mut m = three_node();
        m.nodes[1] = Node::Leaf { inliers: 0, total: 0 };
        assert!(m.validate().is_err());
    }

    #[test]
    fn schema_check() {
        let m = three_node();
        assert!(m.check_schema(&["a", "b"]).is_ok());
        assert!(m.check_schema(&["b", "a"]).is_err());
    }

    #[test]
    fn folds() {
        assert!(matches!(stratified_folds(&[true, false], 3, 0), Err(DtreeError::FoldError { k: 3, rows: 2 })));
        let labels: Vec<bool> = (0..100).map(|i| i % 4 == 0).collect();
        let f = stratified_folds(&labels, 10, 5).unwrap();
        for k in 0..10 {
            let pos = (0..100).filter(|&i| f[i] == k && labels[i]).count();
            let all = (0..100).filter(|&i| f[i] == k).count();
            assert_eq!((pos, all), (if k < 5 { 3 } else { 2 }, 10));
        }
        assert_eq!(f, stratified_folds(&labels, 10, 5).unwrap());
    }

    #[test]
    fn cv_separable_is_perfect() {
        let mut d = LabeledDataset::new(&["x"]);
        for i in 0..60 {
            d.push(vec![i as f64], i >= 30).unwrap();
        }
        let a = cross_validate(&d, 10, 1, &TreeParams::default()).unwrap();
        assert_eq!(a.accuracy, 1.0);
        assert_eq!(a, cross_validate(&d, 10, 1, &TreeParams::default()).unwrap());
    }

    /// Independent trainer: for every feature and every midpoint between
    /// distinct values, recount both sides from scratch.
    fn oracle(data: &LabeledDataset, rows: &[usize], min_leaf: usize, out: &mut Vec<Node>) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| data.labels[r]).count();
        let h = |p: usize, t: usize| -> f64 {
            if p == 0 || p == t {
                0.0
            } else {
                let q = p as f64 / t as f64;
                -(q * q.ln() + (1.0 - q) * (1.0 - q).ln()) / core::f64::consts::LN_2
            }
        };
        let mut best: Option<(f64, usize, f64)> = None;
        if pos != 0 && pos != n {
            for f in 0..data.schema.len() {
                let mut vals: Vec<f64> = rows.iter().map(|&r| data.rows[r][f]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                for w in vals.windows(2) {
                    let t = midpoint(w[0], w[1]);
                    let left: Vec<usize> = rows.iter().copied().filter(|&r| data.rows[r][f] <= t).collect();
                    let nl = left.len();
                    if nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let lp = left.iter().filter(|&&r| data.labels[r]).count();
                    let gain = h(pos, n) - nl as f64 / n as f64 * h(lp, nl) - (n - nl) as f64 / n as f64 * h(pos - lp, n - nl);
                    if gain <= 1e-12 {
                        continue;
                    }
                    let ratio = gain / h(nl, n);
                    if best.is_none_or(|b| ratio > b.0 + 1e-12 * b.0.abs().max(1.0)) {
                        best = Some((ratio, f, t));
                    }
                }
            }
        }
        let me = out.len();
        match best {
            None => {
                out.push(Node::Leaf { inliers: pos as u32, total: n as u32 });
            }
            Some((_, f, t)) => {
                out.push(Node::Leaf { inliers: 0, total: 1 });
                let l: Vec<usize> = rows.iter().copied().filter(|&r| data.rows[r][f] <= t).collect();
                let r: Vec<usize> = rows.iter().copied().filter(|&r| data.rows[r][f] > t).collect();
                let left = oracle(data, &l, min_leaf, out);
                let right = oracle(data, &r, min_leaf, out);
                out[me] = Node::Split { feature: f, threshold: t, left, right };
            }
        }
        me
    }

    fn small_dataset() -> impl Strategy<Value = (LabeledDataset, usize)> {
        (1usize..=3, 1usize..=20, 1usize..=4).prop_flat_map(|(nf, n, min_leaf)| {
            (
                proptest::collection::vec((proptest::collection::vec(0u8..6, nf), any::<bool>()), n),
                Just(min_leaf),
            )
                .prop_map(move |(rows, min_leaf)| {
                    let names = ["a", "b", "c"];
                    let mut d = LabeledDataset::new(&names[..nf]);
                    for (r, l) in rows {
                        d.push(r.into_iter().map(|v| f64::from(v) * 0.25).collect(), l).unwrap();
                    }
                    (d, min_leaf)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

        #[test]
        fn matches_exhaustive_trainer((d, min_leaf) in small_dataset()) {
            let m = train_tree(&d, &TreeParams { min_leaf, max_depth: None }).unwrap();
            let mut nodes = Vec::new();
            oracle(&d, &(0..d.len()).collect::<Vec<_>>(), min_leaf, &mut nodes);
            prop_assert_eq!(&m.nodes, &nodes);
            m.validate().unwrap();
        }

        #[test]
        fn row_order_does_not_matter((d, min_leaf) in small_dataset(), seed in any::<u64>()) {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.shuffle(&mut seed::rng(seed, "perm"));
            let mut p = LabeledDataset { schema: d.schema.clone(), ..Default::default() };
            for &i in &idx {
                p.push(d.rows[i].clone(), d.labels[i]).unwrap();
            }
            let params = TreeParams { min_leaf, max_depth: None };
            prop_assert_eq!(train_tree(&d, &params).unwrap().nodes, train_tree(&p, &params).unwrap().nodes);
        }

        #[test]
        fn probabilities_strictly_inside((d, min_leaf) in small_dataset()) {
            let m = train_tree(&d, &TreeParams { min_leaf, max_depth: None }).unwrap();
            for r in &d.rows {
                let p = m.predict_proba(r).unwrap();
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }

        #[test]
        fn monotone_rescaling_keeps_predictions((d, min_leaf) in small_dataset()) {
            let params = TreeParams { min_leaf, max_depth: None };
            let m = train_tree(&d, &params).unwrap();
            let warp = |v: f64| libm::exp(v) * 3.0 - 1.0;
            let mut w = d.clone();
            for r in w.rows.iter_mut() {
                r[0] = warp(r[0]);
            }
            let mw = train_tree(&w, &params).unwrap();
            for (r, rw) in d.rows.iter().zip(&w.rows) {
                prop_assert_eq!(m.predict_proba(r).unwrap(), mw.predict_proba(rw).unwrap());
            }
        }
    }
}
