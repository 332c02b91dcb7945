//! Gradient-boosted regression trees on the four fusion features.
//!
//! Squared-error boosting: each round fits a depth-limited tree to the
//! current residuals with exact greedy variance-reduction splits, leaves
//! hold the mean residual, and the ensemble adds `shrinkage * tree(x)`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateFeatures, RerankError};

pub const FEATURE_NAMES: [&str; 4] = ["retriever_raw", "qa_raw", "retriever_z", "qa_z"];
const MODEL_FORMAT: &str = "manualqa-gbrt";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    /// Only used to break ties between equally good splits.
    pub seed: u64,
}

impl Default for GbrtParams {
    fn default() -> Self {
        Self { rounds: 100, max_depth: 3, shrinkage: 0.1, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel {
    format: String,
    version: u32,
    pub features: Vec<String>,
    pub base_score: f64,
    pub shrinkage: f64,
    pub rounds: usize,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
}

struct Fitter<'a> {
    x: &'a [[f64; 4]],
    residual: &'a [f64],
    max_depth: usize,
    rng: &'a mut ChaCha8Rng,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
}

impl Fitter<'_> {
    fn fit(&mut self, rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.grow(rows, 0, &mut nodes);
        Tree { nodes }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let mean = rows.iter().map(|&i| self.residual[i]).sum::<f64>() / rows.len() as f64;
        nodes.push(Node::Leaf { value: mean });
        if depth >= self.max_depth || rows.len() < 2 {
            return id;
        }
        let Some(split) = self.best_split(&rows) else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, nodes);
        let right = self.grow(r, depth + 1, nodes);
        nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }

    /// Exact greedy search over every feature and every gap between distinct
    /// sorted values. Gain is the reduction in residual sum of squares.
    fn best_split(&mut self, rows: &[usize]) -> Option<SplitChoice> {
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let parent = total * total / n;
        let mut best_gain = 0.0;
        let mut ties: Vec<SplitChoice> = Vec::new();

        let mut order = rows.to_vec();
        for feature in 0..4 {
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 1..order.len() {
                left_sum += self.residual[order[k - 1]];
                let lo = self.x[order[k - 1]][feature];
                let hi = self.x[order[k]][feature];
                if lo == hi {
                    continue;
                }
                let nl = k as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                let tol = 1e-12 * best_gain;
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                if gain > best_gain + tol {
                    best_gain = gain;
                    ties.clear();
                    ties.push(SplitChoice { feature, threshold });
                } else if !ties.is_empty() && gain >= best_gain - tol {
                    ties.push(SplitChoice { feature, threshold });
                }
            }
        }
        if ties.is_empty() || best_gain <= 1e-15 {
            return None;
        }
        let pick = if ties.len() == 1 { 0 } else { *(0..ties.len()).collect::<Vec<_>>().choose(self.rng)? };
        Some(ties.swap_remove(pick))
    }
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

impl GbrtModel {
    /// Fit on `(features, label)` rows with binary labels.
    pub fn train(rows: &[(CandidateFeatures, f64)], params: &GbrtParams) -> Result<Self, RerankError> {
        Self::train_with_history(rows, params).map(|(m, _)| m)
    }

    /// Like [`GbrtModel::train`], also returning the training MSE before the
    /// first round and after every round (`rounds + 1` values).
    pub fn train_with_history(
        rows: &[(CandidateFeatures, f64)],
        params: &GbrtParams,
    ) -> Result<(Self, Vec<f64>), RerankError> {
        if rows.is_empty() {
            return Err(RerankError::Empty);
        }
        if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
            return Err(RerankError::Model(format!("shrinkage {} outside (0, 1]", params.shrinkage)));
        }
        let mut x = Vec::with_capacity(rows.len());
        let mut y = Vec::with_capacity(rows.len());
        for (row, (f, label)) in rows.iter().enumerate() {
            let v = f.to_array();
            if let Some(k) = v.iter().position(|a| !a.is_finite()) {
                return Err(RerankError::NonFinite { row, feature: FEATURE_NAMES[k] });
            }
            if *label != 0.0 && *label != 1.0 {
                return Err(RerankError::Label { row, label: *label });
            }
            x.push(v);
            y.push(*label);
        }

        let base_score = y.iter().sum::<f64>() / y.len() as f64;
        let mut pred = vec![base_score; y.len()];
        let mut history = vec![mse(&y, &pred)];
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut trees = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
            let mut fitter = Fitter { x: &x, residual: &residual, max_depth: params.max_depth, rng: &mut rng };
            let mut tree = fitter.fit((0..y.len()).collect());
            let next: Vec<f64> = pred.iter().zip(&x).map(|(p, xi)| p + params.shrinkage * tree.eval(xi)).collect();
            let next_mse = mse(&y, &next);
            // a round that cannot lower the loss (rounding at convergence)
            // contributes nothing
            if next_mse > *history.last().unwrap() {
                tree = Tree::leaf(0.0);
            } else {
                pred = next;
            }
            history.push(mse(&y, &pred));
            trees.push(tree);
        }

        Ok((
            Self {
                format: MODEL_FORMAT.into(),
                version: MODEL_VERSION,
                features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
                base_score,
                shrinkage: params.shrinkage,
                rounds: params.rounds,
                max_depth: params.max_depth,
                trees,
            },
            history,
        ))
    }

    pub fn predict(&self, f: &CandidateFeatures) -> Result<f64, RerankError> {
        let x = f.to_array();
        if let Some(k) = x.iter().position(|a| !a.is_finite()) {
            return Err(RerankError::NonFinite { row: 0, feature: FEATURE_NAMES[k] });
        }
        Ok(self.base_score + self.shrinkage * self.trees.iter().map(|t| t.eval(&x)).sum::<f64>())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RerankError> {
        let model: Self = serde_json::from_slice(bytes).map_err(|e| RerankError::Model(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), RerankError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| RerankError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, RerankError> {
        let bytes =
            std::fs::read(path).map_err(|source| RerankError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }

    fn validate(&self) -> Result<(), RerankError> {
        let bad = |m: String| Err(RerankError::Model(m));
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return bad(format!("unsupported model {} v{}", self.format, self.version));
        }
        if self.trees.len() != self.rounds {
            return bad(format!("{} trees for {} rounds", self.trees.len(), self.rounds));
        }
        if !self.base_score.is_finite() || !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return bad("base_score or shrinkage out of range".into());
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return bad(format!("tree {t} is empty"));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match *node {
                    Node::Leaf { value } if !value.is_finite() => return bad(format!("tree {t}: non-finite leaf")),
                    Node::Split { feature, threshold, left, right } => {
                        if feature >= 4 || !threshold.is_finite() {
                            return bad(format!("tree {t}: bad split at node {i}"));
                        }
                        // children always follow their parent
                        if left <= i || right <= i || left >= tree.nodes.len() || right >= tree.nodes.len() {
                            return bad(format!("tree {t}: bad child index at node {i}"));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
