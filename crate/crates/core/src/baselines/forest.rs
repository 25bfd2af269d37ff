//! Random forest classifier: bagged Gini trees over numeric features.
//!
//! Label-encoded categoricals enter as ordinal values and are split by
//! threshold like any other column. Every tree draws its own RNG stream from
//! the run seed, so parallel and sequential training produce identical
//! forests.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::cv::{fold_split, mean_std, stratified_folds, CvCandidate, CvSearchReport};
use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::seed::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0; children referenced by index.
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { prob } => return *prob,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub max_depth: usize,
    pub max_features: usize,
    pub n_trees: usize,
    /// Mean impurity decrease per feature, normalized to sum 1.
    pub feature_importance: Vec<f64>,
}

impl crate::model_io::ModelKind for ForestModel {
    const KIND: &'static str = "random-forest";
    fn dims(&self) -> Vec<usize> {
        vec![self.n_trees, self.feature_importance.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features sampled (without replacement) at each split.
    pub max_features: usize,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    d: usize,
    hyper: ForestHyper,
    nodes: Vec<TreeNode>,
    /// Impurity decrease per feature, weighted by node sample share.
    importance: Vec<f64>,
    n_root: f64,
}

impl TreeBuilder<'_> {
    /// Grow a node over `idx` (bootstrap indices); returns the node index.
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut impl Rng) -> usize {
        let n = idx.len() as f64;
        let pos = idx.iter().filter(|&&i| self.y[i] == 1).count() as f64;
        let prob = pos / n;
        let parent_gini = gini(pos, n);
        if depth >= self.hyper.max_depth || parent_gini == 0.0 || idx.len() < 2 {
            self.nodes.push(TreeNode::Leaf { prob });
            return self.nodes.len() - 1;
        }

        let mut features: Vec<usize> = (0..self.d).collect();
        features.shuffle(rng);
        features.truncate(self.hyper.max_features);

        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        for &f in &features {
            idx.sort_unstable_by(|&a, &b| {
                self.x[a][f].partial_cmp(&self.x[b][f]).unwrap().then(a.cmp(&b))
            });
            let mut pos_left = 0.0;
            for split_at in 1..idx.len() {
                if self.y[idx[split_at - 1]] == 1 {
                    pos_left += 1.0;
                }
                let lo = self.x[idx[split_at - 1]][f];
                let hi = self.x[idx[split_at]][f];
                if lo == hi {
                    continue;
                }
                let n_left = split_at as f64;
                let n_right = n - n_left;
                let gain = parent_gini
                    - (n_left / n) * gini(pos_left, n_left)
                    - (n_right / n) * gini(pos - pos_left, n_right);
                if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }

        let Some((gain, feature, threshold)) = best else {
            self.nodes.push(TreeNode::Leaf { prob });
            return self.nodes.len() - 1;
        };
        self.importance[feature] += (n / self.n_root) * gain;

        let mid = stable_partition(idx, |&i| self.x[i][feature] <= threshold);
        let slot = self.nodes.len();
        // Placeholder until children exist.
        self.nodes.push(TreeNode::Leaf { prob });
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[slot] = TreeNode::Split { feature, threshold, left, right };
        slot
    }
}

/// Stable partition: items satisfying the predicate first; returns the split
/// point. Order within each side follows the input order.
fn stable_partition(idx: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut keep: Vec<usize> = Vec::with_capacity(idx.len());
    let mut rest: Vec<usize> = Vec::new();
    for &i in idx.iter() {
        if pred(&i) {
            keep.push(i);
        } else {
            rest.push(i);
        }
    }
    let mid = keep.len();
    idx[..mid].copy_from_slice(&keep);
    idx[mid..].copy_from_slice(&rest);
    mid
}

fn validate_xy(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() || x[0].is_empty() {
        return Err(Error::validation("empty design matrix"));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::validation("ragged design matrix"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite feature value"));
    }
    if x.len() != y.len() {
        return Err(Error::validation(format!("{} rows vs {} labels", x.len(), y.len())));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    let pos: usize = y.iter().map(|&v| v as usize).sum();
    if pos == 0 || pos == y.len() {
        return Err(Error::validation("labels contain a single class"));
    }
    Ok(d)
}

/// Fit a forest with fixed hyperparameters.
pub fn fit_forest(x: &[Vec<f64>], y: &[u8], hyper: ForestHyper, seed: u64) -> Result<ForestModel> {
    let d = validate_xy(x, y)?;
    if hyper.n_trees == 0 {
        return Err(Error::config("n_trees must be positive"));
    }
    if hyper.max_features == 0 || hyper.max_features > d {
        return Err(Error::config(format!(
            "max_features {} outside [1, {d}]",
            hyper.max_features
        )));
    }
    let n = x.len();
    let built: Vec<(DecisionTree, Vec<f64>)> = (0..hyper.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, &format!("tree-{t}"));
            let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                x,
                y,
                d,
                hyper,
                nodes: Vec::new(),
                importance: vec![0.0; d],
                n_root: n as f64,
            };
            builder.grow(&mut idx, 0, &mut rng);
            (DecisionTree { nodes: builder.nodes }, builder.importance)
        })
        .collect();

    let mut importance = vec![0.0; d];
    let mut trees = Vec::with_capacity(hyper.n_trees);
    for (tree, imp) in built {
        for (a, b) in importance.iter_mut().zip(&imp) {
            *a += b;
        }
        trees.push(tree);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        for v in &mut importance {
            *v /= total;
        }
    }
    Ok(ForestModel {
        trees,
        max_depth: hyper.max_depth,
        max_features: hyper.max_features,
        n_trees: hyper.n_trees,
        feature_importance: importance,
    })
}

/// Mean of per-tree leaf probabilities.
pub fn predict_forest(model: &ForestModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = model.feature_importance.len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::validation(format!("model expects {d} features")));
    }
    Ok(x.iter()
        .map(|row| {
            model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / model.trees.len() as f64
        })
        .collect())
}

/// Random-grid search space for [`train_random_forest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestSearch {
    pub max_depth_choices: Vec<usize>,
    /// Empty means: derive {1, √d, d/3, d} from the data.
    pub max_features_choices: Vec<usize>,
    pub n_candidates: usize,
    pub n_trees: usize,
    pub folds: usize,
}

impl Default for ForestSearch {
    fn default() -> Self {
        Self {
            max_depth_choices: vec![3, 5, 7, 10, 14],
            max_features_choices: Vec::new(),
            n_candidates: 8,
            n_trees: 300,
            folds: 10,
        }
    }
}

/// Random grid search with stratified CV on AUC; winner refit on all rows.
/// Ties prefer the smaller model (shallower, then fewer features per split).
pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[u8],
    search: &ForestSearch,
    seed: u64,
) -> Result<(ForestModel, CvSearchReport)> {
    let d = validate_xy(x, y)?;
    if search.n_candidates == 0 || search.n_trees == 0 {
        return Err(Error::config("n_candidates and n_trees must be positive"));
    }
    if search.max_depth_choices.is_empty() {
        return Err(Error::config("empty max_depth choice list"));
    }
    let mut feat_choices = if search.max_features_choices.is_empty() {
        let mut v = vec![1, (d as f64).sqrt().round() as usize, d / 3, d];
        v.retain(|&f| f >= 1 && f <= d);
        v.sort_unstable();
        v.dedup();
        v
    } else {
        search.max_features_choices.clone()
    };
    feat_choices.retain(|&f| f >= 1 && f <= d);
    if feat_choices.is_empty() {
        return Err(Error::config("no valid max_features choice"));
    }

    let mut grid: Vec<(usize, usize)> = Vec::new();
    for &depth in &search.max_depth_choices {
        for &feat in &feat_choices {
            grid.push((depth, feat));
        }
    }
    let mut rng = stream(seed, "forest-grid");
    grid.shuffle(&mut rng);
    grid.truncate(search.n_candidates);

    let assignment = stratified_folds(y, search.folds, seed)?;
    // auc[candidate][fold], folds parallel inside each candidate's forests
    // already; parallelize over (candidate, fold) pairs instead.
    let pairs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..search.folds).map(move |f| (c, f)))
        .collect();
    let pair_aucs: Vec<f64> = pairs
        .par_iter()
        .map(|&(c, fold)| {
            let (depth, feat) = grid[c];
            let (train_idx, test_idx) = fold_split(&assignment, fold);
            let xt: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
            let xv: Vec<Vec<f64>> = test_idx.iter().map(|&i| x[i].clone()).collect();
            let yv: Vec<u8> = test_idx.iter().map(|&i| y[i]).collect();
            let hyper =
                ForestHyper { n_trees: search.n_trees, max_depth: depth, max_features: feat };
            let model = fit_forest(
                &xt,
                &yt,
                hyper,
                crate::seed::derive_seed(seed, &format!("forest-cv-{c}-{fold}")),
            )?;
            auc(&predict_forest(&model, &xv)?, &yv)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut candidates = Vec::new();
    let mut chosen = 0usize;
    let mut best_key = (f64::NEG_INFINITY, isize::MIN, isize::MIN);
    for (c, &(depth, feat)) in grid.iter().enumerate() {
        let per_fold: Vec<f64> =
            (0..search.folds).map(|f| pair_aucs[c * search.folds + f]).collect();
        let (mean, std) = mean_std(&per_fold);
        let mut params = std::collections::BTreeMap::new();
        params.insert("max_depth".to_string(), depth as f64);
        params.insert("max_features".to_string(), feat as f64);
        candidates.push(CvCandidate { params, mean_auc: mean, std_auc: std });
        let key = (mean, -(depth as isize), -(feat as isize));
        if key > best_key {
            best_key = key;
            chosen = c;
        }
    }

    let (depth, feat) = grid[chosen];
    let model = fit_forest(
        x,
        y,
        ForestHyper { n_trees: search.n_trees, max_depth: depth, max_features: feat },
        crate::seed::derive_seed(seed, "forest-final"),
    )?;
    Ok((model, CvSearchReport { candidates, chosen, folds: search.folds }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic_problem() -> (Vec<Vec<f64>>, Vec<u8>) {
        // y fully determined by x0 > 0.5; x1 is noise.
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut rng = stream(3, "forest-fixture");
        for _ in 0..120 {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            x.push(vec![a, b]);
            y.push(u8::from(a > 0.5));
        }
        (x, y)
    }

    #[test]
    fn pure_leaves_give_perfect_training_auc() {
        let (x, y) = deterministic_problem();
        let hyper = ForestHyper { n_trees: 30, max_depth: 4, max_features: 2 };
        let model = fit_forest(&x, &y, hyper, 1).unwrap();
        let p = predict_forest(&model, &x).unwrap();
        assert_eq!(auc(&p, &y).unwrap(), 1.0);
    }

    #[test]
    fn xor_unlearnable_at_depth_one_learnable_at_two() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..50 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                x.push(vec![a, b]);
                y.push(u8::from((a == 1.0) != (b == 1.0)));
            }
        }
        let stump = fit_forest(
            &x,
            &y,
            ForestHyper { n_trees: 100, max_depth: 1, max_features: 2 },
            7,
        )
        .unwrap();
        let p1 = predict_forest(&stump, &x).unwrap();
        let a1 = auc(&p1, &y).unwrap();
        assert!(a1 < 0.6, "stumps should fail at XOR, got {a1}");
        let deep = fit_forest(
            &x,
            &y,
            ForestHyper { n_trees: 100, max_depth: 2, max_features: 2 },
            7,
        )
        .unwrap();
        let p2 = predict_forest(&deep, &x).unwrap();
        let a2 = auc(&p2, &y).unwrap();
        assert!(a2 > 0.95, "depth 2 should learn XOR, got {a2}");
    }

    #[test]
    fn prediction_is_mean_of_tree_outputs() {
        let (x, y) = deterministic_problem();
        let model = fit_forest(
            &x,
            &y,
            ForestHyper { n_trees: 12, max_depth: 3, max_features: 1 },
            5,
        )
        .unwrap();
        let p = predict_forest(&model, &x).unwrap();
        for (row, &expect) in x.iter().zip(&p) {
            let by_hand: f64 =
                model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / 12.0;
            assert_eq!(by_hand, expect);
        }
    }

    #[test]
    fn depth_cap_and_leaf_range_hold() {
        let (x, y) = deterministic_problem();
        let model = fit_forest(
            &x,
            &y,
            ForestHyper { n_trees: 20, max_depth: 3, max_features: 2 },
            9,
        )
        .unwrap();
        for tree in &model.trees {
            assert!(tree.depth() <= 3);
            for node in &tree.nodes {
                if let TreeNode::Leaf { prob } = node {
                    assert!((0.0..=1.0).contains(prob));
                }
            }
        }
    }

    #[test]
    fn informative_feature_dominates_importance() {
        let (x, y) = deterministic_problem();
        let model = fit_forest(
            &x,
            &y,
            ForestHyper { n_trees: 50, max_depth: 5, max_features: 1 },
            11,
        )
        .unwrap();
        assert!(model.feature_importance[0] > 0.8, "{:?}", model.feature_importance);
        let sum: f64 = model.feature_importance.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_and_parallel_invariant() {
        let (x, y) = deterministic_problem();
        let hyper = ForestHyper { n_trees: 16, max_depth: 4, max_features: 2 };
        let a = fit_forest(&x, &y, hyper, 13).unwrap();
        let b = fit_forest(&x, &y, hyper, 13).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| fit_forest(&x, &y, hyper, 13).unwrap());
        assert_eq!(a, single);
        let c = fit_forest(&x, &y, hyper, 14).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tree_order_does_not_change_predictions() {
        let (x, y) = deterministic_problem();
        let mut model = fit_forest(
            &x,
            &y,
            ForestHyper { n_trees: 10, max_depth: 3, max_features: 2 },
            17,
        )
        .unwrap();
        let before = predict_forest(&model, &x).unwrap();
        model.trees.reverse();
        let after = predict_forest(&model, &x).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn search_reports_and_picks_best_mean() {
        let (x, y) = deterministic_problem();
        let search = ForestSearch {
            max_depth_choices: vec![1, 4],
            max_features_choices: vec![1, 2],
            n_candidates: 4,
            n_trees: 15,
            folds: 3,
        };
        let (model, report) = train_random_forest(&x, &y, &search, 21).unwrap();
        assert_eq!(report.candidates.len(), 4);
        let best = report
            .candidates
            .iter()
            .map(|c| c.mean_auc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.chosen_candidate().mean_auc, best);
        assert_eq!(model.max_depth, report.chosen_candidate().params["max_depth"] as usize);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let hyper = ForestHyper { n_trees: 5, max_depth: 2, max_features: 1 };
        assert!(fit_forest(&x, &[1, 1], hyper, 0).is_err());
        assert!(fit_forest(&x, &[0], hyper, 0).is_err());
        let bad_hyper = ForestHyper { n_trees: 5, max_depth: 2, max_features: 3 };
        assert!(fit_forest(&x, &[0, 1], bad_hyper, 0).is_err());
    }
}
