//! Multi-target regression as independent single-target random forests of
//! variance-reduction CART trees.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Stream tags for per-tree seed derivation.
const BOOTSTRAP_STREAM: u64 = 0x626f_6f74; // "boot"
const NODE_STREAM: u64 = 0x6e6f_6465; // "node"

/// Abstract multi-target regressor, so alternates can stand in for the
/// forest in tests.
pub trait MultiTargetRegressor {
    fn output_dim(&self) -> usize;
    fn predict(&self, features: &[f64]) -> Result<Vec<f64>>;
}

/// Forest hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features tried at each split, in (0, 1].
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 35,
            min_leaf: 1,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Validation("forest needs at least one tree".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Validation("min_leaf must be at least 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "feature fraction must lie in (0, 1], got {}",
                self.feature_fraction
            )));
        }
        Ok(())
    }

    fn features_per_split(&self, num_features: usize) -> usize {
        ((num_features as f64 * self.feature_fraction).ceil() as usize).clamp(1, num_features)
    }
}

/// Binary split of an internal node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
}

/// One node of a tree stored in a flat arena. Every node carries the mean
/// target of its training rows so prediction can stop at any depth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeNode {
    pub value: f64,
    pub split: Option<Split>,
}

/// A regression tree; node 0 is the root.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.predict_capped(features, usize::MAX)
    }

    /// Prediction that descends at most `max_depth` edges; equals the
    /// prediction of the same tree fitted with that depth limit.
    pub fn predict_capped(&self, features: &[f64], max_depth: usize) -> f64 {
        let mut node = &self.nodes[0];
        let mut depth = 0;
        while let Some(split) = &node.split {
            if depth == max_depth {
                break;
            }
            node = if features[split.feature] <= split.threshold {
                &self.nodes[split.left as usize]
            } else {
                &self.nodes[split.right as usize]
            };
            depth += 1;
        }
        node.value
    }
}

/// Fits one CART regression tree on all rows of `x`.
pub fn fit_tree(
    x: &FeatureMatrix,
    targets: &[f64],
    max_depth: usize,
    min_leaf: usize,
    feature_fraction: f64,
    seed: u64,
) -> Result<Tree> {
    if x.rows() == 0 {
        return Err(Error::Validation("cannot fit a tree on an empty dataset".into()));
    }
    if targets.len() != x.rows() {
        return Err(Error::Dimension(format!(
            "{} targets for {} rows",
            targets.len(),
            x.rows()
        )));
    }
    let params = ForestParams {
        n_trees: 1,
        max_depth,
        min_leaf,
        feature_fraction,
        bootstrap: false,
    };
    params.validate()?;
    check_finite(targets)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(grow_tree(x, targets, rows, &params, seed))
}

fn check_finite(targets: &[f64]) -> Result<()> {
    if let Some(pos) = targets.iter().position(|t| !t.is_finite()) {
        return Err(Error::Validation(format!(
            "target {pos} is not finite"
        )));
    }
    Ok(())
}

struct TreeBuilder<'a> {
    x: &'a FeatureMatrix,
    targets: &'a [f64],
    min_leaf: usize,
    mtry: usize,
    tree_seed: u64,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

fn grow_tree(
    x: &FeatureMatrix,
    targets: &[f64],
    rows: Vec<usize>,
    params: &ForestParams,
    tree_seed: u64,
) -> Tree {
    let mut builder = TreeBuilder {
        x,
        targets,
        min_leaf: params.min_leaf,
        mtry: params.features_per_split(x.cols()),
        tree_seed,
        max_depth: params.max_depth,
        nodes: Vec::new(),
    };
    builder.grow(rows, 0, 1);
    Tree {
        nodes: builder.nodes,
    }
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `rows` at `depth`; `path` is the heap index of
    /// the node (root 1, children 2p and 2p+1) and seeds its feature draw,
    /// so the tree shape above any depth never depends on the depth limit.
    fn grow(&mut self, rows: Vec<usize>, depth: usize, path: u64) -> u32 {
        let n = rows.len();
        let mean = rows.iter().map(|&r| self.targets[r]).sum::<f64>() / n as f64;
        let index = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            value: mean,
            split: None,
        });

        if depth >= self.max_depth || n < 2 * self.min_leaf || self.is_pure(&rows) {
            return index;
        }
        let Some((feature, threshold)) = self.best_split(&rows, path) else {
            return index;
        };

        let mut left_rows = Vec::with_capacity(n / 2);
        let mut right_rows = Vec::with_capacity(n / 2);
        for &r in &rows {
            if self.x.get(r, feature) <= threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        drop(rows);
        let left = self.grow(left_rows, depth + 1, 2 * path);
        let right = self.grow(right_rows, depth + 1, 2 * path + 1);
        self.nodes[index as usize].split = Some(Split {
            feature,
            threshold,
            left,
            right,
        });
        index
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.targets[rows[0]];
        rows.iter().all(|&r| self.targets[r] == first)
    }

    /// Distinct feature indices tried at this node, ascending so that equal
    /// gains resolve to the lowest feature index.
    fn feature_subset(&self, path: u64) -> Vec<usize> {
        let d = self.x.cols();
        if self.mtry >= d {
            return (0..d).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            derive_seed(self.tree_seed, NODE_STREAM),
            path,
        ));
        let mut pool: Vec<usize> = (0..d).collect();
        for i in 0..self.mtry {
            let j = rng.random_range(i..d);
            pool.swap(i, j);
        }
        let mut subset = pool[..self.mtry].to_vec();
        subset.sort_unstable();
        subset
    }

    /// Greedy variance-reduction split over the sampled feature subset.
    /// Ties break to the lowest feature index, then the lowest threshold.
    fn best_split(&self, rows: &[usize], path: u64) -> Option<(usize, f64)> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = f64::NEG_INFINITY;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for feature in self.feature_subset(path) {
            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&r| (self.x.get(r, feature), self.targets[r])),
            );
            pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += pairs[i - 1].1;
                if pairs[i].0 == pairs[i - 1].0 {
                    continue;
                }
                let left_n = i;
                let right_n = n - i;
                if left_n < self.min_leaf || right_n < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score =
                    left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64;
                if score > best_score {
                    best_score = score;
                    best = Some((feature, midpoint(pairs[i - 1].0, pairs[i].0)));
                }
            }
        }
        best
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}

/// M independent single-target forests sharing one hyperparameter set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Vec<Tree>>,
    params: ForestParams,
    seed: u64,
    num_features: usize,
}

/// Trains `targets.len()` forests, one per target column, each on `n_trees`
/// bootstrap resamples. Deterministic given the seed.
pub fn fit_forest(
    x: &FeatureMatrix,
    targets: &[Vec<f64>],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    params.validate()?;
    if x.rows() == 0 {
        return Err(Error::Validation("cannot fit a forest on an empty dataset".into()));
    }
    if targets.is_empty() {
        return Err(Error::Validation("forest needs at least one target".into()));
    }
    for (m, t) in targets.iter().enumerate() {
        if t.len() != x.rows() {
            return Err(Error::Dimension(format!(
                "target {m} has {} values for {} rows",
                t.len(),
                x.rows()
            )));
        }
        check_finite(t)?;
    }
    let n_trees = params.n_trees;
    // Tree t draws the same seed for every target, which keeps each
    // target's model independent of the position of the other targets.
    let jobs: Vec<(usize, u64)> = (0..targets.len() * n_trees)
        .map(|flat| (flat, derive_seed(seed, (flat % n_trees) as u64)))
        .collect();
    let trees_flat: Vec<Tree> = jobs
        .par_iter()
        .map(|&(flat, tree_seed)| {
            let target = &targets[flat / n_trees];
            let rows = if params.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tree_seed, BOOTSTRAP_STREAM));
                (0..x.rows()).map(|_| rng.random_range(0..x.rows())).collect()
            } else {
                (0..x.rows()).collect::<Vec<usize>>()
            };
            grow_tree(x, target, rows, params, tree_seed)
        })
        .collect();
    let mut trees: Vec<Vec<Tree>> = Vec::with_capacity(targets.len());
    let mut iter = trees_flat.into_iter();
    for _ in 0..targets.len() {
        trees.push(iter.by_ref().take(n_trees).collect());
    }
    Ok(ForestModel {
        trees,
        params: params.clone(),
        seed,
        num_features: x.cols(),
    })
}

impl ForestModel {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn trees(&self) -> &[Vec<Tree>] {
        &self.trees
    }

    /// Per-target mean of the tree predictions.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.predict_capped(features, usize::MAX)
    }

    /// Prediction with every tree capped at `max_depth`; equals `predict`
    /// on a forest fitted with that depth limit.
    pub fn predict_capped(&self, features: &[f64], max_depth: usize) -> Result<Vec<f64>> {
        if features.len() != self.num_features {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                features.len(),
                self.num_features
            )));
        }
        Ok(self
            .trees
            .iter()
            .map(|forest| {
                forest
                    .iter()
                    .map(|t| t.predict_capped(features, max_depth))
                    .sum::<f64>()
                    / forest.len() as f64
            })
            .collect())
    }
}

impl MultiTargetRegressor for ForestModel {
    fn output_dim(&self) -> usize {
        self.trees.len()
    }

    fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        ForestModel::predict(self, features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn separable_fixture() -> (FeatureMatrix, Vec<f64>) {
        let mut rows = Vec::new();
        let mut t = Vec::new();
        for _ in 0..10 {
            rows.push(vec![0.0]);
            t.push(0.0);
            rows.push(vec![1.0]);
            t.push(1.0);
        }
        (FeatureMatrix::from_rows(rows).unwrap(), t)
    }

    #[test]
    fn constant_targets_fit_to_single_leaf() {
        let x = matrix(&[&[0.0], &[1.0], &[2.0]]);
        let tree = fit_tree(&x, &[4.5, 4.5, 4.5], 10, 1, 1.0, 0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.predict(&[7.0]), 4.5);
    }

    #[test]
    fn separable_fixture_splits_between_the_two_values() {
        let (x, t) = separable_fixture();
        let tree = fit_tree(&x, &t, 5, 1, 1.0, 0).unwrap();
        let split = tree.nodes()[0].split.as_ref().expect("root splits");
        assert_eq!(split.feature, 0);
        assert!(split.threshold > 0.0 && split.threshold < 1.0);
        assert_eq!(tree.predict(&[0.0]), 0.0);
        assert_eq!(tree.predict(&[1.0]), 1.0);
    }

    #[test]
    fn depth_zero_gives_mean_leaf() {
        let (x, t) = separable_fixture();
        let tree = fit_tree(&x, &t, 0, 1, 1.0, 0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.predict(&[0.0]), 0.5);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        let x = FeatureMatrix::from_rows(vec![]).unwrap();
        assert!(fit_tree(&x, &[], 1, 1, 1.0, 0).is_err());
        let x = matrix(&[&[0.0]]);
        assert!(matches!(
            fit_tree(&x, &[1.0, 2.0], 1, 1, 1.0, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn single_tree_forest_without_bootstrap_collapses_to_fit_tree() {
        let (x, t) = separable_fixture();
        let params = ForestParams {
            n_trees: 1,
            max_depth: 6,
            min_leaf: 1,
            feature_fraction: 1.0,
            bootstrap: false,
        };
        let forest = fit_forest(&x, &[t.clone()], &params, 99).unwrap();
        let tree = fit_tree(&x, &t, 6, 1, 1.0, 99).unwrap();
        for v in [0.0, 0.4, 0.6, 1.0] {
            assert_eq!(forest.predict(&[v]).unwrap()[0], tree.predict(&[v]));
        }
    }

    #[test]
    fn forest_is_deterministic_under_fixed_seed() {
        let (x, t) = separable_fixture();
        let targets = vec![t.clone(), t.iter().map(|v| 1.0 - v).collect()];
        let params = ForestParams {
            n_trees: 12,
            max_depth: 4,
            feature_fraction: 1.0,
            ..ForestParams::default()
        };
        let a = fit_forest(&x, &targets, &params, 7).unwrap();
        let b = fit_forest(&x, &targets, &params, 7).unwrap();
        for v in [0.0, 0.3, 0.8, 1.0] {
            assert_eq!(a.predict(&[v]).unwrap(), b.predict(&[v]).unwrap());
        }
        let c = fit_forest(&x, &targets, &params, 8).unwrap();
        assert_eq!(c.predict(&[0.5]).unwrap().len(), 2);
    }

    #[test]
    fn predictions_stay_within_target_range() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..60).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let x = FeatureMatrix::from_rows(rows).unwrap();
        let params = ForestParams {
            n_trees: 10,
            max_depth: 8,
            ..ForestParams::default()
        };
        let model = fit_forest(&x, &targets, &params, 11).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let pred = model.predict(&q).unwrap();
            for (m, p) in pred.iter().enumerate() {
                let lo = targets[m].iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = targets[m].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(*p >= lo && *p <= hi);
            }
        }
    }

    #[test]
    fn unlimited_tree_reproduces_training_targets_on_unique_rows() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64 + rng.random_range(0.0..0.4), rng.random_range(-1.0..1.0)])
            .collect();
        let targets: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = FeatureMatrix::from_rows(rows.clone()).unwrap();
        let tree = fit_tree(&x, &targets, usize::MAX, 1, 1.0, 5).unwrap();
        for (row, &t) in rows.iter().zip(&targets) {
            assert_eq!(tree.predict(row), t);
        }
    }

    #[test]
    fn capped_prediction_equals_shallow_fit() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..80).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = FeatureMatrix::from_rows(rows.clone()).unwrap();
        for depth in [1usize, 2, 3, 5] {
            let deep = fit_forest(
                &x,
                &targets,
                &ForestParams {
                    n_trees: 5,
                    max_depth: 12,
                    feature_fraction: 0.5,
                    ..ForestParams::default()
                },
                31,
            )
            .unwrap();
            let shallow = fit_forest(
                &x,
                &targets,
                &ForestParams {
                    n_trees: 5,
                    max_depth: depth,
                    feature_fraction: 0.5,
                    ..ForestParams::default()
                },
                31,
            )
            .unwrap();
            for row in rows.iter().take(20) {
                assert_eq!(
                    deep.predict_capped(row, depth).unwrap(),
                    shallow.predict(row).unwrap(),
                    "depth {depth}"
                );
            }
        }
    }

    #[test]
    fn ties_break_to_lowest_feature_and_threshold() {
        // Both features separate the targets identically; feature 0 must win.
        let x = matrix(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]]);
        let t = vec![0.0, 1.0, 0.0, 1.0];
        let tree = fit_tree(&x, &t, 3, 1, 1.0, 0).unwrap();
        let split = tree.nodes()[0].split.as_ref().unwrap();
        assert_eq!(split.feature, 0);
    }

    #[test]
    fn non_finite_targets_are_rejected() {
        let x = matrix(&[&[0.0], &[1.0]]);
        assert!(fit_tree(&x, &[0.0, f64::NAN], 2, 1, 1.0, 0).is_err());
    }
}
