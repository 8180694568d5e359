//! Breiman-style random forest classifier.
//!
//! Trees are trained on bootstrap samples and grown until every leaf is pure
//! or holds instances that no split can separate. Bootstrap masks are kept so
//! that out-of-bag estimates are available after training, and the leaf of
//! every training instance is cached per tree because every dissimilarity
//! computation downstream needs it.

mod tree;

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{rng_for, STREAM_TREE};

pub(crate) use tree::majority;
pub use tree::{Node, RandomTree};

/// Labelled numeric training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    features: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
}

impl TrainingSet {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let n = features.rows();
        if n < 2 {
            return Err(Error::Parameter(format!("training set needs at least 2 instances, got {n}")));
        }
        if labels.len() != n {
            return Err(Error::Structural(format!("{} labels for {n} instances", labels.len())));
        }
        if features.cols() == 0 {
            return Err(Error::Parameter("training set has no features".into()));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite feature value at instance {}, feature {}",
                pos / features.cols(),
                pos % features.cols()
            )));
        }
        let mut seen = vec![0usize; n_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= n_classes {
                return Err(Error::InvalidTask(format!(
                    "label {y} of instance {i} is outside 0..{n_classes}"
                )));
            }
            seen[y] += 1;
        }
        let present = seen.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(Error::InvalidTask(format!(
                "need at least 2 distinct labels, found {present}"
            )));
        }
        if let Some(missing) = seen.iter().position(|&c| c == 0) {
            return Err(Error::InvalidTask(format!("class {missing} has no instance")));
        }
        Ok(TrainingSet {
            features,
            labels,
            n_classes,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_instances(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }
}

/// Forest hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: usize,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(n_trees: usize, mtry: usize, seed: u64) -> Self {
        ForestParams { n_trees, mtry, seed }
    }

    /// `mtry = ceil(sqrt(m))`.
    pub fn sqrt_mtry(n_trees: usize, n_features: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            mtry: ceil_sqrt(n_features),
            seed,
        }
    }
}

/// Smallest integer `r >= 1` with `r * r >= m`.
pub fn ceil_sqrt(m: usize) -> usize {
    let mut r = (m as f64).sqrt() as usize;
    while r * r < m {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= m {
        r -= 1;
    }
    r.max(1)
}

/// A trained random forest.
///
/// Immutable after training; share it behind `&` or `Arc`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ForestRepr", into = "ForestRepr")]
pub struct RandomForest {
    trees: Vec<RandomTree>,
    bootstrap_masks: Vec<Vec<bool>>,
    params: ForestParams,
    training: Arc<TrainingSet>,
    /// `train_leaves[k][i]`: leaf of training instance `i` in tree `k`.
    train_leaves: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct ForestRepr {
    params: ForestParams,
    trees: Vec<RandomTree>,
    bootstrap_masks: Vec<Vec<bool>>,
    training: Arc<TrainingSet>,
}

impl From<RandomForest> for ForestRepr {
    fn from(f: RandomForest) -> Self {
        ForestRepr {
            params: f.params,
            trees: f.trees,
            bootstrap_masks: f.bootstrap_masks,
            training: f.training,
        }
    }
}

impl TryFrom<ForestRepr> for RandomForest {
    type Error = Error;

    fn try_from(r: ForestRepr) -> Result<Self> {
        let n = r.training.n_instances();
        if r.trees.is_empty() || r.trees.len() != r.bootstrap_masks.len() {
            return Err(Error::Serde("forest has no trees or mismatched bootstrap masks".into()));
        }
        if r.bootstrap_masks.iter().any(|m| m.len() != n) {
            return Err(Error::Serde("bootstrap mask length differs from training size".into()));
        }
        Ok(RandomForest::assemble(r.trees, r.bootstrap_masks, r.params, r.training))
    }
}

impl RandomForest {
    /// Trains `params.n_trees` trees, each on its own bootstrap sample.
    ///
    /// Tree `k` draws from a random stream derived from `(seed, k)`, so the
    /// result does not depend on how rayon schedules the trees.
    pub fn train(data: Arc<TrainingSet>, params: ForestParams) -> Result<Self> {
        let m = data.n_features();
        if params.n_trees == 0 {
            return Err(Error::Parameter("a forest needs at least one tree".into()));
        }
        if params.mtry == 0 || params.mtry > m {
            return Err(Error::Parameter(format!(
                "mtry must be in 1..={m}, got {}",
                params.mtry
            )));
        }
        let n = data.n_instances();
        let grown: Vec<(RandomTree, Vec<bool>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_for(params.seed, &[STREAM_TREE, k as u64]);
                let mut mask = vec![false; n];
                let samples: Vec<usize> = (0..n)
                    .map(|_| {
                        let i = rng.gen_range(0..n);
                        mask[i] = true;
                        i
                    })
                    .collect();
                let tree = tree::grow(&data, samples, params.mtry, &mut rng);
                (tree, mask)
            })
            .collect();
        let (trees, masks) = grown.into_iter().unzip();
        Ok(Self::assemble(trees, masks, params, data))
    }

    /// Assembles a forest from existing trees, e.g. hand-built fixtures.
    pub fn from_trees(
        trees: Vec<RandomTree>,
        bootstrap_masks: Vec<Vec<bool>>,
        params: ForestParams,
        training: Arc<TrainingSet>,
    ) -> Result<Self> {
        RandomForest::try_from(ForestRepr {
            params,
            trees,
            bootstrap_masks,
            training,
        })
    }

    fn assemble(
        trees: Vec<RandomTree>,
        bootstrap_masks: Vec<Vec<bool>>,
        params: ForestParams,
        training: Arc<TrainingSet>,
    ) -> Self {
        let train_leaves = trees
            .par_iter()
            .map(|t| {
                (0..training.n_instances())
                    .map(|i| t.leaf_index(training.instance(i)) as u32)
                    .collect()
            })
            .collect();
        RandomForest {
            trees,
            bootstrap_masks,
            params,
            training,
            train_leaves,
        }
    }

    pub fn trees(&self) -> &[RandomTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn params(&self) -> ForestParams {
        self.params
    }

    pub fn mtry(&self) -> usize {
        self.params.mtry
    }

    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    pub fn training(&self) -> &Arc<TrainingSet> {
        &self.training
    }

    pub fn n_classes(&self) -> usize {
        self.training.n_classes()
    }

    pub fn bootstrap_masks(&self) -> &[Vec<bool>] {
        &self.bootstrap_masks
    }

    /// Whether training instance `i` was drawn into tree `k`'s bootstrap.
    pub fn in_bag(&self, k: usize, i: usize) -> bool {
        self.bootstrap_masks[k][i]
    }

    /// Leaf of training instance `i` in tree `k`.
    #[inline]
    pub fn train_leaf(&self, k: usize, i: usize) -> usize {
        self.train_leaves[k][i] as usize
    }

    pub(crate) fn train_leaves(&self, k: usize) -> &[u32] {
        &self.train_leaves[k]
    }

    /// Leaf of `x` in every tree.
    pub fn leaves(&self, x: &[f64]) -> Vec<u32> {
        self.check_dim(x);
        self.trees.iter().map(|t| t.leaf_index(x) as u32).collect()
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.training.n_features(),
            "feature vector has the wrong dimension"
        );
    }

    /// Per-class vote counts; they sum to the number of trees.
    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        self.check_dim(x);
        let mut votes = vec![0u32; self.n_classes()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }

    /// Plurality class over all trees, lowest class index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        majority(&self.votes(x), self.n_classes())
    }

    pub fn predict_batch(&self, rows: &Matrix) -> Vec<usize> {
        (0..rows.rows())
            .into_par_iter()
            .map(|i| self.predict(rows.row(i)))
            .collect()
    }

    /// Majority vote for training instance `i` using only its out-of-bag
    /// trees, or `None` when every tree drew it.
    pub fn oob_prediction(&self, i: usize) -> Option<usize> {
        let mut votes = vec![0u32; self.n_classes()];
        let mut any = false;
        for (k, t) in self.trees.iter().enumerate() {
            if !self.bootstrap_masks[k][i] {
                votes[t.leaf_class(self.train_leaves[k][i] as usize)] += 1;
                any = true;
            }
        }
        any.then(|| majority(&votes, self.n_classes()))
    }

    /// Out-of-bag error over `subset` (all training instances by default).
    ///
    /// Instances without any out-of-bag tree are skipped. Returns `None`
    /// (undefined) when nothing is left to evaluate.
    ///
    /// # Panics
    ///
    /// If a subset index is not a training instance.
    pub fn oob_error(&self, subset: Option<&[usize]>) -> Option<f64> {
        let n = self.training.n_instances();
        let (mut evaluated, mut wrong) = (0usize, 0usize);
        let mut tally = |i: usize| {
            assert!(i < n, "instance {i} is not in the training set of size {n}");
            if let Some(pred) = self.oob_prediction(i) {
                evaluated += 1;
                if pred != self.training.labels()[i] {
                    wrong += 1;
                }
            }
        };
        match subset {
            Some(idx) => idx.iter().copied().for_each(&mut tally),
            None => (0..n).for_each(&mut tally),
        }
        (evaluated > 0).then(|| wrong as f64 / evaluated as f64)
    }

    /// Fraction of training instances that are out-of-bag for tree `k`.
    pub fn oob_fraction(&self, k: usize) -> f64 {
        let mask = &self.bootstrap_masks[k];
        mask.iter().filter(|&&b| !b).count() as f64 / mask.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> Arc<TrainingSet> {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![i as f64, ((i * 7) % 5) as f64])
            .collect();
        let labels = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        Arc::new(TrainingSet::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap())
    }

    #[test]
    fn ceil_sqrt_rounds_up() {
        assert_eq!(ceil_sqrt(1), 1);
        assert_eq!(ceil_sqrt(4), 2);
        assert_eq!(ceil_sqrt(5), 3);
        assert_eq!(ceil_sqrt(200), 15);
        assert_eq!(ceil_sqrt(309), 18);
    }

    #[test]
    fn rejects_degenerate_training_sets() {
        let one = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(TrainingSet::new(one, vec![0], 1), Err(Error::Parameter(_))));
        let two = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            TrainingSet::new(two.clone(), vec![0, 0], 1),
            Err(Error::InvalidTask(_))
        ));
        assert!(matches!(
            TrainingSet::new(two.clone(), vec![0, 2], 3),
            Err(Error::InvalidTask(_))
        ));
        let nan = Matrix::from_rows(&[vec![f64::NAN], vec![2.0]]).unwrap();
        assert!(TrainingSet::new(nan, vec![0, 1], 2).is_err());
    }

    #[test]
    fn rejects_bad_mtry() {
        let data = separable(20);
        assert!(matches!(
            RandomForest::train(data.clone(), ForestParams::new(4, 3, 0)),
            Err(Error::Parameter(_))
        ));
        assert!(RandomForest::train(data.clone(), ForestParams::new(4, 0, 0)).is_err());
        assert!(RandomForest::train(data, ForestParams::new(0, 1, 0)).is_err());
    }

    #[test]
    fn separable_data_is_memorized() {
        let data = separable(20);
        let forest = RandomForest::train(data.clone(), ForestParams::new(8, 1, 3)).unwrap();
        let preds = forest.predict_batch(data.features());
        assert_eq!(preds, data.labels());
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(30);
        let a = RandomForest::train(data.clone(), ForestParams::new(6, 1, 11)).unwrap();
        let b = RandomForest::train(data, ForestParams::new(6, 1, 11)).unwrap();
        assert_eq!(a.trees, b.trees);
        assert_eq!(a.bootstrap_masks, b.bootstrap_masks);
    }

    #[test]
    fn single_tree_forest_follows_its_tree() {
        let data = separable(20);
        let forest = RandomForest::train(data, ForestParams::new(1, 2, 5)).unwrap();
        for x in [[3.0, 1.0], [15.5, 0.0], [9.5, 4.0]] {
            assert_eq!(forest.predict(&x), forest.trees()[0].predict(&x));
        }
    }

    #[test]
    fn votes_sum_to_tree_count() {
        let data = separable(24);
        let forest = RandomForest::train(data, ForestParams::new(9, 1, 1)).unwrap();
        let v = forest.votes(&[11.7, 2.0]);
        assert_eq!(v.iter().sum::<u32>(), 9);
    }

    #[test]
    fn serde_round_trip_is_lossless() {
        let data = separable(16);
        let forest = RandomForest::train(data, ForestParams::new(3, 2, 9)).unwrap();
        let json = serde_json::to_string(&forest).unwrap();
        let back: RandomForest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.trees, forest.trees);
        assert_eq!(back.bootstrap_masks, forest.bootstrap_masks);
        assert_eq!(back.train_leaves, forest.train_leaves);
        assert_eq!(back.params, forest.params);
    }
}
