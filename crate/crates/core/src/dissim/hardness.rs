use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{RandomForest, TrainingSet};
use crate::matrix::Matrix;

/// Default neighbourhood size for κ-disagreeing neighbours.
pub const DEFAULT_KAPPA: usize = 5;

/// Per-tree instance hardness: entry `(k, i)` is the κDN score of training
/// instance `i` in the subspace of the features used by tree `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessTable {
    values: Matrix,
    kappa: usize,
}

impl HardnessTable {
    /// κDN of every training instance in every tree subspace.
    ///
    /// Features are standardized on the training set first (constant features
    /// keep unit scale). Trees without any split fall back to the full space.
    pub fn compute(forest: &RandomForest, kappa: usize) -> Result<Self> {
        let data = forest.training();
        let n = data.n_instances();
        if kappa == 0 || kappa >= n {
            return Err(Error::Parameter(format!(
                "kappa must be in 1..{n}, got {kappa}"
            )));
        }
        let standardized = standardize(data.features());
        let all: Vec<usize> = (0..data.n_features()).collect();
        let rows: Vec<Vec<f64>> = forest
            .trees()
            .par_iter()
            .map(|tree| {
                let subspace = if tree.used_features().is_empty() {
                    &all[..]
                } else {
                    tree.used_features()
                };
                kdn_in_subspace(&standardized, data, subspace, kappa)
            })
            .collect();
        let values = Matrix::from_rows(&rows)?;
        Ok(HardnessTable { values, kappa })
    }

    /// A table with explicit values, `n_trees x n_instances`.
    pub fn from_values(values: Matrix, kappa: usize) -> Result<Self> {
        if values.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("hardness values must lie in [0, 1]".into()));
        }
        Ok(HardnessTable { values, kappa })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn n_trees(&self) -> usize {
        self.values.rows()
    }

    pub fn n_instances(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, tree: usize, instance: usize) -> f64 {
        self.values.get(tree, instance)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// RFD weight `1 - κDN` of reference instance `i` in tree `k`.
    #[inline]
    pub fn weight(&self, tree: usize, instance: usize) -> f64 {
        1.0 - self.values.get(tree, instance)
    }
}

/// Hardness table of `forest` over its own training set.
pub fn kdn_hardness(forest: &RandomForest, kappa: usize) -> Result<HardnessTable> {
    HardnessTable::compute(forest, kappa)
}

/// Zero mean, unit variance per column. Constant columns are only centered.
pub(crate) fn standardize(features: &Matrix) -> Matrix {
    let (n, m) = (features.rows(), features.cols());
    let mut out = features.clone();
    for f in 0..m {
        let mean = (0..n).map(|i| features.get(i, f)).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|i| (features.get(i, f) - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let sd = var.sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..n {
            out.set(i, f, (features.get(i, f) - mean) / scale);
        }
    }
    out
}

fn kdn_in_subspace(z: &Matrix, data: &TrainingSet, subspace: &[usize], kappa: usize) -> Vec<f64> {
    let n = z.rows();
    let s = subspace.len();
    // Gather the subspace into a contiguous n x s block.
    let mut block = Vec::with_capacity(n * s);
    for i in 0..n {
        let row = z.row(i);
        block.extend(subspace.iter().map(|&f| row[f]));
    }
    let labels = data.labels();
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    (0..n)
        .map(|i| {
            let xi = &block[i * s..(i + 1) * s];
            dist.clear();
            for j in (0..n).filter(|&j| j != i) {
                let xj = &block[j * s..(j + 1) * s];
                let d: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                dist.push((d, j));
            }
            let by_distance_then_index =
                |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if kappa < dist.len() {
                dist.select_nth_unstable_by(kappa - 1, by_distance_then_index);
            }
            let disagree = dist[..kappa]
                .iter()
                .filter(|&&(_, j)| labels[j] != labels[i])
                .count();
            disagree as f64 / kappa as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_handles_constant_columns() {
        let m = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let z = standardize(&m);
        assert_eq!(z.row(0), &[-1.0, 0.0]);
        assert_eq!(z.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn kdn_counts_disagreeing_neighbours() {
        // 1-D line: instance 0 at the origin, neighbours at growing distance.
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 100.0];
        let labels = vec![0, 0, 1, 0, 1, 0, 1];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let data = TrainingSet::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap();
        let z = standardize(data.features());
        let h = kdn_in_subspace(&z, &data, &[0], 5);
        // Neighbours of instance 0: 1,2,3,4,5 -> labels 0,1,0,1,0 -> 2 of 5 disagree.
        assert_eq!(h[0], 0.4);
        assert!(h.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn kdn_ties_prefer_low_indices() {
        // Instance 0 sits between 1 and 2 at equal distance; kappa = 1 picks 1.
        let rows = vec![vec![0.0], vec![-1.0], vec![1.0], vec![10.0]];
        let data = TrainingSet::new(Matrix::from_rows(&rows).unwrap(), vec![0, 0, 1, 1], 2).unwrap();
        let z = standardize(data.features());
        assert_eq!(kdn_in_subspace(&z, &data, &[0], 1)[0], 0.0);
    }
}
