//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here recomputes quantities from raw tree traversals and plain
//! loops, without going through the library's cached leaves, parent arrays
//! or partial sorts.

#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use rand::Rng;
use rfdis::forest::Node;
use rfdis::{Matrix, RandomForest, RandomTree, TrainingSet};

/// Random task with every class present. Feature values are drawn from a
/// small grid half of the time so that ties and duplicates occur.
pub fn random_task(rng: &mut impl Rng, n: usize, m: usize, c: usize) -> Arc<TrainingSet> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        f64::from(rng.gen_range(0..4u8))
                    } else {
                        rng.gen_range(-2.0..2.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.gen_range(0..c) }).collect();
    // keep the guaranteed classes away from always being the first rows
    let shift = rng.gen_range(0..n);
    labels.rotate_left(shift);
    Arc::new(TrainingSet::new(Matrix::from_rows(&rows).unwrap(), labels, c).unwrap())
}

/// Node indices visited from the root to the leaf of `x`.
pub fn leaf_path(tree: &RandomTree, x: &[f64]) -> Vec<usize> {
    let nodes = tree.nodes();
    let mut path = vec![RandomTree::ROOT];
    loop {
        match &nodes[*path.last().unwrap()] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => path.push(if x[*feature] <= *threshold { *left } else { *right }),
            Node::Leaf { .. } => return path,
        }
    }
}

pub fn leaf_of(tree: &RandomTree, x: &[f64]) -> usize {
    *leaf_path(tree, x).last().unwrap()
}

/// Edges between the leaves reached by `a` and `b`.
pub fn path_edges(tree: &RandomTree, a: &[f64], b: &[f64]) -> u32 {
    let pa = leaf_path(tree, a);
    let pb = leaf_path(tree, b);
    let common = pa.iter().zip(&pb).take_while(|(u, v)| u == v).count();
    (pa.len() - common + pb.len() - common) as u32
}

pub fn plain(forest: &RandomForest, x: &[f64], j: usize) -> f64 {
    let xj = forest.training().instance(j);
    let differ = forest.trees().iter().filter(|t| leaf_of(t, x) != leaf_of(t, xj)).count();
    differ as f64 / forest.n_trees() as f64
}

pub fn path_length(forest: &RandomForest, x: &[f64], j: usize, w: f64) -> f64 {
    let xj = forest.training().instance(j);
    let mut total = 0.0;
    for t in forest.trees() {
        total += 1.0 / (w * f64::from(path_edges(t, x, xj))).exp();
    }
    1.0 - total / forest.n_trees() as f64
}

/// κDN of every training instance in every tree's subspace, `[tree][instance]`,
/// by full sorting.
pub fn hardness(forest: &RandomForest, kappa: usize) -> Vec<Vec<f64>> {
    let data = forest.training();
    let (n, m) = (data.n_instances(), data.n_features());
    let mut z = vec![vec![0.0; m]; n];
    for f in 0..m {
        let mean = (0..n).map(|i| data.instance(i)[f]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (data.instance(i)[f] - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            z[i][f] = (data.instance(i)[f] - mean) / scale;
        }
    }
    forest
        .trees()
        .iter()
        .map(|t| {
            let mut features: Vec<usize> = t
                .nodes()
                .iter()
                .filter_map(|node| match node {
                    Node::Split { feature, .. } => Some(*feature),
                    Node::Leaf { .. } => None,
                })
                .collect();
            features.sort_unstable();
            features.dedup();
            if features.is_empty() {
                features = (0..m).collect();
            }
            (0..n)
                .map(|i| {
                    let mut d: Vec<(f64, usize)> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let s: f64 = features.iter().map(|&f| (z[i][f] - z[j][f]) * (z[i][f] - z[j][f])).sum();
                            (s, j)
                        })
                        .collect();
                    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let disagree = d[..kappa].iter().filter(|&&(_, j)| data.labels()[j] != data.labels()[i]).count();
                    disagree as f64 / kappa as f64
                })
                .collect()
        })
        .collect()
}

pub fn rfd(forest: &RandomForest, h: &[Vec<f64>], x: &[f64], j: usize) -> f64 {
    let xj = forest.training().instance(j);
    let (mut num, mut den, mut differ) = (0.0, 0.0, 0usize);
    for (k, t) in forest.trees().iter().enumerate() {
        let w = 1.0 - h[k][j];
        den += w;
        if leaf_of(t, x) != leaf_of(t, xj) {
            num += w;
            differ += 1;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        differ as f64 / forest.n_trees() as f64
    }
}

/// Out-of-bag accuracy on `region` by explicit vote tallies.
pub fn oob_accuracy(forest: &RandomForest, region: &[usize]) -> Option<f64> {
    let data = forest.training();
    let (mut evaluated, mut correct) = (0, 0);
    for &i in region {
        let mut votes = vec![0u32; data.n_classes()];
        for (k, t) in forest.trees().iter().enumerate() {
            if !forest.bootstrap_masks()[k][i] {
                votes[t.predict(data.instance(i))] += 1;
            }
        }
        if votes.iter().all(|&v| v == 0) {
            continue;
        }
        let best = votes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap().0;
        evaluated += 1;
        correct += usize::from(best == data.labels()[i]);
    }
    (evaluated > 0).then(|| correct as f64 / evaluated as f64)
}

/// Smallest `w` with `P(Bin(n, 1/2) >= w) <= 1/20`, by exact integer sums;
/// `n + 1` when no count qualifies.
pub fn sign_threshold_5pct(n: usize) -> usize {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let total = 1u128 << n;
    (0..=n)
        .find(|&w| 20 * row[w..].iter().sum::<u128>() <= total)
        .unwrap_or(n + 1)
}
