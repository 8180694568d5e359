//! Fully grown randomized CART trees.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSet;

const NO_PARENT: usize = usize::MAX;

/// A tree node. Instances go left iff `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
        /// In-bag class histogram (bootstrap multiplicities included).
        counts: Vec<u32>,
    },
}

/// A single random tree of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTree {
    nodes: Vec<Node>,
    parent: Vec<usize>,
    depth: Vec<u32>,
    /// Leaf id -> node index.
    leaf_nodes: Vec<usize>,
    /// Leaf id -> majority class (lowest index on ties).
    leaf_class: Vec<usize>,
    used_features: Vec<usize>,
}

impl RandomTree {
    /// Root node index.
    pub const ROOT: usize = 0;

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    /// Sorted feature indices that appear in at least one split.
    pub fn used_features(&self) -> &[usize] {
        &self.used_features
    }

    pub fn depth_of(&self, node: usize) -> u32 {
        self.depth[node]
    }

    pub fn parent_of(&self, node: usize) -> Option<usize> {
        let p = self.parent[node];
        (p != NO_PARENT).then_some(p)
    }

    pub fn leaf_node(&self, leaf_id: usize) -> usize {
        self.leaf_nodes[leaf_id]
    }

    pub fn leaf_class(&self, leaf_id: usize) -> usize {
        self.leaf_class[leaf_id]
    }

    pub fn leaf_counts(&self, leaf_id: usize) -> &[u32] {
        match &self.nodes[self.leaf_nodes[leaf_id]] {
            Node::Leaf { counts, .. } => counts,
            Node::Split { .. } => unreachable!("leaf table points at a split node"),
        }
    }

    /// Id of the leaf `x` lands in.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = Self::ROOT;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { leaf_id, .. } => return *leaf_id,
            }
        }
    }

    /// Class voted by this tree for `x`.
    pub fn predict(&self, x: &[f64]) -> usize {
        self.leaf_class[self.leaf_index(x)]
    }

    /// Number of edges on the tree path between two leaves.
    pub fn leaf_distance(&self, leaf_a: usize, leaf_b: usize) -> u32 {
        if leaf_a == leaf_b {
            return 0;
        }
        let (mut a, mut b) = (self.leaf_nodes[leaf_a], self.leaf_nodes[leaf_b]);
        let mut edges = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
            edges += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
            edges += 1;
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
            edges += 2;
        }
        edges
    }

    /// Builds a tree directly from nodes rooted at index 0. Mostly useful
    /// for tests and hand-made fixtures.
    pub fn from_nodes(nodes: Vec<Node>, n_classes: usize) -> Self {
        let mut parent = vec![NO_PARENT; nodes.len()];
        let mut depth = vec![0u32; nodes.len()];
        let mut leaves: Vec<(usize, usize)> = Vec::new();
        let mut used = BTreeSet::new();
        let mut stack = vec![Self::ROOT];
        while let Some(at) = stack.pop() {
            match &nodes[at] {
                Node::Split {
                    feature, left, right, ..
                } => {
                    used.insert(*feature);
                    for &child in [left, right] {
                        parent[child] = at;
                        depth[child] = depth[at] + 1;
                        stack.push(child);
                    }
                }
                Node::Leaf { leaf_id, .. } => leaves.push((*leaf_id, at)),
            }
        }
        leaves.sort_unstable();
        let leaf_nodes: Vec<usize> = leaves.into_iter().map(|(_, node)| node).collect();
        let leaf_class = leaf_nodes
            .iter()
            .map(|&node| match &nodes[node] {
                Node::Leaf { counts, .. } => majority(counts, n_classes),
                Node::Split { .. } => unreachable!(),
            })
            .collect();
        RandomTree {
            nodes,
            parent,
            depth,
            leaf_nodes,
            leaf_class,
            used_features: used.into_iter().collect(),
        }
    }
}

/// Index of the largest count, lowest index on ties.
pub(crate) fn majority(counts: &[u32], n_classes: usize) -> usize {
    let mut best = 0;
    for c in 1..n_classes.min(counts.len()) {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Induction
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    /// Σ_c n_lc²/n_l + Σ_c n_rc²/n_r; larger is a purer partition.
    score: f64,
    /// Gini decrease is strictly positive.
    improves: bool,
}

struct Grower<'a> {
    data: &'a TrainingSet,
    mtry: usize,
    /// (value, label) buffer reused by every split search.
    scratch: Vec<(f64, usize)>,
    left_counts: Vec<u64>,
    right_counts: Vec<u64>,
}

impl Grower<'_> {
    /// Best split of `samples` over `features`, scanning features in the
    /// given (ascending) order and thresholds in ascending order; later
    /// candidates replace earlier ones only on a strictly better score.
    fn best_split(&mut self, samples: &[usize], features: &[usize], counts: &[u64]) -> Option<Split> {
        let total = samples.len() as u64;
        let parent_sq: u64 = counts.iter().map(|c| c * c).sum();
        let mut best: Option<Split> = None;
        for &f in features {
            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&i| (self.data.features.get(i, f), self.data.labels[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            self.left_counts.iter_mut().for_each(|c| *c = 0);
            self.right_counts.copy_from_slice(counts);
            let (mut left_sq, mut right_sq) = (0u64, parent_sq);
            for p in 0..self.scratch.len() - 1 {
                let (value, label) = self.scratch[p];
                let l = self.left_counts[label];
                let r = self.right_counts[label];
                left_sq += 2 * l + 1;
                right_sq -= 2 * r - 1;
                self.left_counts[label] = l + 1;
                self.right_counts[label] = r - 1;
                let next = self.scratch[p + 1].0;
                if value == next {
                    continue;
                }
                let n_left = (p + 1) as u64;
                let n_right = total - n_left;
                let score = left_sq as f64 / n_left as f64 + right_sq as f64 / n_right as f64;
                if best.is_none_or(|b| score > b.score) {
                    // Exact test of a strictly positive Gini decrease:
                    // left_sq/n_l + right_sq/n_r > parent_sq/n.
                    let lhs = (left_sq as u128 * n_right as u128 + right_sq as u128 * n_left as u128)
                        * total as u128;
                    let rhs = parent_sq as u128 * n_left as u128 * n_right as u128;
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(value, next),
                        score,
                        improves: lhs > rhs,
                    });
                }
            }
        }
        best
    }

    fn choose_split(&mut self, samples: &[usize], counts: &[u64], rng: &mut impl Rng) -> Option<Split> {
        let m = self.data.n_features();
        let mut sampled = index::sample(rng, m, self.mtry).into_vec();
        sampled.sort_unstable();
        let sampled_best = self.best_split(samples, &sampled, counts);
        if sampled_best.is_some_and(|s| s.improves) || self.mtry == m {
            // With mtry == m a non-improving split is still taken: the node
            // is impure and separable, so growth continues.
            return sampled_best;
        }
        let all: Vec<usize> = (0..m).collect();
        self.best_split(samples, &all, counts)
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t >= b || t < a {
        a
    } else {
        t
    }
}

/// Grows a tree to maximum depth on the (multi)set `samples`.
pub(crate) fn grow(data: &TrainingSet, mut samples: Vec<usize>, mtry: usize, rng: &mut impl Rng) -> RandomTree {
    let n_classes = data.n_classes;
    let mut grower = Grower {
        data,
        mtry,
        scratch: Vec::with_capacity(samples.len()),
        left_counts: vec![0; n_classes],
        right_counts: vec![0; n_classes],
    };
    let mut nodes: Vec<Node> = vec![Node::Leaf {
        leaf_id: 0,
        counts: Vec::new(),
    }];
    let mut n_leaves = 0;
    // (node index, sample range)
    let mut stack = vec![(RandomTree::ROOT, 0, samples.len())];
    while let Some((at, lo, hi)) = stack.pop() {
        let node_samples = &mut samples[lo..hi];
        let mut counts = vec![0u64; n_classes];
        for &i in node_samples.iter() {
            counts[data.labels[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure {
            None
        } else {
            grower.choose_split(node_samples, &counts, rng)
        };
        match split {
            None => {
                nodes[at] = Node::Leaf {
                    leaf_id: n_leaves,
                    counts: counts.iter().map(|&c| c as u32).collect(),
                };
                n_leaves += 1;
            }
            Some(split) => {
                let mid = partition(node_samples, |i| data.features.get(i, split.feature) <= split.threshold);
                let left = nodes.len();
                let right = left + 1;
                for _ in 0..2 {
                    nodes.push(Node::Leaf {
                        leaf_id: 0,
                        counts: Vec::new(),
                    });
                }
                nodes[at] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                // Right pushed first so the left subtree is expanded first.
                stack.push((right, lo + mid, hi));
                stack.push((left, lo, lo + mid));
            }
        }
    }
    RandomTree::from_nodes(nodes, n_classes)
}

/// Stable partition: elements satisfying `pred` first. Returns their count.
fn partition(items: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = items.iter().partition(|&&i| pred(i));
    let mid = yes.len();
    items[..mid].copy_from_slice(&yes);
    items[mid..].copy_from_slice(&no);
    mid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> RandomTree {
        RandomTree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    leaf_id: 0,
                    counts: vec![3, 0],
                },
                Node::Leaf {
                    leaf_id: 1,
                    counts: vec![1, 2],
                },
            ],
            2,
        )
    }

    #[test]
    fn threshold_goes_left_inclusive() {
        let t = stump();
        assert_eq!(t.leaf_index(&[0.3, 9.0]), 0);
        assert_eq!(t.leaf_index(&[0.5, 9.0]), 0);
        assert_eq!(t.leaf_index(&[0.7, 9.0]), 1);
        assert_eq!(t.predict(&[0.7, 0.0]), 1);
        assert_eq!(t.used_features(), &[0]);
    }

    #[test]
    fn single_leaf_tree() {
        let t = RandomTree::from_nodes(
            vec![Node::Leaf {
                leaf_id: 0,
                counts: vec![0, 4],
            }],
            2,
        );
        assert_eq!(t.leaf_index(&[123.0]), 0);
        assert!(t.used_features().is_empty());
        assert_eq!(t.leaf_distance(0, 0), 0);
    }

    #[test]
    fn leaf_distance_counts_edges() {
        let t = stump();
        assert_eq!(t.leaf_distance(0, 1), 2);
        assert_eq!(t.leaf_distance(1, 0), 2);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(t >= a && t < b);
        assert_eq!(midpoint(0.0, 1.0), 0.5);
    }

    #[test]
    fn majority_breaks_ties_low() {
        assert_eq!(majority(&[2, 2, 1], 3), 0);
        assert_eq!(majority(&[0, 3, 3], 3), 1);
    }
}
