//! Static view weights.
//!
//! Every method maps the per-view dissimilarity matrices (or the forests
//! behind them) to a point of the probability simplex.

use serde::{Deserialize, Serialize};

use crate::dissim::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::forest::{majority, RandomForest};
use crate::matrix::Matrix;

/// How a weight vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMethod {
    Uniform,
    Sw3nn,
    SwKa,
    /// Alignment-proportional weights (diagnostic, may be negative-free only
    /// when every alignment is non-negative).
    SwKaLinear,
    SwOob,
    /// Out-of-bag *error* used directly as the weight.
    SwOobError,
    Custom,
}

/// Non-negative view weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    method: WeightMethod,
}

const SIMPLEX_TOL: f64 = 1e-9;

impl WeightVector {
    pub fn new(weights: Vec<f64>, method: WeightMethod) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("weight vector is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter(format!("weights must be finite and non-negative: {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Parameter(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector { weights, method })
    }

    pub fn uniform(q: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / q as f64; q],
            method: WeightMethod::Uniform,
        }
    }

    /// Normalizes non-negative scores; all-zero scores give uniform weights.
    pub fn from_scores(scores: &[f64], method: WeightMethod) -> Result<Self> {
        let sum: f64 = scores.iter().sum();
        if sum <= 0.0 {
            log::warn!("all view scores are zero for {method:?}; using uniform weights");
            return Ok(WeightVector {
                method,
                ..WeightVector::uniform(scores.len())
            });
        }
        WeightVector::new(scores.iter().map(|s| s / sum).collect(), method)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn method(&self) -> WeightMethod {
        self.method
    }
}

// ---------------------------------------------------------------------------
// SW_3NN
// ---------------------------------------------------------------------------

/// Leave-one-out k-NN accuracy using row `i` of `matrix` as the distances of
/// instance `i` to the others. Distance ties go to the lower index, vote ties
/// to the lower class.
pub fn loo_knn_accuracy(matrix: &DissimilarityMatrix, labels: &[usize], k: usize) -> Result<f64> {
    let n = matrix.rows();
    if !matrix.is_square() || labels.len() != n {
        return Err(Error::Structural(format!(
            "expected a square matrix matching {} labels, got {}x{}",
            labels.len(),
            matrix.rows(),
            matrix.cols()
        )));
    }
    if k == 0 || n <= k {
        return Err(Error::Parameter(format!("{k}-NN needs more than {k} instances, got {n}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut correct = 0usize;
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (matrix.get(i, j), j)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0u32; n_classes];
        for &(_, j) in &cand[..k] {
            votes[labels[j]] += 1;
        }
        if majority(&votes, n_classes) == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Weights proportional to the leave-one-out 3-NN accuracy of each view.
pub fn weights_3nn(matrices: &[&DissimilarityMatrix], labels: &[usize]) -> Result<WeightVector> {
    if labels.len() < 4 {
        return Err(Error::Parameter(format!(
            "3-NN weighting needs at least 4 instances, got {}",
            labels.len()
        )));
    }
    let acc = matrices
        .iter()
        .map(|m| loo_knn_accuracy(m, labels, 3))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::from_scores(&acc, WeightMethod::Sw3nn)
}

// ---------------------------------------------------------------------------
// SW_KA
// ---------------------------------------------------------------------------

fn frobenius(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Cosine of the two matrices under the Frobenius inner product.
pub fn kernel_alignment(k1: &Matrix, k2: &Matrix) -> Result<f64> {
    if !k1.same_shape(k2) {
        return Err(Error::Structural(format!(
            "cannot align a {}x{} with a {}x{} matrix",
            k1.rows(),
            k1.cols(),
            k2.rows(),
            k2.cols()
        )));
    }
    let n1 = frobenius(k1, k1);
    let n2 = frobenius(k2, k2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::Degenerate("kernel alignment of a zero matrix".into()));
    }
    Ok(frobenius(k1, k2) / (n1 * n2).sqrt())
}

/// Target similarity: 1 for same-class pairs, `-1/(C-1)` otherwise.
pub fn ideal_kernel(labels: &[usize], n_classes: usize) -> Result<Matrix> {
    if n_classes < 2 {
        return Err(Error::Parameter(format!("ideal kernel needs C >= 2, got {n_classes}")));
    }
    let off = -1.0 / (n_classes - 1) as f64;
    let n = labels.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k.set(i, j, if labels[i] == labels[j] { 1.0 } else { off });
        }
    }
    Ok(k)
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Alignment of each `S = 1 - D` with the ideal kernel.
pub fn view_alignments(matrices: &[&DissimilarityMatrix], labels: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    let target = ideal_kernel(labels, n_classes)?;
    matrices
        .iter()
        .map(|d| {
            if !d.is_square() || d.rows() != labels.len() {
                return Err(Error::Structural("alignment needs square matrices over the labels".into()));
            }
            kernel_alignment(&d.values().map(|v| 1.0 - v), &target)
        })
        .collect()
}

/// Softmax of the kernel alignments.
pub fn weights_ka(matrices: &[&DissimilarityMatrix], labels: &[usize], n_classes: usize) -> Result<WeightVector> {
    let a = view_alignments(matrices, labels, n_classes)?;
    WeightVector::new(softmax(&a), WeightMethod::SwKa)
}

/// Alignment-proportional weights. Fails when an alignment is negative.
pub fn weights_ka_linear(
    matrices: &[&DissimilarityMatrix],
    labels: &[usize],
    n_classes: usize,
) -> Result<WeightVector> {
    let a = view_alignments(matrices, labels, n_classes)?;
    if a.iter().any(|&v| v < 0.0) {
        return Err(Error::Degenerate(format!("negative kernel alignment in {a:?}")));
    }
    WeightVector::from_scores(&a, WeightMethod::SwKaLinear)
}

// ---------------------------------------------------------------------------
// SW_OOB
// ---------------------------------------------------------------------------

/// Which out-of-bag quantity becomes the weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OobRule {
    /// `1 - oob_error`.
    #[default]
    Accuracy,
    /// `oob_error` as written, kept for comparison.
    Error,
}

/// Weights from the out-of-bag estimate of each view's forest.
pub fn weights_oob(forests: &[&RandomForest], rule: OobRule) -> Result<WeightVector> {
    let scores: Vec<f64> = forests
        .iter()
        .enumerate()
        .map(|(q, f)| {
            let err = f.oob_error(None).unwrap_or_else(|| {
                log::warn!("view {q} has no out-of-bag instance; treating it as fully wrong");
                1.0
            });
            match rule {
                OobRule::Accuracy => 1.0 - err,
                OobRule::Error => err,
            }
        })
        .collect();
    let method = match rule {
        OobRule::Accuracy => WeightMethod::SwOob,
        OobRule::Error => WeightMethod::SwOobError,
    };
    WeightVector::from_scores(&scores, method)
}
