//! Random-forest dissimilarities.
//!
//! Three measures are provided, all built on the leaves instances land in:
//!
//! * plain: fraction of trees in which two instances fall in different leaves;
//! * path length: `1 - mean_k exp(-w * g_k)` with `g_k` the number of edges
//!   between the two leaves in tree `k`;
//! * RFD: the plain measure with tree `k` weighted by `1 - κDN_k(x_j)`, the
//!   hardness of the reference instance `x_j` in tree `k`'s feature subspace.
//!
//! Matrices always use the forest's training instances as columns
//! (references). RFD matrices are therefore not symmetric in general.

mod hardness;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{RandomForest, RandomTree};
use crate::matrix::Matrix;

pub use hardness::{kdn_hardness, HardnessTable, DEFAULT_KAPPA};

/// Default decay of the path-length proximity.
pub const DEFAULT_PATH_WEIGHT: f64 = 0.5;

/// Which measure produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureTag {
    Plain,
    PathLength { w: f64 },
    Rfd { kappa: usize },
    /// Convex combination of per-view matrices.
    Fused,
}

/// A measure together with what it needs to be evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    Plain,
    PathLength(f64),
    Rfd(&'a HardnessTable),
}

impl Measure<'_> {
    pub fn tag(&self) -> MeasureTag {
        match self {
            Measure::Plain => MeasureTag::Plain,
            Measure::PathLength(w) => MeasureTag::PathLength { w: *w },
            Measure::Rfd(h) => MeasureTag::Rfd { kappa: h.kappa() },
        }
    }
}

/// Rows of a dissimilarity matrix.
#[derive(Debug, Clone, Copy)]
pub enum Rows<'a> {
    /// The forest's own training instances (`R = T`).
    Training,
    /// Arbitrary instances in the forest's feature space.
    External(&'a Matrix),
}

/// `r x n` matrix of dissimilarities to the `n` training instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    values: Matrix,
    row_ids: Vec<usize>,
    col_ids: Vec<usize>,
    measure: MeasureTag,
}

impl DissimilarityMatrix {
    pub fn new(values: Matrix, measure: MeasureTag) -> Result<Self> {
        if values.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("dissimilarities must lie in [0, 1]".into()));
        }
        Ok(DissimilarityMatrix {
            row_ids: (0..values.rows()).collect(),
            col_ids: (0..values.cols()).collect(),
            values,
            measure,
        })
    }

    /// Relabels rows and columns, e.g. with indices into the original dataset.
    pub fn with_ids(mut self, row_ids: Vec<usize>, col_ids: Vec<usize>) -> Result<Self> {
        if row_ids.len() != self.values.rows() || col_ids.len() != self.values.cols() {
            return Err(Error::Structural("id count does not match matrix shape".into()));
        }
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn measure(&self) -> MeasureTag {
        self.measure
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[usize] {
        &self.col_ids
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn is_square(&self) -> bool {
        self.values.rows() == self.values.cols()
    }

    /// CSV with the column ids as header and the row id as first field.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend(self.col_ids.iter().map(|c| c.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("writing matrix CSV", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serde(e.to_string())
}

// ---------------------------------------------------------------------------
// Scalar measures
// ---------------------------------------------------------------------------

/// 0 if both instances land in the same leaf of `tree`, 1 otherwise.
pub fn tree_dissimilarity(tree: &RandomTree, x_a: &[f64], x_b: &[f64]) -> f64 {
    if tree.leaf_index(x_a) == tree.leaf_index(x_b) {
        0.0
    } else {
        1.0
    }
}

/// Mean of [`tree_dissimilarity`] over the forest (one minus the Breiman
/// proximity).
pub fn forest_dissimilarity(forest: &RandomForest, x_a: &[f64], x_b: &[f64]) -> f64 {
    let differ = forest
        .trees()
        .iter()
        .filter(|t| t.leaf_index(x_a) != t.leaf_index(x_b))
        .count();
    differ as f64 / forest.n_trees() as f64
}

#[inline]
fn path_term(w: f64, edges: u32) -> f64 {
    1.0 / (w * edges as f64).exp()
}

/// Path-length proximity, in `(0, 1]`.
pub fn path_length_proximity(forest: &RandomForest, x_a: &[f64], x_b: &[f64], w: f64) -> Result<f64> {
    check_path_weight(w)?;
    let total: f64 = forest
        .trees()
        .iter()
        .map(|t| path_term(w, t.leaf_distance(t.leaf_index(x_a), t.leaf_index(x_b))))
        .sum();
    Ok(total / forest.n_trees() as f64)
}

fn check_path_weight(w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("path weight must be positive, got {w}")))
    }
}

/// RFD between `x` and training instance `i`.
pub fn rfd(forest: &RandomForest, hardness: &HardnessTable, x: &[f64], i: usize) -> Result<f64> {
    let n = forest.training().n_instances();
    if i >= n {
        return Err(Error::Parameter(format!("instance {i} out of range 0..{n}")));
    }
    check_hardness(forest, hardness)?;
    let (mut num, mut den, mut differ) = (0.0, 0.0, 0usize);
    for (k, t) in forest.trees().iter().enumerate() {
        let w = hardness.weight(k, i);
        den += w;
        if t.leaf_index(x) != forest.train_leaf(k, i) {
            num += w;
            differ += 1;
        }
    }
    Ok(if den > 0.0 {
        num / den
    } else {
        differ as f64 / forest.n_trees() as f64
    })
}

fn check_hardness(forest: &RandomForest, hardness: &HardnessTable) -> Result<()> {
    if hardness.n_trees() != forest.n_trees() || hardness.n_instances() != forest.training().n_instances() {
        return Err(Error::Structural(format!(
            "hardness table is {}x{}, forest has {} trees over {} instances",
            hardness.n_trees(),
            hardness.n_instances(),
            forest.n_trees(),
            forest.training().n_instances()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// Dissimilarities between `rows` and the forest's training instances.
pub fn build_matrix(forest: &RandomForest, rows: Rows<'_>, measure: Measure<'_>) -> Result<DissimilarityMatrix> {
    match measure {
        Measure::PathLength(w) => check_path_weight(w)?,
        Measure::Rfd(h) => check_hardness(forest, h)?,
        Measure::Plain => {}
    }
    let external_leaves: Vec<Vec<u32>>;
    let row_leaves: Vec<&[u32]> = match rows {
        Rows::Training => (0..forest.n_trees()).map(|k| forest.train_leaves(k)).collect(),
        Rows::External(x) => {
            if x.cols() != forest.training().n_features() {
                return Err(Error::Structural(format!(
                    "rows have {} features, forest expects {}",
                    x.cols(),
                    forest.training().n_features()
                )));
            }
            external_leaves = forest
                .trees()
                .par_iter()
                .map(|t| x.row_iter().map(|r| t.leaf_index(r) as u32).collect())
                .collect();
            external_leaves.iter().map(Vec::as_slice).collect()
        }
    };
    let r = match rows {
        Rows::Training => forest.training().n_instances(),
        Rows::External(x) => x.rows(),
    };
    let kernel = RowKernel::new(forest, measure);
    let out: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|i| kernel.row(|k| row_leaves[k][i]))
        .collect();
    let values = Matrix::from_vec(r, forest.training().n_instances(), out.concat())?;
    Ok(DissimilarityMatrix {
        row_ids: (0..r).collect(),
        col_ids: (0..values.cols()).collect(),
        values,
        measure: measure.tag(),
    })
}

/// Dissimilarity representation of a single instance: one value per
/// training instance.
pub fn project(forest: &RandomForest, x: &[f64], measure: Measure<'_>) -> Result<Vec<f64>> {
    if x.len() != forest.training().n_features() {
        return Err(Error::Structural(format!(
            "instance has {} features, forest expects {}",
            x.len(),
            forest.training().n_features()
        )));
    }
    match measure {
        Measure::PathLength(w) => check_path_weight(w)?,
        Measure::Rfd(h) => check_hardness(forest, h)?,
        Measure::Plain => {}
    }
    let leaves = forest.leaves(x);
    Ok(RowKernel::new(forest, measure).row(|k| leaves[k]))
}

/// Evaluates one matrix row given the row instance's leaf in each tree.
///
/// Accumulation runs over trees in ascending order so that every entry is
/// reproducible bit for bit, whatever the row parallelism.
struct RowKernel<'a> {
    forest: &'a RandomForest,
    measure: Measure<'a>,
    /// RFD denominators per reference instance.
    weight_sums: Vec<f64>,
}

impl<'a> RowKernel<'a> {
    fn new(forest: &'a RandomForest, measure: Measure<'a>) -> Self {
        let n = forest.training().n_instances();
        let weight_sums = match measure {
            Measure::Rfd(h) => {
                let mut sums = vec![0.0; n];
                for k in 0..forest.n_trees() {
                    for (j, s) in sums.iter_mut().enumerate() {
                        *s += h.weight(k, j);
                    }
                }
                sums
            }
            _ => Vec::new(),
        };
        RowKernel {
            forest,
            measure,
            weight_sums,
        }
    }

    fn row(&self, leaf_of: impl Fn(usize) -> u32) -> Vec<f64> {
        let forest = self.forest;
        let n = forest.training().n_instances();
        let m = forest.n_trees() as f64;
        match self.measure {
            Measure::Plain => {
                let mut differ = vec![0u32; n];
                for k in 0..forest.n_trees() {
                    let leaf = leaf_of(k);
                    for (d, &l) in differ.iter_mut().zip(forest.train_leaves(k)) {
                        *d += u32::from(l != leaf);
                    }
                }
                differ.into_iter().map(|d| d as f64 / m).collect()
            }
            Measure::PathLength(w) => {
                let mut prox = vec![0.0; n];
                for (k, t) in forest.trees().iter().enumerate() {
                    let leaf = leaf_of(k) as usize;
                    for (p, &l) in prox.iter_mut().zip(forest.train_leaves(k)) {
                        *p += path_term(w, t.leaf_distance(leaf, l as usize));
                    }
                }
                prox.into_iter().map(|p| (1.0 - p / m).clamp(0.0, 1.0)).collect()
            }
            Measure::Rfd(h) => {
                let mut num = vec![0.0; n];
                let mut differ = vec![0u32; n];
                for k in 0..forest.n_trees() {
                    let leaf = leaf_of(k);
                    for (j, &l) in forest.train_leaves(k).iter().enumerate() {
                        if l != leaf {
                            num[j] += h.weight(k, j);
                            differ[j] += 1;
                        }
                    }
                }
                num.iter()
                    .zip(&self.weight_sums)
                    .zip(&differ)
                    .map(|((&a, &b), &d)| if b > 0.0 { a / b } else { d as f64 / m })
                    .collect()
            }
        }
    }
}
