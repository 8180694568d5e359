//! Multi-view learning in the joint dissimilarity space.
//!
//! Each view gets its own forest and RFD matrix ([`ViewSpaces`]); the
//! matrices are fused with a [`WeightVector`] into one joint matrix whose rows
//! become the training set of a final forest ([`MultiViewModel`]). Prediction
//! projects a new instance into every view space, fuses the projections with
//! the same weights and classifies the result.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dissim::{build_matrix, project, DissimilarityMatrix, HardnessTable, Measure, MeasureTag, Rows, DEFAULT_KAPPA};
use crate::error::{Error, Result};
use crate::forest::{ceil_sqrt, ForestParams, RandomForest, TrainingSet};
use crate::matrix::Matrix;
use crate::seed::{derive_seed, STREAM_FINAL, STREAM_VIEW};
use crate::weighting::WeightVector;

/// Q views of the same n instances plus their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    labels: Vec<usize>,
    n_classes: usize,
    view_names: Vec<String>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Matrix>, labels: Vec<usize>, n_classes: usize, view_names: Vec<String>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Structural("a multi-view dataset needs at least one view".into()));
        }
        if view_names.len() != views.len() {
            return Err(Error::Structural(format!(
                "{} view names for {} views",
                view_names.len(),
                views.len()
            )));
        }
        let n = labels.len();
        for (v, name) in views.iter().zip(&view_names) {
            if v.rows() != n {
                return Err(Error::Structural(format!(
                    "view '{name}' has {} instances, labels have {n}",
                    v.rows()
                )));
            }
            if v.cols() == 0 {
                return Err(Error::Structural(format!("view '{name}' has no features")));
            }
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::InvalidTask(format!(
                "label {y} of instance {i} is outside 0..{n_classes}"
            )));
        }
        Ok(MultiViewDataset {
            views,
            labels,
            n_classes,
            view_names,
        })
    }

    /// Unlabelled instances for prediction; labels are set to 0.
    pub fn unlabelled(views: Vec<Matrix>, n_classes: usize, view_names: Vec<String>) -> Result<Self> {
        let n = views.first().map_or(0, Matrix::rows);
        Self::new(views, vec![0; n], n_classes.max(1), view_names)
    }

    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, q: usize) -> &Matrix {
        &self.views[q]
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Feature dimension of each view.
    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    /// Views of instance `i`.
    pub fn instance(&self, i: usize) -> Vec<&[f64]> {
        self.views.iter().map(|v| v.row(i)).collect()
    }

    /// Same instance subset, in the given order, in every view.
    pub fn subset(&self, indices: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            views: self.views.iter().map(|v| v.select_rows(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            view_names: self.view_names.clone(),
        }
    }

    /// Views reduced to the given indices, e.g. to drop or reorder views.
    pub fn select_views(&self, views: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            views: views.iter().map(|&q| self.views[q].clone()).collect(),
            labels: self.labels.clone(),
            n_classes: self.n_classes,
            view_names: views.iter().map(|&q| self.view_names[q].clone()).collect(),
        }
    }

    pub fn training_set(&self, q: usize) -> Result<TrainingSet> {
        TrainingSet::new(self.views[q].clone(), self.labels.clone(), self.n_classes)
    }
}

/// Pipeline hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineParams {
    /// Trees per view forest.
    pub view_trees: usize,
    /// Trees of the forest(s) trained on joint matrices.
    pub final_trees: usize,
    pub kappa: usize,
    pub seed: u64,
}

impl PipelineParams {
    pub fn new(trees: usize, seed: u64) -> Self {
        PipelineParams {
            view_trees: trees,
            final_trees: trees,
            kappa: DEFAULT_KAPPA,
            seed,
        }
    }
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams::new(512, 0)
    }
}

/// Seed of the forest trained on the joint matrix of the views in `mask`.
/// The all-views mask is shared by the static models and the all-views
/// selection candidate so that both train the same forest.
pub(crate) fn joint_forest_seed(seed: u64, mask_bits: u32) -> u64 {
    derive_seed(seed, &[STREAM_FINAL, u64::from(mask_bits)])
}

pub(crate) fn full_mask_bits(q: usize) -> u32 {
    if q >= 32 {
        u32::MAX
    } else {
        (1u32 << q) - 1
    }
}

/// Per-view forests, hardness tables and RFD matrices over one training set.
///
/// Every combination method consumes the same `ViewSpaces`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewSpaces {
    forests: Vec<RandomForest>,
    hardness: Vec<HardnessTable>,
    matrices: Vec<DissimilarityMatrix>,
    labels: Vec<usize>,
    n_classes: usize,
    view_names: Vec<String>,
    params: PipelineParams,
}

impl ViewSpaces {
    /// Trains one forest per view with `mtry = ceil(sqrt(m_q))` and builds
    /// its RFD matrix over the training instances.
    pub fn build(dataset: &MultiViewDataset, params: PipelineParams) -> Result<Self> {
        let per_view: Vec<(RandomForest, HardnessTable, DissimilarityMatrix)> = (0..dataset.n_views())
            .into_par_iter()
            .map(|q| {
                let name = &dataset.view_names()[q];
                let annotate = |e: Error| annotate_view(e, name);
                let data = Arc::new(dataset.training_set(q).map_err(annotate)?);
                let forest_params = ForestParams::sqrt_mtry(
                    params.view_trees,
                    data.n_features(),
                    derive_seed(params.seed, &[STREAM_VIEW, q as u64]),
                );
                let forest = RandomForest::train(data, forest_params).map_err(annotate)?;
                let hardness = HardnessTable::compute(&forest, params.kappa).map_err(annotate)?;
                let matrix = build_matrix(&forest, Rows::Training, Measure::Rfd(&hardness)).map_err(annotate)?;
                Ok((forest, hardness, matrix))
            })
            .collect::<Result<_>>()?;
        let mut forests = Vec::with_capacity(per_view.len());
        let mut hardness = Vec::with_capacity(per_view.len());
        let mut matrices = Vec::with_capacity(per_view.len());
        for (f, h, m) in per_view {
            forests.push(f);
            hardness.push(h);
            matrices.push(m);
        }
        Ok(ViewSpaces {
            forests,
            hardness,
            matrices,
            labels: dataset.labels().to_vec(),
            n_classes: dataset.n_classes(),
            view_names: dataset.view_names().to_vec(),
            params,
        })
    }

    pub fn n_views(&self) -> usize {
        self.forests.len()
    }

    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn params(&self) -> PipelineParams {
        self.params
    }

    pub fn forests(&self) -> &[RandomForest] {
        &self.forests
    }

    pub fn forest_refs(&self) -> Vec<&RandomForest> {
        self.forests.iter().collect()
    }

    pub fn hardness(&self) -> &[HardnessTable] {
        &self.hardness
    }

    pub fn matrices(&self) -> &[DissimilarityMatrix] {
        &self.matrices
    }

    pub fn matrix_refs(&self) -> Vec<&DissimilarityMatrix> {
        self.matrices.iter().collect()
    }

    /// Feature dimension expected for each view.
    pub fn dims(&self) -> Vec<usize> {
        self.forests.iter().map(|f| f.training().n_features()).collect()
    }

    fn check_views(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != self.n_views() {
            return Err(Error::Structural(format!(
                "got {} views, the model has {}",
                dims.len(),
                self.n_views()
            )));
        }
        for (q, (&got, want)) in dims.iter().zip(self.dims()).enumerate() {
            if got != want {
                return Err(Error::Structural(format!(
                    "view '{}' has {got} features, expected {want}",
                    self.view_names[q]
                )));
            }
        }
        Ok(())
    }

    /// RFD representation of one instance in every view space.
    pub fn project(&self, x_views: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        self.check_views(&x_views.iter().map(|x| x.len()).collect::<Vec<_>>())?;
        self.forests
            .iter()
            .zip(&self.hardness)
            .zip(x_views)
            .map(|((f, h), x)| project(f, x, Measure::Rfd(h)))
            .collect()
    }

    /// RFD matrices of a batch of instances against the training instances,
    /// one `r x n` matrix per view.
    pub fn project_dataset(&self, data: &MultiViewDataset) -> Result<Vec<DissimilarityMatrix>> {
        self.check_views(&data.dims())?;
        self.forests
            .iter()
            .zip(&self.hardness)
            .zip(data.views())
            .map(|((f, h), x)| build_matrix(f, Rows::External(x), Measure::Rfd(h)))
            .collect()
    }

    /// SHA-256 over the forests and matrices; equal fingerprints mean two
    /// methods consumed identical view spaces.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (f, m) in self.forests.iter().zip(&self.matrices) {
            hasher.update(f.seed().to_le_bytes());
            for mask in f.bootstrap_masks() {
                hasher.update(mask.iter().map(|&b| u8::from(b)).collect::<Vec<_>>());
            }
            for t in f.trees() {
                hasher.update((t.nodes().len() as u64).to_le_bytes());
            }
            for v in m.values().as_slice() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        format!("{:x}", hasher.finalize())
    }
}

fn annotate_view(e: Error, view: &str) -> Error {
    match e {
        Error::InvalidTask(m) => Error::InvalidTask(format!("view '{view}': {m}")),
        Error::Parameter(m) => Error::Parameter(format!("view '{view}': {m}")),
        Error::Structural(m) => Error::Structural(format!("view '{view}': {m}")),
        Error::Degenerate(m) => Error::Degenerate(format!("view '{view}': {m}")),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

#[inline]
fn accumulate(acc: &mut [f64], weight: f64, src: &[f64]) {
    for (a, &s) in acc.iter_mut().zip(src) {
        *a += weight * s;
    }
}

/// `Σ_q w_q D_q`, entrywise.
pub fn joint_matrix(matrices: &[&DissimilarityMatrix], weights: &WeightVector) -> Result<DissimilarityMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Structural("no matrices to combine".into()))?;
    if matrices.len() != weights.len() {
        return Err(Error::Structural(format!(
            "{} matrices but {} weights",
            matrices.len(),
            weights.len()
        )));
    }
    if matrices.iter().any(|m| !m.values().same_shape(first.values())) {
        return Err(Error::Structural("matrices to combine differ in shape".into()));
    }
    if matrices.iter().any(|m| m.col_ids() != first.col_ids() || m.row_ids() != first.row_ids()) {
        return Err(Error::Structural("matrices to combine differ in instance order".into()));
    }
    let mut values = Matrix::zeros(first.rows(), first.cols());
    for (m, &w) in matrices.iter().zip(weights.as_slice()) {
        accumulate(values.as_mut_slice(), w, m.values().as_slice());
    }
    // Rounding can push a convex combination of ones a hair above one.
    for v in values.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    DissimilarityMatrix::new(values, MeasureTag::Fused)?.with_ids(first.row_ids().to_vec(), first.col_ids().to_vec())
}

/// Weighted fusion of per-view projection vectors; same arithmetic as
/// [`joint_matrix`] applied to a single row.
pub fn fuse_projections(projections: &[Vec<f64>], weights: &WeightVector) -> Vec<f64> {
    let n = projections.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (p, &w) in projections.iter().zip(weights.as_slice()) {
        accumulate(&mut out, w, p);
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Statically weighted multi-view model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiViewModel {
    spaces: Arc<ViewSpaces>,
    weights: WeightVector,
    final_forest: RandomForest,
}

impl MultiViewModel {
    /// Trains view spaces and the final forest in one go. Uniform weights
    /// when `weights` is `None`.
    pub fn train(dataset: &MultiViewDataset, params: PipelineParams, weights: Option<WeightVector>) -> Result<Self> {
        let spaces = Arc::new(ViewSpaces::build(dataset, params)?);
        let weights = weights.unwrap_or_else(|| WeightVector::uniform(spaces.n_views()));
        Self::fit(spaces, weights)
    }

    /// Trains the final forest on the joint matrix of existing view spaces.
    pub fn fit(spaces: Arc<ViewSpaces>, weights: WeightVector) -> Result<Self> {
        if weights.len() != spaces.n_views() {
            return Err(Error::Structural(format!(
                "{} weights for {} views",
                weights.len(),
                spaces.n_views()
            )));
        }
        let joint = joint_matrix(&spaces.matrix_refs(), &weights)?;
        let final_forest = train_joint_forest(
            joint.into_values(),
            &spaces,
            joint_forest_seed(spaces.params.seed, full_mask_bits(spaces.n_views())),
        )?;
        Ok(MultiViewModel {
            spaces,
            weights,
            final_forest,
        })
    }

    pub fn spaces(&self) -> &Arc<ViewSpaces> {
        &self.spaces
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn final_forest(&self) -> &RandomForest {
        &self.final_forest
    }

    /// The joint matrix the final forest was trained on.
    pub fn joint_matrix(&self) -> DissimilarityMatrix {
        DissimilarityMatrix::new(self.final_forest.training().features().clone(), MeasureTag::Fused)
            .expect("joint matrix stays in [0, 1]")
    }

    /// Fused dissimilarity representation of one instance.
    pub fn represent(&self, x_views: &[&[f64]]) -> Result<Vec<f64>> {
        let projections = self.spaces.project(x_views)?;
        Ok(fuse_projections(&projections, &self.weights))
    }

    pub fn predict(&self, x_views: &[&[f64]]) -> Result<usize> {
        Ok(self.final_forest.predict(&self.represent(x_views)?))
    }

    pub fn predict_dataset(&self, data: &MultiViewDataset) -> Result<Vec<usize>> {
        let per_view = self.spaces.project_dataset(data)?;
        let fused = joint_matrix(&per_view.iter().collect::<Vec<_>>(), &self.weights)?;
        Ok(self.final_forest.predict_batch(fused.values()))
    }
}

/// Forest on the rows of a joint matrix, `mtry = ceil(sqrt(n))`.
pub(crate) fn train_joint_forest(joint: Matrix, spaces: &ViewSpaces, seed: u64) -> Result<RandomForest> {
    let n = joint.cols();
    let data = Arc::new(TrainingSet::new(joint, spaces.labels.clone(), spaces.n_classes)?);
    RandomForest::train(data, ForestParams::new(spaces.params.final_trees, ceil_sqrt(n), seed))
}
