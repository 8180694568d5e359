//! Dynamic selection over view subsets.
//!
//! The pool holds one forest per non-empty subset of views, trained on the
//! mean of the selected views' RFD matrices. For a test instance, each
//! candidate's region of competence is the `k` training rows closest to the
//! instance's fused representation under the candidate's own RFD; the
//! candidate with the best out-of-bag accuracy on that region predicts.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::{project, HardnessTable, Measure};
use crate::error::{Error, Result};
use crate::forest::RandomForest;
use crate::matrix::Matrix;
use crate::multiview::{
    full_mask_bits, fuse_projections, joint_forest_seed, joint_matrix, train_joint_forest, MultiViewDataset, ViewSpaces,
};
use crate::weighting::{WeightMethod, WeightVector};

/// Default size of the region of competence.
pub const DEFAULT_K: usize = 7;

/// Largest number of views accepted without an explicit override.
pub const DEFAULT_POOL_CAP: usize = 12;

/// Non-empty subset of views, bit `q` set when view `q` is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(u32);

impl SubsetMask {
    pub fn new(bits: u32, n_views: usize) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Parameter("a view subset must select at least one view".into()));
        }
        if bits > full_mask_bits(n_views) {
            return Err(Error::Parameter(format!("mask {bits:#b} selects views beyond {n_views}")));
        }
        Ok(SubsetMask(bits))
    }

    pub fn full(n_views: usize) -> Self {
        SubsetMask(full_mask_bits(n_views))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Position of this mask in the pool.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn contains(self, q: usize) -> bool {
        self.0 >> q & 1 == 1
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn views(self, n_views: usize) -> impl Iterator<Item = usize> {
        (0..n_views).filter(move |&q| self.contains(q))
    }

    /// `1/|S|` on the selected views, 0 elsewhere.
    pub fn weights(self, n_views: usize) -> WeightVector {
        let share = 1.0 / self.count() as f64;
        let w = (0..n_views).map(|q| if self.contains(q) { share } else { 0.0 }).collect();
        WeightVector::new(w, WeightMethod::Custom).expect("mask weights lie on the simplex")
    }
}

/// One classifier of the pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    mask: SubsetMask,
    forest: RandomForest,
    hardness: HardnessTable,
}

impl Candidate {
    pub fn mask(&self) -> SubsetMask {
        self.mask
    }

    pub fn forest(&self) -> &RandomForest {
        &self.forest
    }

    pub fn hardness(&self) -> &HardnessTable {
        &self.hardness
    }

    /// Joint matrix of the selected views; the forest's training features.
    pub fn joint(&self) -> &Matrix {
        self.forest.training().features()
    }
}

/// Pool construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolParams {
    /// Maximum number of views; the pool has `2^Q - 1` candidates.
    pub cap: usize,
}

impl Default for PoolParams {
    fn default() -> Self {
        PoolParams { cap: DEFAULT_POOL_CAP }
    }
}

/// All `2^Q - 1` view-subset candidates, indexed by [`SubsetMask::index`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidatePool {
    n_views: usize,
    candidates: Vec<Candidate>,
}

impl CandidatePool {
    pub fn n_views(&self) -> usize {
        self.n_views
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn get(&self, mask: SubsetMask) -> &Candidate {
        &self.candidates[mask.index()]
    }
}

/// Trains one forest per non-empty view subset.
///
/// Forests use the final-stage tree count and `mtry = ceil(sqrt(n))`; their
/// seeds depend on the mask only, so the all-views candidate is the very
/// forest a uniformly weighted [`crate::multiview::MultiViewModel`] trains.
pub fn generate_pool(spaces: &ViewSpaces, params: PoolParams) -> Result<CandidatePool> {
    let q = spaces.n_views();
    if q == 0 {
        return Err(Error::Parameter("no views".into()));
    }
    if q > params.cap {
        return Err(Error::Resource(format!(
            "{q} views give {} candidates; raise the pool cap above {} explicitly to allow it",
            (1u64 << q.min(63)) - 1,
            params.cap
        )));
    }
    let matrices = spaces.matrix_refs();
    let kappa = spaces.params().kappa;
    let seed = spaces.params().seed;
    let candidates = (1..=full_mask_bits(q))
        .into_par_iter()
        .map(|bits| {
            let mask = SubsetMask(bits);
            let joint = joint_matrix(&matrices, &mask.weights(q))?;
            let forest = train_joint_forest(joint.into_values(), spaces, joint_forest_seed(seed, bits))?;
            let hardness = HardnessTable::compute(&forest, kappa)?;
            Ok(Candidate { mask, forest, hardness })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidatePool { n_views: q, candidates })
}

/// Mean of the selected views' projections.
pub fn project_candidate(mask: SubsetMask, projections: &[Vec<f64>]) -> Vec<f64> {
    fuse_projections(projections, &mask.weights(projections.len()))
}

/// Indices of the `k` training rows of `candidate` closest to `x_proj`
/// under the candidate's RFD, nearest first (lower index on ties).
pub fn region_of_competence(candidate: &Candidate, x_proj: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = candidate.forest.training().n_instances();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("region size must be in 1..={n}, got {k}")));
    }
    let d = project(&candidate.forest, x_proj, Measure::Rfd(&candidate.hardness))?;
    let mut order: Vec<usize> = (0..n).collect();
    let cmp = |a: &usize, b: &usize| d[*a].total_cmp(&d[*b]).then(a.cmp(b));
    if k < n {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    Ok(order)
}

/// Out-of-bag accuracy on the region; `None` when no region instance has an
/// out-of-bag tree.
pub fn competence(candidate: &Candidate, region: &[usize]) -> Option<f64> {
    candidate.forest.oob_error(Some(region)).map(|e| 1.0 - e)
}

/// Local class accuracy with out-of-bag votes standing in for a validation
/// set: among region instances whose true class is `predicted`, the fraction
/// the candidate's out-of-bag vote also assigns to `predicted`.
pub fn lca_competence(candidate: &Candidate, region: &[usize], predicted: usize) -> Option<f64> {
    let labels = candidate.forest.training().labels();
    let (mut total, mut hits) = (0usize, 0usize);
    for &i in region.iter().filter(|&&i| labels[i] == predicted) {
        if let Some(p) = candidate.forest.oob_prediction(i) {
            total += 1;
            hits += usize::from(p == predicted);
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Competence estimate used for selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    OobAccuracy,
    Lca,
}

/// Direction of the selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Most competent candidate.
    #[default]
    MaxCompetence,
    /// Candidate with the *largest* out-of-bag error; debugging only.
    MaxError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcsConfig {
    pub k: usize,
    pub criterion: Criterion,
    pub selection: Selection,
}

impl Default for DcsConfig {
    fn default() -> Self {
        DcsConfig {
            k: DEFAULT_K,
            criterion: Criterion::default(),
            selection: Selection::default(),
        }
    }
}

/// Audit trail of one selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub prediction: usize,
    /// Bits of the selected mask.
    pub chosen: u32,
    /// No candidate had a defined competence; the all-views candidate was used.
    pub fallback: bool,
    /// Competence per candidate, in pool order.
    pub competences: Vec<Option<f64>>,
    /// Region of competence per candidate, in pool order.
    pub regions: Vec<Vec<usize>>,
}

/// Selects a candidate for an instance given its per-view projections.
pub fn select(pool: &CandidatePool, projections: &[Vec<f64>], config: &DcsConfig) -> Result<SelectionRecord> {
    if projections.len() != pool.n_views {
        return Err(Error::Structural(format!(
            "{} projections for a pool over {} views",
            projections.len(),
            pool.n_views
        )));
    }
    let mut fused = Vec::with_capacity(pool.len());
    let mut regions = Vec::with_capacity(pool.len());
    let mut competences = Vec::with_capacity(pool.len());
    for c in &pool.candidates {
        let x = project_candidate(c.mask, projections);
        let region = region_of_competence(c, &x, config.k)?;
        let score = match config.criterion {
            Criterion::OobAccuracy => competence(c, &region),
            Criterion::Lca => lca_competence(c, &region, c.forest.predict(&x)),
        };
        fused.push(x);
        regions.push(region);
        competences.push(score);
    }

    let mut best: Option<(usize, f64)> = None;
    for (idx, score) in competences.iter().enumerate() {
        let Some(score) = *score else { continue };
        let key = match config.selection {
            Selection::MaxCompetence => score,
            Selection::MaxError => 1.0 - score,
        };
        let better = match best {
            None => true,
            Some((b, bkey)) => {
                key > bkey || (key == bkey && pool.candidates[idx].mask.count() > pool.candidates[b].mask.count())
            }
        };
        if better {
            best = Some((idx, key));
        }
    }
    let (chosen_idx, fallback) = match best {
        Some((idx, _)) => (idx, false),
        None => (SubsetMask::full(pool.n_views).index(), true),
    };
    let chosen = &pool.candidates[chosen_idx];
    Ok(SelectionRecord {
        prediction: chosen.forest.predict(&fused[chosen_idx]),
        chosen: chosen.mask.bits(),
        fallback,
        competences,
        regions,
    })
}

/// Predicts one instance: projects it into every view space, then selects.
pub fn dcs_predict(
    pool: &CandidatePool,
    spaces: &ViewSpaces,
    x_views: &[&[f64]],
    config: &DcsConfig,
) -> Result<SelectionRecord> {
    select(pool, &spaces.project(x_views)?, config)
}

/// View spaces plus the candidate pool built from them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcsModel {
    spaces: Arc<ViewSpaces>,
    pool: CandidatePool,
    config: DcsConfig,
}

impl DcsModel {
    pub fn fit(spaces: Arc<ViewSpaces>, params: PoolParams, config: DcsConfig) -> Result<Self> {
        if config.k == 0 || config.k > spaces.n_instances() {
            return Err(Error::Parameter(format!(
                "region size must be in 1..={}, got {}",
                spaces.n_instances(),
                config.k
            )));
        }
        let pool = generate_pool(&spaces, params)?;
        Ok(DcsModel { spaces, pool, config })
    }

    pub fn spaces(&self) -> &Arc<ViewSpaces> {
        &self.spaces
    }

    pub fn pool(&self) -> &CandidatePool {
        &self.pool
    }

    pub fn config(&self) -> &DcsConfig {
        &self.config
    }

    pub fn with_config(mut self, config: DcsConfig) -> Self {
        self.config = config;
        self
    }

    pub fn predict(&self, x_views: &[&[f64]]) -> Result<SelectionRecord> {
        dcs_predict(&self.pool, &self.spaces, x_views, &self.config)
    }

    pub fn predict_dataset(&self, data: &MultiViewDataset) -> Result<Vec<SelectionRecord>> {
        let per_view = self.spaces.project_dataset(data)?;
        (0..data.n_instances())
            .into_par_iter()
            .map(|i| {
                let projections: Vec<Vec<f64>> = per_view.iter().map(|m| m.row(i).to_vec()).collect();
                select(&self.pool, &projections, &self.config)
            })
            .collect()
    }
}
