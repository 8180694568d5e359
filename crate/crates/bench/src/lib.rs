//! Shared fixtures for the criterion benchmarks in `benches/`.

use std::sync::Arc;

use rfdis::synth::{self, RelevanceParams};
use rfdis::{MultiViewDataset, PipelineParams, TrainingSet, ViewSpaces};

/// Instance-relevance data with `n` instances and three views.
pub fn relevance(n: usize, seed: u64) -> MultiViewDataset {
    synth::instance_relevance(RelevanceParams { n, ..Default::default() }, seed).expect("valid synthetic parameters")
}

/// First view of [`relevance`] as a single-view training set.
pub fn single_view(n: usize, seed: u64) -> Arc<TrainingSet> {
    Arc::new(relevance(n, seed).training_set(0).expect("synthetic data is a valid task"))
}

pub fn spaces(n: usize, trees: usize, seed: u64) -> Arc<ViewSpaces> {
    Arc::new(ViewSpaces::build(&relevance(n, seed), PipelineParams::new(trees, seed)).expect("synthetic data trains"))
}
