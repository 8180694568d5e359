use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::multiview::MultiViewDataset;
use crate::seed::{rng_for, STREAM_SPLIT};

/// Train and test index sets, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split of `labels`: every class contributes
/// `ceil(fraction * n_c)` instances to the training side, drawn at random.
pub fn stratified_indices(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let mut rng = rng_for(seed, &[STREAM_SPLIT]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() == 1 {
            return Err(Error::InvalidTask(format!("class {c} has a single instance and cannot be stratified")));
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64) - 1e-9).ceil().max(0.0) as usize;
        let take = take.min(members.len());
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if test.is_empty() {
        return Err(Error::Parameter("split leaves no test instance".into()));
    }
    Ok(Split { train, test })
}

/// Splits a dataset; see [`stratified_indices`].
pub fn stratified_split(data: &MultiViewDataset, fraction: f64, seed: u64) -> Result<(MultiViewDataset, MultiViewDataset, Split)> {
    let split = stratified_indices(data.labels(), data.n_classes(), fraction, seed)?;
    Ok((data.subset(&split.train), data.subset(&split.test), split))
}
