//! Synthetic multi-view datasets with known structure.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::multiview::MultiViewDataset;
use crate::seed::{rng_for, STREAM_SYNTH};

const COMPLEMENTARY: u64 = 1;
const RELEVANCE: u64 = 2;

/// Two views over four classes. View `v` separates classes `2v` and `2v + 1`
/// from each other and from the other pair, but cannot tell the other pair
/// apart; each view alone tops out near 75% while the views together
/// determine the class.
pub fn complementary_views(n: usize, seed: u64) -> Result<MultiViewDataset> {
    const C: usize = 4;
    const NOISE_DIMS: usize = 3;
    if n < 2 * C {
        return Err(Error::Parameter(format!("need at least {} instances, got {n}", 2 * C)));
    }
    let mut rng = rng_for(seed, &[STREAM_SYNTH, COMPLEMENTARY]);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % C).collect();
    let mut views = Vec::with_capacity(2);
    for v in 0..2 {
        let mut data = Vec::with_capacity(n * (2 + NOISE_DIMS));
        for &y in &labels {
            let own = y / 2 == v;
            let within = match (own, y % 2) {
                (true, 0) => -2.0,
                (true, _) => 2.0,
                (false, _) => 0.0,
            };
            let pair = if own { 2.0 } else { -2.0 };
            data.push(within + unit.sample(&mut rng));
            data.push(pair + unit.sample(&mut rng));
            for _ in 0..NOISE_DIMS {
                data.push(unit.sample(&mut rng));
            }
        }
        views.push(Matrix::from_vec(n, 2 + NOISE_DIMS, data)?);
    }
    MultiViewDataset::new(views, labels, C, vec!["first".into(), "second".into()])
}

/// Shape of [`instance_relevance`] data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceParams {
    pub n: usize,
    pub n_views: usize,
    pub n_classes: usize,
    /// Informative dimensions per view.
    pub signal_dims: usize,
    /// Pure-noise dimensions per view.
    pub noise_dims: usize,
    /// Distance between class centres, in noise standard deviations.
    pub separation: f64,
    /// Offset of the relevance marker between relevant and irrelevant instances.
    pub marker: f64,
    pub irrelevant: Irrelevant,
}

/// What a view shows for instances it is not informative about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Irrelevant {
    /// Signal drawn around the centre of a random class.
    Decoy,
    /// Standard normal noise.
    Noise,
    /// A constant value, as if the view were missing.
    Constant,
    /// An exact copy of one of a few random prototype vectors.
    Prototype(usize),
}

impl Default for RelevanceParams {
    fn default() -> Self {
        RelevanceParams {
            n: 400,
            n_views: 3,
            n_classes: 4,
            signal_dims: 2,
            noise_dims: 2,
            separation: 2.0,
            marker: 3.0,
            irrelevant: Irrelevant::Prototype(3),
        }
    }
}

/// Instance-dependent view relevance. Instances are split into `n_views`
/// disjoint groups (halves for two views); view `v` carries class
/// information only for group `v`. What the view shows for the remaining
/// instances is set by [`Irrelevant`]; the default copies one of three
/// label-free prototype vectors, like a sensor stuck on a few default
/// readings. Relevant rows also get a shifted marker dimension.
pub fn instance_relevance(params: RelevanceParams, seed: u64) -> Result<MultiViewDataset> {
    let RelevanceParams {
        n,
        n_views,
        n_classes,
        signal_dims,
        noise_dims,
        separation,
        marker,
        irrelevant,
    } = params;
    if n_views == 0 || n_classes < 2 || signal_dims == 0 {
        return Err(Error::Parameter("need at least one view, two classes and one signal dimension".into()));
    }
    if n < 2 * n_views * n_classes {
        return Err(Error::Parameter(format!("{n} instances are too few for {n_views} groups of {n_classes} classes")));
    }
    let mut rng = rng_for(seed, &[STREAM_SYNTH, RELEVANCE]);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    let groups: Vec<usize> = (0..n).map(|i| (i / n_classes) % n_views).collect();
    let centres: Vec<Vec<Vec<f64>>> = (0..n_views)
        .map(|_| {
            (0..n_classes)
                .map(|c| {
                    (0..signal_dims)
                        .map(|d| if d == c % signal_dims { separation * (1 + c / signal_dims) as f64 } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect();
    let dim = signal_dims + noise_dims + 1;
    let mut views = Vec::with_capacity(n_views);
    for (v, view_centres) in centres.iter().enumerate() {
        let prototypes: Vec<Vec<f64>> = match irrelevant {
            Irrelevant::Prototype(p) => (0..p.max(1))
                .map(|_| (0..dim).map(|_| 2.0 * unit.sample(&mut rng)).collect())
                .collect(),
            _ => Vec::new(),
        };
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            let relevant = groups[i] == v;
            if !relevant && irrelevant == Irrelevant::Constant {
                data.extend(std::iter::repeat_n(0.0, dim));
                continue;
            }
            if !relevant && !prototypes.is_empty() {
                data.extend_from_slice(&prototypes[rng.gen_range(0..prototypes.len())]);
                continue;
            }
            let class = if relevant { labels[i] } else { rng.gen_range(0..n_classes) };
            for &c in &view_centres[class] {
                let c = if relevant || irrelevant == Irrelevant::Decoy { c } else { 0.0 };
                data.push(c + unit.sample(&mut rng));
            }
            for _ in 0..noise_dims {
                data.push(unit.sample(&mut rng));
            }
            data.push(if relevant { marker } else { 0.0 } + unit.sample(&mut rng));
        }
        views.push(Matrix::from_vec(n, dim, data)?);
    }
    let names = (0..n_views).map(|v| format!("view{}", v + 1)).collect();
    MultiViewDataset::new(views, labels, n_classes, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complementary_shape() {
        let d = complementary_views(400, 1).unwrap();
        assert_eq!(d.n_instances(), 400);
        assert_eq!(d.n_views(), 2);
        assert_eq!(d.n_classes(), 4);
        assert_eq!(d, complementary_views(400, 1).unwrap());
        assert_ne!(d, complementary_views(400, 2).unwrap());
    }

    #[test]
    fn relevance_shape() {
        let d = instance_relevance(RelevanceParams::default(), 1).unwrap();
        assert_eq!(d.n_instances(), 400);
        assert_eq!(d.n_views(), 3);
        assert_eq!(d.dims(), vec![5, 5, 5]);
    }
}
