//! Random-forest dissimilarities for multi-view classification.
//!
//! The crate covers the whole pipeline: a from-scratch random forest
//! ([`forest`]), forest-based dissimilarity measures including the
//! hardness-weighted RFD ([`dissim`]), per-view dissimilarity spaces and their
//! static fusion ([`multiview`], [`weighting`]), dynamic selection of view
//! subsets ([`dcs`]) and the repeated-holdout experiment harness
//! ([`experiment`]).
//!
//! ```no_run
//! use rfdis::{synth, MultiViewModel, PipelineParams};
//!
//! let data = synth::complementary_views(400, 1)?;
//! let model = MultiViewModel::train(&data, PipelineParams::new(128, 7), None)?;
//! let predicted = model.predict_dataset(&data)?;
//! # Ok::<(), rfdis::Error>(())
//! ```

pub mod dcs;
pub mod dissim;
mod error;
pub mod experiment;
pub mod forest;
mod matrix;
pub mod multiview;
pub mod persist;
mod seed;
pub mod synth;
pub mod weighting;

pub use dcs::{CandidatePool, DcsConfig, DcsModel, PoolParams, SelectionRecord, SubsetMask};
pub use dissim::{build_matrix, project, DissimilarityMatrix, HardnessTable, Measure, MeasureTag, Rows};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Method, RunReport};
pub use forest::{ForestParams, RandomForest, RandomTree, TrainingSet};
pub use matrix::Matrix;
pub use multiview::{joint_matrix, MultiViewDataset, MultiViewModel, PipelineParams, ViewSpaces};
pub use seed::derive_seed;
pub use weighting::{WeightMethod, WeightVector};
