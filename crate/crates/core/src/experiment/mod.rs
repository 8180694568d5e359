//! Experimental protocol: repeated stratified holdout over one or more
//! datasets, the five evaluated methods, aggregation and reporting.

mod manifest;
mod split;
pub mod stats;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use manifest::{load_dataset, write_dataset, DatasetManifest, LoadedDataset};
pub use split::{stratified_indices, stratified_split, Split};
pub use stats::{mean, midranks, sample_std, sign_test, SignTest};

use crate::dcs::{Criterion, DcsConfig, DcsModel, PoolParams, Selection, DEFAULT_K, DEFAULT_POOL_CAP};
use crate::dissim::DEFAULT_KAPPA;
use crate::error::{Error, Result};
use crate::multiview::{MultiViewDataset, MultiViewModel, PipelineParams, ViewSpaces};
use crate::seed::{derive_seed, STREAM_RUN};
use crate::weighting::{weights_3nn, weights_ka, weights_oob, OobRule, WeightVector};

pub const REPORT_FORMAT: &str = "rfdis-report";
pub const REPORT_VERSION: u32 = 1;
const SIGN_ALPHA: f64 = 0.05;
const TIE_TOL: f64 = 1e-12;

/// The evaluated combination strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "avg")]
    Avg,
    #[serde(rename = "sw_3nn")]
    Sw3nn,
    #[serde(rename = "sw_ka")]
    SwKa,
    #[serde(rename = "sw_oob")]
    SwOob,
    #[serde(rename = "dcs_rfd")]
    DcsRfd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Avg, Method::Sw3nn, Method::SwKa, Method::SwOob, Method::DcsRfd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Avg => "avg",
            Method::Sw3nn => "sw_3nn",
            Method::SwKa => "sw_ka",
            Method::SwOob => "sw_oob",
            Method::DcsRfd => "dcs_rfd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method {s:?}; expected one of avg, sw_3nn, sw_ka, sw_oob, dcs_rfd")))
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_trees() -> usize {
    512
}
fn default_runs() -> usize {
    10
}
fn default_fraction() -> f64 {
    0.5
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_kappa() -> usize {
    DEFAULT_KAPPA
}
fn default_cap() -> usize {
    DEFAULT_POOL_CAP
}
fn default_true() -> bool {
    true
}

/// Experiment settings, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub manifests: Vec<PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Trees per forest.
    #[serde(default = "default_trees")]
    pub trees: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub oob_rule: OobRule,
    #[serde(default)]
    pub criterion: Criterion,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default = "default_cap")]
    pub pool_cap: usize,
    /// Keep per-instance selection transcripts in the report.
    #[serde(default = "default_true")]
    pub transcripts: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            manifests: Vec::new(),
            methods: default_methods(),
            trees: default_trees(),
            runs: default_runs(),
            train_fraction: default_fraction(),
            k: default_k(),
            kappa: default_kappa(),
            seed: 0,
            oob_rule: OobRule::default(),
            criterion: Criterion::default(),
            selection: Selection::default(),
            pool_cap: default_cap(),
            transcripts: true,
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config; manifest paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::validation(path, None, e.to_string()))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::validation(path, None, e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for m in &mut config.manifests {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Parameter(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if self.runs == 0 {
            return Err(Error::Parameter("runs must be at least 1".into()));
        }
        if self.trees == 0 {
            return Err(Error::Parameter("trees must be at least 1".into()));
        }
        if self.k == 0 || self.kappa == 0 {
            return Err(Error::Parameter(format!("k and kappa must be at least 1, got {} and {}", self.k, self.kappa)));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("no method requested".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Parameter("a method is listed twice".into()));
        }
        Ok(())
    }

    pub fn pipeline_params(&self, seed: u64) -> PipelineParams {
        PipelineParams {
            view_trees: self.trees,
            final_trees: self.trees,
            kappa: self.kappa,
            seed,
        }
    }

    pub fn dcs_config(&self) -> DcsConfig {
        DcsConfig {
            k: self.k,
            criterion: self.criterion,
            selection: self.selection,
        }
    }
}

/// Seed of run `run` under master seed `seed`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    derive_seed(seed, &[STREAM_RUN, run as u64])
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// One DCS decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Index in the full dataset.
    pub instance: usize,
    pub chosen: u32,
    pub fallback: bool,
    pub competences: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    /// Test accuracy in percent.
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Fingerprint of the view spaces the method consumed.
    pub spaces: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<TranscriptEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDetail {
    pub run: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub methods: Vec<MethodOutcome>,
}

impl RunDetail {
    pub fn accuracy(&self, method: Method) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub rank: f64,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub n: usize,
    pub q: usize,
    pub c: usize,
    pub methods: Vec<MethodSummary>,
    pub runs: Vec<RunDetail>,
}

impl DatasetReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRank {
    pub method: Method,
    pub rank: f64,
}

/// Per-dataset comparison of a method against the uniform average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: Method,
    pub baseline: Method,
    pub test: SignTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    /// Accuracies are percentages; std uses the `n - 1` divisor.
    pub accuracy_unit: String,
    pub std: String,
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetReport>,
    pub average_ranks: Vec<AverageRank>,
    pub comparisons: Vec<Comparison>,
}

impl RunReport {
    pub fn dataset(&self, name: &str) -> Option<&DatasetReport> {
        self.datasets.iter().find(|d| d.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per dataset and method, numbers with four decimals.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let io = |e| Error::io("writing report", e);
        writeln!(out, "dataset,method,runs,mean_accuracy,std_accuracy,rank").map_err(io)?;
        for d in &self.datasets {
            for m in &d.methods {
                writeln!(
                    out,
                    "{},{},{},{:.4},{:.4},{:.4}",
                    d.name,
                    m.method,
                    m.accuracies.len(),
                    m.mean,
                    m.std,
                    m.rank
                )
                .map_err(io)?;
            }
        }
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn save(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let json = stem.with_extension("json");
        let csv = stem.with_extension("csv");
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(format!("writing {}", json.display()), e))?;
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(&csv, buf).map_err(|e| Error::io(format!("writing {}", csv.display()), e))?;
        Ok((json, csv))
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Loads every manifest of `config` and runs the protocol.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if config.manifests.is_empty() {
        return Err(Error::Parameter("no manifest given".into()));
    }
    let datasets = config
        .manifests
        .iter()
        .map(|p| load_dataset(&DatasetManifest::load(p)?))
        .collect::<Result<Vec<_>>>()?;
    run_on_datasets(config, &datasets)
}

/// Runs the protocol on already loaded datasets; `config.manifests` is ignored.
pub fn run_on_datasets(config: &ExperimentConfig, datasets: &[LoadedDataset]) -> Result<RunReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..config.runs).map(move |r| (d, r)))
        .collect();
    let details = jobs
        .par_iter()
        .map(|&(d, r)| run_once(&datasets[d], config, r))
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(datasets.len());
    for (d, data) in datasets.iter().enumerate() {
        let runs: Vec<RunDetail> = details[d * config.runs..(d + 1) * config.runs].to_vec();
        let accuracies: Vec<Vec<f64>> = config
            .methods
            .iter()
            .map(|&m| runs.iter().map(|r| r.accuracy(m).expect("every run evaluates every method")).collect())
            .collect();
        let means: Vec<f64> = accuracies.iter().map(|a| mean(a)).collect();
        let ranks = midranks(&means, TIE_TOL);
        let methods = config
            .methods
            .iter()
            .zip(accuracies)
            .zip(means.iter().zip(&ranks))
            .map(|((&method, acc), (&m, &rank))| MethodSummary {
                method,
                mean: m,
                std: sample_std(&acc),
                rank,
                accuracies: acc,
            })
            .collect();
        reports.push(DatasetReport {
            name: data.name.clone(),
            n: data.dataset.n_instances(),
            q: data.dataset.n_views(),
            c: data.dataset.n_classes(),
            methods,
            runs,
        });
    }

    let average_ranks = config
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| AverageRank {
            method,
            rank: reports.iter().map(|d| d.methods[i].rank).sum::<f64>() / reports.len() as f64,
        })
        .collect();

    let comparisons = if config.methods.contains(&Method::Avg) {
        config
            .methods
            .iter()
            .filter(|&&m| m != Method::Avg)
            .map(|&method| {
                let (mut wins, mut ties, mut losses) = (0, 0, 0);
                for d in &reports {
                    let a = d.summary(method).unwrap().mean;
                    let b = d.summary(Method::Avg).unwrap().mean;
                    if (a - b).abs() <= TIE_TOL {
                        ties += 1;
                    } else if a > b {
                        wins += 1;
                    } else {
                        losses += 1;
                    }
                }
                Comparison {
                    method,
                    baseline: Method::Avg,
                    test: sign_test(wins, ties, losses, SIGN_ALPHA),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(RunReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        accuracy_unit: "percent".into(),
        std: "sample (n-1)".into(),
        config: config.clone(),
        datasets: reports,
        average_ranks,
        comparisons,
    })
}

fn annotate<'a>(data: &'a LoadedDataset, run: usize, stage: &'static str) -> impl FnOnce(Error) -> Error + 'a {
    move |e| Error::Run {
        dataset: data.name.clone(),
        run,
        stage,
        source: Box::new(e),
    }
}

fn accuracy(predicted: impl IntoIterator<Item = usize>, truth: &[usize]) -> f64 {
    let hits = predicted.into_iter().zip(truth).filter(|(p, t)| p == *t).count();
    100.0 * hits as f64 / truth.len() as f64
}

/// One holdout run: split, build the shared view spaces once, evaluate each method.
pub fn run_once(data: &LoadedDataset, config: &ExperimentConfig, run: usize) -> Result<RunDetail> {
    let seed = run_seed(config.seed, run);
    let (train, test, split) =
        stratified_split(&data.dataset, config.train_fraction, seed).map_err(annotate(data, run, "split"))?;
    let spaces = Arc::new(
        ViewSpaces::build(&train, config.pipeline_params(seed)).map_err(annotate(data, run, "view spaces"))?,
    );
    let fingerprint = spaces.fingerprint();
    let consumed = |s: &Arc<ViewSpaces>| {
        if Arc::ptr_eq(s, &spaces) {
            fingerprint.clone()
        } else {
            s.fingerprint()
        }
    };

    let mut methods = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let outcome = evaluate(method, &spaces, &test, &split, config, &consumed)
            .map_err(annotate(data, run, method.name()))?;
        methods.push(outcome);
    }
    Ok(RunDetail {
        run,
        seed,
        n_train: train.n_instances(),
        n_test: test.n_instances(),
        methods,
    })
}

fn evaluate(
    method: Method,
    spaces: &Arc<ViewSpaces>,
    test: &MultiViewDataset,
    split: &Split,
    config: &ExperimentConfig,
    consumed: &dyn Fn(&Arc<ViewSpaces>) -> String,
) -> Result<MethodOutcome> {
    let weights = match method {
        Method::Avg => Some(WeightVector::uniform(spaces.n_views())),
        Method::Sw3nn => Some(weights_3nn(&spaces.matrix_refs(), spaces.labels())?),
        Method::SwKa => Some(weights_ka(&spaces.matrix_refs(), spaces.labels(), spaces.n_classes())?),
        Method::SwOob => Some(weights_oob(&spaces.forest_refs(), config.oob_rule)?),
        Method::DcsRfd => None,
    };
    match weights {
        Some(w) => {
            let model = MultiViewModel::fit(Arc::clone(spaces), w)?;
            let predicted = model.predict_dataset(test)?;
            Ok(MethodOutcome {
                method,
                accuracy: accuracy(predicted, test.labels()),
                weights: Some(model.weights().as_slice().to_vec()),
                spaces: consumed(model.spaces()),
                transcript: None,
            })
        }
        None => {
            let model = DcsModel::fit(Arc::clone(spaces), PoolParams { cap: config.pool_cap }, config.dcs_config())?;
            let records = model.predict_dataset(test)?;
            let acc = accuracy(records.iter().map(|r| r.prediction), test.labels());
            let transcript = config.transcripts.then(|| {
                records
                    .iter()
                    .zip(&split.test)
                    .map(|(r, &instance)| TranscriptEntry {
                        instance,
                        chosen: r.chosen,
                        fallback: r.fallback,
                        competences: r.competences.clone(),
                    })
                    .collect()
            });
            Ok(MethodOutcome {
                method,
                accuracy: acc,
                weights: None,
                spaces: consumed(model.spaces()),
                transcript,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn config_defaults_follow_protocol() {
        let c: ExperimentConfig = toml::from_str("manifests = ['a.toml']").unwrap();
        assert_eq!(c.trees, 512);
        assert_eq!(c.runs, 10);
        assert_eq!(c.train_fraction, 0.5);
        assert_eq!(c.k, 7);
        assert_eq!(c.kappa, 5);
        assert_eq!(c.methods.len(), 5);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = ExperimentConfig { runs: 0, ..Default::default() };
        assert!(c.validate().is_err());
        c.runs = 1;
        c.train_fraction = 1.0;
        assert!(c.validate().is_err());
        c.train_fraction = 0.5;
        c.methods = vec![Method::Avg, Method::Avg];
        assert!(c.validate().is_err());
    }
}
