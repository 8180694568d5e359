//! `rfdis` command-line interface.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when input data fails
//! validation and 3 on any other failure. Failures also print one line of
//! the form `rfdis: error kind=<kind> exit=<code>: <message>` on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rfdis::dcs::{DcsModel, PoolParams};
use rfdis::experiment::{
    load_dataset, run_experiment, run_seed, stratified_split, write_dataset, DatasetManifest, LoadedDataset,
};
use rfdis::persist::{ModelFile, SavedModel};
use rfdis::synth::{self, RelevanceParams};
use rfdis::weighting::{weights_3nn, weights_ka, weights_oob};
use rfdis::{Error, ExperimentConfig, Method, MultiViewModel, ViewSpaces, WeightVector};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "rfdis", version, about = "Random-forest dissimilarities for multi-view classification")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset manifest and the files it names.
    Validate { manifest: PathBuf },
    /// Train a model on the first dataset of a config and save it.
    Train {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Model file to write.
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Predict the instances described by a manifest (labels optional).
    Predict {
        model: PathBuf,
        instances: PathBuf,
        /// CSV file for the predictions (stdout by default).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the repeated-holdout protocol and write `<out>.json` and `<out>.csv`.
    Bench {
        /// Configs whose manifests are pooled; settings come from the first.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Holdout repetitions.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Export view matrices, weights and selection transcripts of one run.
    Inspect {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Which holdout run to rebuild.
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long, default_value = "inspect")]
        out: PathBuf,
    },
    /// Write a synthetic dataset in manifest format.
    Generate {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Complementary,
    Relevance,
}

/// Flags that override config values.
#[derive(Debug, Args)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Method(s) to run; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Trees per forest.
    #[arg(long)]
    trees: Option<usize>,
    /// Size of the region of competence.
    #[arg(long)]
    k: Option<usize>,
    /// Neighbours used for instance hardness.
    #[arg(long)]
    kappa: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if !self.method.is_empty() {
            config.methods = self
                .method
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(trees) = self.trees {
            config.trees = trees;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(kappa) = self.kappa {
            config.kappa = kappa;
        }
        config.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_data_error() => EXIT_DATA,
            CliError::Lib(_) => EXIT_RUNTIME,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) => e.kind(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn report_failure(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let message = err.message().replace('\n', " ");
    eprintln!("rfdis: error kind={} exit={code}: {message}", err.kind());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            return report_failure(&CliError::Usage(first.trim_start_matches("error: ").to_string()));
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();

    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_failure(&e),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { manifest } => validate(&manifest),
        Command::Train { config, overrides, out } => train(&config, &overrides, &out),
        Command::Predict { model, instances, out } => predict(&model, &instances, out.as_deref()),
        Command::Bench {
            configs,
            overrides,
            runs,
            out,
        } => bench(&configs, &overrides, runs, &out),
        Command::Inspect {
            config,
            overrides,
            run,
            out,
        } => inspect(&config, &overrides, run, &out),
        Command::Generate { kind, n, seed, out } => generate(kind, n, seed, &out),
    }
}

fn load_manifest(path: &Path) -> Result<LoadedDataset, CliError> {
    Ok(load_dataset(&DatasetManifest::load(path)?)?)
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    overrides.apply(&mut config)?;
    Ok(config)
}

fn first_dataset(config: &ExperimentConfig) -> Result<LoadedDataset, CliError> {
    let manifest = config
        .manifests
        .first()
        .ok_or_else(|| CliError::Usage("config lists no manifest".into()))?;
    load_manifest(manifest)
}

fn validate(manifest: &Path) -> Result<(), CliError> {
    let loaded = load_manifest(manifest)?;
    let d = &loaded.dataset;
    println!(
        "{}: n={} q={} c={} dims={:?} imbalance={:.2}",
        loaded.name,
        d.n_instances(),
        d.n_views(),
        d.n_classes(),
        d.dims(),
        loaded.imbalance_ratio()
    );
    Ok(())
}

fn static_weights(method: Method, spaces: &ViewSpaces, config: &ExperimentConfig) -> Result<WeightVector, Error> {
    match method {
        Method::Avg => Ok(WeightVector::uniform(spaces.n_views())),
        Method::Sw3nn => weights_3nn(&spaces.matrix_refs(), spaces.labels()),
        Method::SwKa => weights_ka(&spaces.matrix_refs(), spaces.labels(), spaces.n_classes()),
        Method::SwOob => weights_oob(&spaces.forest_refs(), config.oob_rule),
        Method::DcsRfd => unreachable!("dynamic selection has no static weights"),
    }
}

fn train(config: &Path, overrides: &Overrides, out: &Path) -> Result<(), CliError> {
    let config = load_config(config, overrides)?;
    let method = match config.methods.as_slice() {
        [m] => *m,
        [m, ..] if overrides.method.is_empty() => *m,
        _ => return Err(CliError::Usage("train takes a single --method".into())),
    };
    let loaded = first_dataset(&config)?;
    let spaces = Arc::new(ViewSpaces::build(&loaded.dataset, config.pipeline_params(config.seed))?);
    let model = match method {
        Method::DcsRfd => SavedModel::Dynamic {
            model: DcsModel::fit(spaces, PoolParams { cap: config.pool_cap }, config.dcs_config())?,
        },
        m => {
            let weights = static_weights(m, &spaces, &config)?;
            SavedModel::Static {
                method: m,
                model: MultiViewModel::fit(spaces, weights)?,
            }
        }
    };
    ModelFile::new(loaded.class_names, model).save(out)?;
    println!("{} model on {} written to {}", method, loaded.name, out.display());
    Ok(())
}

fn predict(model: &Path, instances: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = ModelFile::load(model)?;
    let mut manifest = DatasetManifest::load(instances)?;
    if manifest.classes.is_none() {
        manifest.classes = Some(model.class_names.clone());
    }
    let loaded = load_dataset(&manifest)?;
    if loaded.dataset.dims() != model.dims() {
        return Err(Error::Structural(format!(
            "instances have view dimensions {:?}, the model expects {:?}",
            loaded.dataset.dims(),
            model.dims()
        ))
        .into());
    }
    let predictions = model.predict(&loaded.dataset)?;

    let mut body = Vec::new();
    let dynamic = matches!(model.model, SavedModel::Dynamic { .. });
    let io = |e| Error::Io {
        context: "writing predictions".into(),
        source: e,
    };
    writeln!(body, "instance,class{}", if dynamic { ",chosen_views" } else { "" }).map_err(io)?;
    for (i, p) in predictions.iter().enumerate() {
        match &p.selection {
            Some(s) => writeln!(body, "{i},{},{:b}", p.label, s.chosen).map_err(io)?,
            None => writeln!(body, "{i},{}", p.label).map_err(io)?,
        }
    }
    match out {
        Some(path) => std::fs::write(path, body).map_err(io)?,
        None => std::io::stdout().write_all(&body).map_err(io)?,
    }
    if manifest.labels.is_some() {
        let hits = predictions
            .iter()
            .zip(loaded.dataset.labels())
            .filter(|(p, &y)| p.class == y)
            .count();
        eprintln!(
            "accuracy {:.4} ({hits}/{})",
            100.0 * hits as f64 / predictions.len() as f64,
            predictions.len()
        );
    }
    Ok(())
}

fn bench(configs: &[PathBuf], overrides: &Overrides, runs: Option<usize>, out: &Path) -> Result<(), CliError> {
    let mut config = load_config(&configs[0], overrides)?;
    for extra in &configs[1..] {
        config.manifests.extend(ExperimentConfig::load(extra)?.manifests);
    }
    if let Some(runs) = runs {
        config.runs = runs;
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let report = run_experiment(&config)?;
    let (json, csv) = report.save(out)?;
    let mut stdout = Vec::new();
    report.write_csv(&mut stdout)?;
    print!("{}", String::from_utf8_lossy(&stdout));
    eprintln!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

#[derive(Serialize)]
struct InspectSummary<'a> {
    dataset: &'a str,
    run: usize,
    seed: u64,
    train: &'a [usize],
    test: &'a [usize],
    view_names: &'a [String],
    fingerprint: String,
    weights: Vec<(Method, Vec<f64>)>,
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    instance: usize,
    truth: usize,
    prediction: usize,
    chosen: u32,
    fallback: bool,
    competences: &'a [Option<f64>],
    regions: &'a [Vec<usize>],
}

fn inspect(config: &Path, overrides: &Overrides, run: usize, out: &Path) -> Result<(), CliError> {
    let config = load_config(config, overrides)?;
    let loaded = first_dataset(&config)?;
    let seed = run_seed(config.seed, run);
    let (train, test, split) = stratified_split(&loaded.dataset, config.train_fraction, seed)?;
    let spaces = Arc::new(ViewSpaces::build(&train, config.pipeline_params(seed))?);
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        context: format!("creating {}", out.display()),
        source: e,
    })?;

    for (m, name) in spaces.matrices().iter().zip(spaces.view_names()) {
        let ids: Vec<usize> = split.train.clone();
        m.clone()
            .with_ids(ids.clone(), ids)?
            .save_csv(&out.join(format!("matrix_{name}.csv")))?;
    }
    let mut weights = Vec::new();
    for &method in config.methods.iter().filter(|&&m| m != Method::DcsRfd) {
        weights.push((method, static_weights(method, &spaces, &config)?.as_slice().to_vec()));
    }
    let summary = InspectSummary {
        dataset: &loaded.name,
        run,
        seed,
        train: &split.train,
        test: &split.test,
        view_names: spaces.view_names(),
        fingerprint: spaces.fingerprint(),
        weights,
    };
    write_file(&out.join("summary.json"), serde_json::to_string_pretty(&summary).map_err(Error::from)?)?;

    if config.methods.contains(&Method::DcsRfd) {
        let model = DcsModel::fit(Arc::clone(&spaces), PoolParams { cap: config.pool_cap }, config.dcs_config())?;
        let records = model.predict_dataset(&test)?;
        let mut lines = String::new();
        for ((r, &instance), &truth) in records.iter().zip(&split.test).zip(test.labels()) {
            let line = TranscriptLine {
                instance,
                truth,
                prediction: r.prediction,
                chosen: r.chosen,
                fallback: r.fallback,
                competences: &r.competences,
                regions: &r.regions,
            };
            lines.push_str(&serde_json::to_string(&line).map_err(Error::from)?);
            lines.push('\n');
        }
        write_file(&out.join("transcript.jsonl"), lines)?;
    }
    eprintln!("wrote inspection of run {run} to {}", out.display());
    Ok(())
}

fn write_file(path: &Path, body: String) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| {
        Error::Io {
            context: format!("writing {}", path.display()),
            source: e,
        }
        .into()
    })
}

fn generate(kind: SynthKind, n: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let (data, name) = match kind {
        SynthKind::Complementary => (synth::complementary_views(n, seed)?, "complementary"),
        SynthKind::Relevance => (
            synth::instance_relevance(RelevanceParams { n, ..Default::default() }, seed)?,
            "relevance",
        ),
    };
    let classes: Vec<String> = (0..data.n_classes()).map(|c| c.to_string()).collect();
    let path = write_dataset(&data, &classes, name, out)?;
    println!("{}", path.display());
    Ok(())
}
