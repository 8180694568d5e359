use std::path::Path;

use rfdis::experiment::{
    load_dataset, run_on_datasets, stratified_indices, stratified_split, write_dataset, DatasetManifest,
    ExperimentConfig, LoadedDataset, Method,
};
use rfdis::synth::{complementary_views, instance_relevance, RelevanceParams};
use rfdis::{Error, Matrix, MultiViewDataset};

fn loaded(name: &str, dataset: MultiViewDataset) -> LoadedDataset {
    let class_names = (0..dataset.n_classes()).map(|c| c.to_string()).collect();
    LoadedDataset {
        name: name.into(),
        dataset,
        class_names,
    }
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        trees: 12,
        runs: 3,
        seed: 5,
        ..Default::default()
    }
}

fn datasets() -> Vec<LoadedDataset> {
    vec![
        loaded("complementary", complementary_views(64, 1).unwrap()),
        loaded(
            "relevance",
            instance_relevance(RelevanceParams { n: 72, ..Default::default() }, 2).unwrap(),
        ),
    ]
}

#[test]
fn report_aggregates_are_consistent() {
    let config = small_config();
    let report = run_on_datasets(&config, &datasets()).unwrap();
    assert_eq!(report.datasets.len(), 2);
    let m = Method::ALL.len() as f64;
    for d in &report.datasets {
        assert_eq!(d.runs.len(), 3);
        assert_eq!(d.methods.len(), Method::ALL.len());
        assert!((d.methods.iter().map(|s| s.rank).sum::<f64>() - m * (m + 1.0) / 2.0).abs() < 1e-9);
        for s in &d.methods {
            assert!((1.0..=m).contains(&s.rank));
            assert_eq!(s.accuracies.len(), 3);
            let per_run: Vec<f64> = d.runs.iter().map(|r| r.accuracy(s.method).unwrap()).collect();
            assert_eq!(per_run, s.accuracies);
            let mean = per_run.iter().sum::<f64>() / 3.0;
            let var = per_run.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0;
            assert!((s.mean - mean).abs() < 1e-9);
            assert!((s.std - var.sqrt()).abs() < 1e-9);
            assert!((0.0..=100.0).contains(&s.mean));
        }
        for (r, run) in d.runs.iter().enumerate() {
            assert_eq!(run.run, r);
            assert_eq!(run.seed, rfdis::experiment::run_seed(5, r));
            let fingerprint = &run.methods[0].spaces;
            assert!(run.methods.iter().all(|o| &o.spaces == fingerprint));
            let dcs = run.methods.iter().find(|o| o.method == Method::DcsRfd).unwrap();
            assert_eq!(dcs.transcript.as_ref().unwrap().len(), run.n_test);
        }
    }
    for r in &report.average_ranks {
        let expected = report.datasets.iter().map(|d| d.summary(r.method).unwrap().rank).sum::<f64>() / 2.0;
        assert!((r.rank - expected).abs() < 1e-12);
    }
    assert_eq!(report.comparisons.len(), Method::ALL.len() - 1);
    for c in &report.comparisons {
        assert_eq!(c.baseline, Method::Avg);
        assert_eq!(c.test.wins + c.test.ties + c.test.losses, 2);
    }
}

#[test]
fn report_is_reproducible_and_written_in_both_formats() {
    let mut config = small_config();
    config.methods = vec![Method::Avg, Method::DcsRfd];
    let a = run_on_datasets(&config, &datasets()).unwrap();
    let b = run_on_datasets(&config, &datasets()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = a.save(&dir.path().join("report")).unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,method,runs,mean_accuracy,std_accuracy,rank");
    assert_eq!(lines.len(), 1 + 2 * 2);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[2], "3");
    assert!(row[3..].iter().all(|v| v.split('.').nth(1).map(str::len) == Some(4)));
    let back: rfdis::RunReport = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn duplicated_view_adds_nothing() {
    let single = complementary_views(120, 4).unwrap().select_views(&[0]);
    let doubled = MultiViewDataset::new(
        vec![single.view(0).clone(), single.view(0).clone()],
        single.labels().to_vec(),
        single.n_classes(),
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let config = ExperimentConfig {
        methods: vec![Method::Avg],
        trees: 32,
        runs: 10,
        ..Default::default()
    };
    let report = run_on_datasets(&config, &[loaded("single", single), loaded("doubled", doubled)]).unwrap();
    let one = report.dataset("single").unwrap().summary(Method::Avg).unwrap();
    let two = report.dataset("doubled").unwrap().summary(Method::Avg).unwrap();
    assert!((one.mean - two.mean).abs() < 4.0, "{} vs {}", one.mean, two.mean);
}

#[test]
fn split_sizes_follow_the_class_counts() {
    let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
    let split = stratified_indices(&labels, 2, 0.5, 9).unwrap();
    let count = |idx: &[usize], c: usize| idx.iter().filter(|&&i| labels[i] == c).count();
    assert_eq!((count(&split.train, 0), count(&split.train, 1)), (30, 20));
    let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert_eq!(split, stratified_indices(&labels, 2, 0.5, 9).unwrap());
    assert_ne!(split, stratified_indices(&labels, 2, 0.5, 10).unwrap());

    let data = complementary_views(40, 0).unwrap();
    let (train, test, s) = stratified_split(&data, 0.5, 3).unwrap();
    assert_eq!(train.n_instances() + test.n_instances(), 40);
    for (pos, &i) in s.train.iter().enumerate() {
        for q in 0..2 {
            assert_eq!(train.view(q).row(pos), data.view(q).row(i));
        }
    }
}

#[test]
fn run_failures_carry_run_and_stage() {
    let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
    let mut labels = vec![0; 9];
    labels[8] = 1;
    let data = MultiViewDataset::new(vec![Matrix::from_rows(&rows).unwrap()], labels, 2, vec!["v".into()]).unwrap();
    let err = run_on_datasets(&small_config(), &[loaded("lonely", data)]).unwrap_err();
    let Error::Run { dataset, run, stage, .. } = &err else { panic!("{err}") };
    assert_eq!(dataset, "lonely");
    assert_eq!(*run, 0);
    assert_eq!(*stage, "split");
    assert!(err.is_data_error());
}

fn write_manifest(dir: &Path) -> std::path::PathBuf {
    let data = complementary_views(40, 3).unwrap();
    let names: Vec<String> = ["w", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    write_dataset(&data, &names, "toy", dir).unwrap()
}

#[test]
fn manifests_round_trip_and_report_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(dir.path());
    let manifest = DatasetManifest::load(&path).unwrap();
    let loaded = load_dataset(&manifest).unwrap();
    assert_eq!(loaded.dataset, complementary_views(40, 3).unwrap());
    assert_eq!(loaded.class_names, vec!["w", "x", "y", "z"]);

    // drop the last row of the second view
    let view = manifest.resolve(&manifest.views[1]);
    let text = std::fs::read_to_string(&view).unwrap();
    let kept: Vec<&str> = text.lines().collect();
    std::fs::write(&view, kept[..kept.len() - 1].join("\n") + "\n").unwrap();
    let err = load_dataset(&manifest).unwrap_err();
    assert!(err.is_data_error());
    assert!(err.to_string().contains("second"), "{err}");

    std::fs::write(&view, text.replacen(',', ",oops,", 1)).unwrap();
    let err = load_dataset(&manifest).unwrap_err();
    assert!(err.is_data_error());
    assert!(err.to_string().contains(":1") || err.to_string().contains("line"), "{err}");

    assert!(DatasetManifest::load(&dir.path().join("missing.toml")).unwrap_err().is_data_error());
}
