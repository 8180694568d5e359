use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::multiview::MultiViewDataset;

/// Dataset description: one numeric CSV per view (instances as rows) and a
/// single-column label file. Relative paths resolve against the manifest's
/// directory.
///
/// ```toml
/// name = "lsvt"
/// views = ["view1.csv", "view2.csv"]
/// labels = "labels.csv"
/// n = 126
/// q = 2
/// c = 2
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub views: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_names: Option<Vec<String>>,
    /// Optional for instances that are only predicted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Whether every CSV starts with a header row.
    #[serde(default)]
    pub header: bool,
    /// Explicit class list; fixes the class order and rejects unseen labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::validation(path, None, e.to_string()))?;
        let mut manifest: DatasetManifest =
            toml::from_str(&text).map_err(|e| Error::validation(path, None, e.to_string()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    /// Manifest whose relative paths resolve against `base_dir`.
    pub fn with_base_dir(mut self, base_dir: impl Into<PathBuf>) -> Self {
        self.base_dir = base_dir.into();
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    fn view_names(&self) -> Vec<String> {
        self.view_names.clone().unwrap_or_else(|| {
            self.views
                .iter()
                .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
                .collect()
        })
    }
}

/// A validated dataset together with the original class names.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub name: String,
    pub dataset: MultiViewDataset,
    pub class_names: Vec<String>,
}

impl LoadedDataset {
    /// Imbalance ratio: largest class count over smallest.
    pub fn imbalance_ratio(&self) -> f64 {
        let mut counts = vec![0usize; self.dataset.n_classes()];
        for &y in self.dataset.labels() {
            counts[y] += 1;
        }
        let max = counts.iter().copied().max().unwrap_or(0);
        let min = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(1);
        max as f64 / min as f64
    }
}

/// Reads and validates every file named in the manifest.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset> {
    let names = manifest.view_names();
    if names.len() != manifest.views.len() {
        return Err(Error::validation(
            &manifest.base_dir,
            None,
            format!("{} view names for {} views", names.len(), manifest.views.len()),
        ));
    }
    if manifest.views.is_empty() {
        return Err(Error::validation(&manifest.base_dir, None, "manifest lists no view"));
    }
    if let Some(q) = manifest.q {
        if q != manifest.views.len() {
            return Err(Error::validation(
                &manifest.base_dir,
                None,
                format!("declared q = {q} but {} view files are listed", manifest.views.len()),
            ));
        }
    }
    let views = manifest
        .views
        .iter()
        .map(|p| read_numeric_csv(&manifest.resolve(p), manifest.header))
        .collect::<Result<Vec<_>>>()?;

    let (labels, class_names) = match &manifest.labels {
        Some(p) => {
            let path = manifest.resolve(p);
            let raw = read_labels(&path, manifest.header)?;
            encode_labels(&path, &raw, manifest.classes.as_deref())?
        }
        None => {
            let n = views[0].rows();
            (vec![0; n], manifest.classes.clone().unwrap_or_else(|| vec!["?".into()]))
        }
    };
    let n = labels.len();
    if let Some(declared) = manifest.n {
        if declared != n {
            return Err(Error::validation(
                manifest.labels.as_deref().map_or(manifest.base_dir.clone(), |p| manifest.resolve(p)),
                None,
                format!("declared n = {declared} but found {n} instances"),
            ));
        }
    }
    for ((v, p), name) in views.iter().zip(&manifest.views).zip(&names) {
        if v.rows() != n {
            return Err(Error::validation(
                manifest.resolve(p),
                None,
                format!("view '{name}' has {} rows, expected {n}", v.rows()),
            ));
        }
    }
    if let Some(label_path) = &manifest.labels {
        if let Some(c) = manifest.c {
            if c != class_names.len() {
                return Err(Error::validation(
                    manifest.resolve(label_path),
                    None,
                    format!("declared c = {c} but labels hold {} classes", class_names.len()),
                ));
            }
        }
    }
    let n_classes = class_names.len();
    let dataset = MultiViewDataset::new(views, labels, n_classes, names)?;
    Ok(LoadedDataset {
        name: manifest.name.clone(),
        dataset,
        class_names,
    })
}

/// Writes one CSV per view, a label file and `<name>.toml` into `dir`;
/// returns the manifest path. Values are written with round-trip precision.
pub fn write_dataset(data: &MultiViewDataset, class_names: &[String], name: &str, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let write = |file: &str, body: String| {
        let p = dir.join(file);
        std::fs::write(&p, body).map_err(|e| Error::io(format!("writing {}", p.display()), e))
    };
    let mut views = Vec::with_capacity(data.n_views());
    for (v, view_name) in data.views().iter().zip(data.view_names()) {
        let file = format!("{name}_{view_name}.csv");
        let mut body = String::new();
        for row in v.row_iter() {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        write(&file, body)?;
        views.push(PathBuf::from(file));
    }
    let labels_file = format!("{name}_labels.csv");
    let mut body = String::new();
    for &y in data.labels() {
        body.push_str(&class_names[y]);
        body.push('\n');
    }
    write(&labels_file, body)?;
    let manifest = DatasetManifest {
        name: name.to_string(),
        views,
        view_names: Some(data.view_names().to_vec()),
        labels: Some(PathBuf::from(labels_file)),
        header: false,
        classes: Some(class_names.to_vec()),
        n: Some(data.n_instances()),
        q: Some(data.n_views()),
        c: Some(data.n_classes()),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join(format!("{name}.toml"));
    manifest.save(&path)?;
    Ok(path)
}

pub(crate) fn read_numeric_csv(path: &Path, header: bool) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::validation(path, None, e.to_string()))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::validation(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::validation(
                    path,
                    line,
                    format!("row has {} fields, expected {c}", record.len()),
                ))
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::validation(path, line, format!("field {} is not numeric: {cell:?}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::validation(path, line, format!("field {} is not finite", j + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::validation(path, None, "file holds no data row"))?;
    Matrix::from_vec(rows, cols, data)
}

fn read_labels(path: &Path, header: bool) -> Result<Vec<(String, Option<usize>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::validation(path, None, e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::validation(path, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 1 {
            return Err(Error::validation(path, line, format!("expected one label per row, got {} fields", record.len())));
        }
        out.push((record[0].to_string(), line));
    }
    if out.is_empty() {
        return Err(Error::validation(path, None, "label file is empty"));
    }
    Ok(out)
}

/// Maps raw labels to `0..C`. Without an explicit class list, classes are the
/// distinct labels sorted numerically when they all parse as numbers and
/// lexicographically otherwise.
fn encode_labels(path: &Path, raw: &[(String, Option<usize>)], classes: Option<&[String]>) -> Result<(Vec<usize>, Vec<String>)> {
    let class_names: Vec<String> = match classes {
        Some(c) => c.to_vec(),
        None => {
            let distinct: BTreeSet<&str> = raw.iter().map(|(s, _)| s.as_str()).collect();
            let mut names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
            if names.iter().all(|s| s.parse::<f64>().is_ok()) {
                names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
            }
            names
        }
    };
    let labels = raw
        .iter()
        .map(|(s, line)| {
            class_names
                .iter()
                .position(|c| c == s)
                .ok_or_else(|| Error::validation(path, *line, format!("label {s:?} is not a declared class")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((labels, class_names))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let raw: Vec<(String, Option<usize>)> = ["10", "2", "2", "1"].iter().map(|s| (s.to_string(), None)).collect();
        let (labels, names) = encode_labels(Path::new("x"), &raw, None).unwrap();
        assert_eq!(names, vec!["1", "2", "10"]);
        assert_eq!(labels, vec![2, 1, 1, 0]);
    }

    #[test]
    fn unseen_label_is_rejected() {
        let raw = vec![("a".to_string(), Some(3))];
        let err = encode_labels(Path::new("l.csv"), &raw, Some(&["b".to_string()])).unwrap_err();
        assert!(err.to_string().contains("l.csv:3"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "v.csv", "1,2\n3,x\n");
        let err = read_numeric_csv(&p, false).unwrap_err();
        assert!(matches!(err, Error::Validation { line: Some(2), .. }), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "v.csv", "1,2\n3\n");
        assert!(read_numeric_csv(&p, false).is_err());
    }

    #[test]
    fn row_mismatch_names_the_view() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "1\n2\n3\n");
        write(dir.path(), "b.csv", "1\n2\n");
        write(dir.path(), "y.csv", "0\n1\n1\n");
        let m: DatasetManifest = toml::from_str(
            r#"
            name = "t"
            views = ["a.csv", "b.csv"]
            labels = "y.csv"
            "#,
        )
        .unwrap();
        let err = load_dataset(&m.with_base_dir(dir.path())).unwrap_err();
        assert!(err.to_string().contains("view 'b'"), "{err}");
        assert!(err.is_data_error());
    }

    #[test]
    fn written_dataset_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let data = crate::synth::complementary_views(40, 3).unwrap();
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let path = write_dataset(&data, &names, "toy", dir.path()).unwrap();
        let loaded = load_dataset(&DatasetManifest::load(&path).unwrap()).unwrap();
        assert_eq!(loaded.dataset, data);
        assert_eq!(loaded.class_names, names);
    }

    #[test]
    fn declared_counts_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "1\n2\n3\n");
        write(dir.path(), "y.csv", "0\n1\n1\n");
        let ok: DatasetManifest = toml::from_str("name='t'\nviews=['a.csv']\nlabels='y.csv'\nn=3\nq=1\nc=2").unwrap();
        let loaded = load_dataset(&ok.with_base_dir(dir.path())).unwrap();
        assert_eq!(loaded.dataset.n_instances(), 3);
        assert_eq!(loaded.imbalance_ratio(), 2.0);
        let bad: DatasetManifest = toml::from_str("name='t'\nviews=['a.csv']\nlabels='y.csv'\nc=3").unwrap();
        assert!(load_dataset(&bad.with_base_dir(dir.path())).is_err());
    }
}
