//! Versioned on-disk model files (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dcs::{DcsModel, SelectionRecord};
use crate::error::{Error, Result};
use crate::experiment::Method;
use crate::multiview::{MultiViewDataset, MultiViewModel};

pub const MODEL_FORMAT: &str = "rfdis-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    /// One of the statically weighted methods.
    Static { method: Method, model: MultiViewModel },
    Dynamic { model: DcsModel },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub class_names: Vec<String>,
    pub model: SavedModel,
}

/// Prediction for one instance; `selection` is set for dynamic models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
}

impl ModelFile {
    pub fn new(class_names: Vec<String>, model: SavedModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            class_names,
            model,
        }
    }

    pub fn method(&self) -> Method {
        match &self.model {
            SavedModel::Static { method, .. } => *method,
            SavedModel::Dynamic { .. } => Method::DcsRfd,
        }
    }

    pub fn view_names(&self) -> &[String] {
        match &self.model {
            SavedModel::Static { model, .. } => model.spaces().view_names(),
            SavedModel::Dynamic { model } => model.spaces().view_names(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match &self.model {
            SavedModel::Static { model, .. } => model.spaces().dims(),
            SavedModel::Dynamic { model } => model.spaces().dims(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let model: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Serde(format!("{} is not a model file", path.display())));
        }
        if model.version != MODEL_VERSION {
            return Err(Error::Serde(format!(
                "model file version {} is not supported (expected {MODEL_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    pub fn predict(&self, data: &MultiViewDataset) -> Result<Vec<Prediction>> {
        let label = |c: usize| self.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        match &self.model {
            SavedModel::Static { model, .. } => Ok(model
                .predict_dataset(data)?
                .into_iter()
                .map(|class| Prediction {
                    class,
                    label: label(class),
                    selection: None,
                })
                .collect()),
            SavedModel::Dynamic { model } => Ok(model
                .predict_dataset(data)?
                .into_iter()
                .map(|r| Prediction {
                    class: r.prediction,
                    label: label(r.prediction),
                    selection: Some(r),
                })
                .collect()),
        }
    }
}
