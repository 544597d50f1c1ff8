use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HtmlLstm, ModelConfig};
use crate::encoder::{VocabFile, Vocabularies};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Versioned, self-contained model snapshot (JSON on disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab: VocabFile,
    pub classes: Vec<String>,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &HtmlLstm<T>) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            vocab: model.vocabs.to_file(),
            classes: model.classes.clone(),
            params: model
                .params
                .iter()
                .map(|(_, name, t)| NamedTensor {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn into_model<T: Scalar>(self) -> Result<HtmlLstm<T>> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion(self.format_version));
        }
        let vocabs = Vocabularies::from_file(&self.vocab)?;
        let mut store = ParamStore::new();
        for p in self.params {
            let data = p.data.into_iter().map(T::of).collect();
            store.insert(&p.name, Tensor::from_vec(&p.shape, data)?)?;
        }
        HtmlLstm::from_parts(self.config, vocabs, self.classes, store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}
