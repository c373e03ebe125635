use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dummy::DummyModel;
use super::gbt::GbtModel;
use super::linear::LinearModel;
use crate::error::{Error, Result};
use crate::features::TfidfVocabulary;
use crate::TaskKind;

pub const DUMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "model")]
pub enum BaselineModel {
    Dummy(DummyModel),
    Linear(LinearModel),
    Gbt(GbtModel),
}

/// A fitted baseline together with the vocabulary it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub format_version: u32,
    pub language: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<TfidfVocabulary>,
    pub model: BaselineModel,
}

impl ModelDump {
    pub fn new(
        language: &str,
        task: TaskKind,
        vocabulary: Option<TfidfVocabulary>,
        model: BaselineModel,
    ) -> Self {
        ModelDump {
            format_version: DUMP_FORMAT_VERSION,
            language: language.to_string(),
            task,
            vocabulary,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ModelDump = serde_json::from_str(text)?;
        if dump.format_version != DUMP_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model dump version {} is not supported (expected {})",
                dump.format_version, DUMP_FORMAT_VERSION
            )));
        }
        Ok(dump)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
