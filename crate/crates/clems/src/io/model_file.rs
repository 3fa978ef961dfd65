//! Versioned model persistence. Models are stored as one self-describing
//! JSON document; numbers round-trip bitwise, so a reloaded model predicts
//! identically.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TrainedModel;

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u64,
    model: TrainedModel,
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    let envelope = Envelope {
        version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer(&mut writer, &envelope)
        .map_err(|e| Error::Corrupt(format!("failed to serialize model: {e}")))?;
    writer.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let text = fs::read_to_string(path.as_ref())?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Corrupt(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupt("missing or non-integer `version` field".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let envelope: Envelope =
        serde_json::from_value(value).map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(envelope.model)
}
