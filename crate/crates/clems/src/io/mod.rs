//! Dataset ingestion (Mulan ARFF + XML label header, plain CSV fallback)
//! and model persistence.

pub mod arff;
mod load;
mod model_file;

pub use load::{load_csv, load_mulan, load_mulan_multi, load_predictions_csv, parse_labels_xml};
pub use model_file::{load_model, save_model, MODEL_FORMAT_VERSION};
