//! End-to-end flows: training, evaluation and censoring, plus the model and
//! dataset file formats.

mod bundle;
mod manifest;
mod run_censor;
mod train;

pub use bundle::{KernelKind, ModelBundle, ModelConfig, BUNDLE_VERSION, SAMPLING_RATE, VIDEO_CAP_SECONDS};
pub use manifest::{load_pooled, DatasetManifest, EntrySource, ManifestEntry, ManifestKind, MediaEmbedding};
pub use run_censor::{run_censor, BundleClassifier, CensorOptions, CensorOutcome, SegmentClassifier};
pub use train::{
    cross_validate_pooled, effective_components, fit_model, fit_predict, run_eval, run_train, EvalReport,
    FittedModel, TrainOutcome, SAMPLES_PER_COMPONENT,
};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write every file to a temporary sibling first and rename them into
/// place only once all writes succeeded.
pub fn write_atomically(files: &[(&Path, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::Builder::new()
            .prefix(".vidcensor-")
            .tempfile_in(dir)
            .map_err(|e| Error::io(dir, e))?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| Error::io(tmp.path(), e))?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    }
    Ok(())
}
