pub mod censor;
pub mod embeddings;
pub mod error;
pub mod label;
pub mod linalg;
pub mod media_io;
pub mod media_model;
pub mod metrics;
pub mod pca;
pub mod pipeline;
pub mod svm;

pub use error::{Error, Result};
pub use label::{Label, Verdict};
