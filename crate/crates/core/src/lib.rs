//! Remaining-lifespan prediction from face photographs.
//!
//! An end-to-end toolchain: ingest biographical records and portrait
//! images from public knowledge-graph/encyclopedia sources, derive
//! remaining-lifespan labels, detect/align/crop faces, balance and
//! augment the dataset, fine-tune a face-embedding CNN with a staged
//! unfreezing schedule, and run error analyses and application studies
//! (cohort loss-of-life, intervention gain).

pub mod apps;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod facepipe;
pub mod ingest;
pub mod labeling;
pub mod manifest;
pub mod model;
pub mod plot;
pub mod raster;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use evaluate::EvaluationReport;
pub use facepipe::{FaceCrop, FaceDetection};
pub use ingest::PersonRecord;
pub use labeling::LabeledRecord;
pub use model::config::ModelConfig;
