//! Scene data: NeRF-synthetic-style dataset IO, procedural analytic scenes,
//! and the dense-march oracle renderer that produces ground truth for them.

mod analytic;
mod dataset;
pub mod images;
mod oracle;

pub use analytic::{generate_scene, AnalyticScene, Primitive, SceneSpec};
pub use dataset::{load_dataset, orbit_cameras, subsample_views, write_dataset, Dataset, View};
pub use oracle::{oracle_render, oracle_views};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("missing camera manifest {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest: {0}")]
    BadManifest(String),
    #[error("frame {index}: transform is not a rigid camera-to-world matrix ({detail})")]
    BadMatrix { index: usize, detail: String },
    #[error("missing image file {0}")]
    MissingImage(PathBuf),
    #[error("image error: {0}")]
    Image(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene spec requests no primitives")]
    EmptySpec,
    #[error("view count {count} outside 1..={max}")]
    CountOutOfRange { count: usize, max: usize },
    #[error(transparent)]
    Render(#[from] crate::renderer::RenderError),
}
