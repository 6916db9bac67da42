//! Configuration, checkpoint persistence, and the command implementations
//! behind the binary's subcommands.

mod checkpoint;
pub mod commands;
mod config;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointArray};
pub use commands::{
    build_views, cmd_ablate_collision, cmd_bench, cmd_eval, cmd_gen_scene, cmd_render, cmd_train,
    collision_estimate, AblationRow, BenchReport, EvalReport, RenderSummary, TrainSummary,
};
pub use config::{
    DatasetConfig, EncoderConfig, EncoderKind, FieldConfig, GeneralForm, RendererConfig,
    RunConfig, SceneConfig, TrainingConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint checksum mismatch: stored {stored:#018x}, computed {actual:#018x}")]
    ChecksumMismatch { stored: u64, actual: u64 },
    #[error("array {name}: expected {expected} values, got {got}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Encoding(#[from] crate::encoding::EncodingError),
    #[error(transparent)]
    Render(#[from] crate::renderer::RenderError),
    #[error(transparent)]
    Scene(#[from] crate::scenedata::SceneError),
    #[error(transparent)]
    Training(#[from] crate::training::TrainingError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("{0}")]
    Other(String),
}
