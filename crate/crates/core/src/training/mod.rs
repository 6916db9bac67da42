//! Loss stack, hand-written reverse-mode gradients through the rendering
//! pipeline, the Adam loop, and the finite-difference gradient audit.

mod adam;
mod audit;
mod loss;
mod run;
mod step;

pub use adam::{AdamHyper, AdamState};
pub use audit::{finite_difference_audit, AuditOptions, AuditReport};
pub use loss::{
    loss_distortion, loss_distortion_backward, loss_distortion_naive, loss_opacity, loss_rgb,
    loss_total, opacity_entropy, opacity_entropy_grad, LossWeights, ENTROPY_EPS,
};
pub use run::{eval_psnr, train, MetricRecord, TrainLoopConfig, TrainOutput};
pub use step::{forward_backward, forward_loss, LossReport, RayBatch, StepOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("distortion loss requires non-decreasing sample positions")]
    UnsortedSamples,
    #[error(
        "non-finite loss at step {step}: rgb {rgb}, opacity {opacity}, distortion {distortion}"
    )]
    NonFiniteLoss {
        step: u64,
        rgb: f64,
        opacity: f64,
        distortion: f64,
    },
    #[error(transparent)]
    Encoding(#[from] crate::encoding::EncodingError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error("empty dataset")]
    EmptyDataset,
}

/// Training-state bundle: the model plus optimizer moments and step count.
#[derive(Debug, Clone)]
pub struct TrainState<R: crate::real::Real> {
    pub model: crate::model::NerfModel<R>,
    pub adam: AdamState<R>,
    pub step: u64,
    pub loss_weights: LossWeights,
}

impl<R: crate::real::Real> TrainState<R> {
    pub fn new(model: crate::model::NerfModel<R>, loss_weights: LossWeights) -> Self {
        let adam = AdamState::new(&model, AdamHyper::default());
        TrainState {
            model,
            adam,
            step: 0,
            loss_weights,
        }
    }
}
