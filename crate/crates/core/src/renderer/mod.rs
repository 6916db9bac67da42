//! Ray generation, occupancy-gated marching, and volume compositing.

mod aabb;
mod bitfield;
mod camera;
mod composite;
mod render;

pub use aabb::{ray_aabb, Aabb};
pub use bitfield::{march_samples, MarchBuffer, OccupancyBitfield};
pub use camera::{generate_rays, Camera, Ray};
pub use composite::{alpha_from_density, composite, composite_backward, CompositeResult};
pub use render::{render_image, RenderOptions, RenderedImage};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("camera rotation is not a proper rotation (orthonormality off by {0})")]
    BadRotation(f64),
    #[error("focal lengths must be positive, got ({0}, {1})")]
    BadFocal(f64, f64),
    #[error("pixel ({0}, {1}) outside {2}x{3} image")]
    PixelOutOfBounds(u32, u32, u32, u32),
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
}
