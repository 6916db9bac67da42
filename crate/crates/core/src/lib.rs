//! CPU radiance-field engine built around a generalized map-reduce parametric
//! encoder. The factorized multi-resolution hash encoder projects 3D points
//! onto axis planes, hashes each plane's lattice into its own feature table,
//! and combines the bilinear lookups with a Hadamard product; 3D hash-grid,
//! explicit tri-plane and dense-grid encoders share the same machinery as
//! baselines. Rendering composites density/color samples along occupancy-
//! gated rays, and training runs hand-written reverse-mode gradients through
//! the whole stack.

pub mod cli;
pub mod encoding;
pub mod field;
pub mod metrics;
pub mod model;
pub mod real;
pub mod renderer;
pub mod scenedata;
pub mod training;

pub use real::Real;
