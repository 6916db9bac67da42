//! Parametric position encoders.
//!
//! All encoders share one pattern: project the input point onto one or more
//! lower-dimensional lattices (map), fetch per-vertex features from learnable
//! tables, interpolate, and combine the per-projection vectors into a single
//! feature (reduce). The factorized hash encoder uses axis planes with a
//! Hadamard reduce; the 3D hash grid uses one lattice per level with a concat
//! reduce; the explicit tri-plane and dense-grid variants store every vertex
//! without hashing and double as collision-free references.

mod densegrid;
mod facthash;
mod general;
mod hash;
mod hashgrid;
mod interp;
mod schedule;
mod tables;
mod triplane;

pub use densegrid::DenseGridEncoder;
pub use facthash::FactHashEncoder;
pub use general::{GeneralEncoder, GeneralEncoderConfig, MapTensor, Partition, ReduceMode};
pub use general::{map_project, reduce_features};
pub use hash::{hash_index, hash_lattice, HASH_PRIMES};
pub use hashgrid::HashGridEncoder;
pub use interp::{lattice_lookup, lattice_scatter, CornerWeights, LatticeIndexer};
pub use schedule::{level_resolutions, LevelSchedule};
pub use tables::{table_init_scale, HashTableSet};
pub use triplane::TriPlaneEncoder;

use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("point ({0}, {1}, {2}) outside the unit cube")]
    OutOfBox(f64, f64, f64),
    #[error("feature length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Per-level reduced features concatenated level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFeature<R>(pub Vec<R>);

impl<R> std::ops::Deref for EncodedFeature<R> {
    type Target = [R];
    fn deref(&self) -> &[R] {
        &self.0
    }
}

/// Runtime-selected encoder. Parameters for every variant live in plain
/// `Vec<Vec<R>>` tables so the optimizer, checkpoints, and gradient buffers
/// can treat them uniformly.
#[derive(Debug, Clone)]
pub enum Encoder<R: Real> {
    FactHash(FactHashEncoder<R>),
    HashGrid(HashGridEncoder<R>),
    TriPlane(TriPlaneEncoder<R>),
    DenseGrid(DenseGridEncoder<R>),
    General(GeneralEncoder<R>),
}

impl<R: Real> Encoder<R> {
    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::FactHash(e) => e.output_dim(),
            Encoder::HashGrid(e) => e.output_dim(),
            Encoder::TriPlane(e) => e.output_dim(),
            Encoder::DenseGrid(e) => e.output_dim(),
            Encoder::General(e) => e.output_dim(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Encoder::FactHash(e) => e.param_count(),
            Encoder::HashGrid(e) => e.param_count(),
            Encoder::TriPlane(e) => e.param_count(),
            Encoder::DenseGrid(e) => e.param_count(),
            Encoder::General(e) => e.param_count(),
        }
    }

    pub fn encode_into(&self, x: &[f64; 3], out: &mut [R]) -> Result<(), EncodingError> {
        match self {
            Encoder::FactHash(e) => e.encode_into(x, out),
            Encoder::HashGrid(e) => e.encode_into(x, out),
            Encoder::TriPlane(e) => e.encode_into(x, out),
            Encoder::DenseGrid(e) => e.encode_into(x, out),
            Encoder::General(e) => e.encode_into(x, out),
        }
    }

    pub fn encode(&self, x: &[f64; 3]) -> Result<EncodedFeature<R>, EncodingError> {
        let mut out = vec![R::zero(); self.output_dim()];
        self.encode_into(x, &mut out)?;
        Ok(EncodedFeature(out))
    }

    /// Scatters `upstream` (length `output_dim`) into per-table gradient
    /// buffers shaped like [`Self::tables`].
    pub fn backward_into(
        &self,
        x: &[f64; 3],
        upstream: &[R],
        grads: &mut [Vec<R>],
    ) -> Result<(), EncodingError> {
        match self {
            Encoder::FactHash(e) => e.backward_into(x, upstream, grads),
            Encoder::HashGrid(e) => e.backward_into(x, upstream, grads),
            Encoder::TriPlane(e) => e.backward_into(x, upstream, grads),
            Encoder::DenseGrid(e) => e.backward_into(x, upstream, grads),
            Encoder::General(e) => e.backward_into(x, upstream, grads),
        }
    }

    pub fn tables(&self) -> &[Vec<R>] {
        match self {
            Encoder::FactHash(e) => e.tables.tables(),
            Encoder::HashGrid(e) => e.tables.tables(),
            Encoder::TriPlane(e) => e.tables.tables(),
            Encoder::DenseGrid(e) => e.tables.tables(),
            Encoder::General(e) => e.tables.tables(),
        }
    }

    pub fn tables_mut(&mut self) -> &mut [Vec<R>] {
        match self {
            Encoder::FactHash(e) => e.tables.tables_mut(),
            Encoder::HashGrid(e) => e.tables.tables_mut(),
            Encoder::TriPlane(e) => e.tables.tables_mut(),
            Encoder::DenseGrid(e) => e.tables.tables_mut(),
            Encoder::General(e) => e.tables.tables_mut(),
        }
    }

    pub fn table_names(&self) -> Vec<String> {
        match self {
            Encoder::FactHash(e) => e.tables.names(),
            Encoder::HashGrid(e) => e.tables.names(),
            Encoder::TriPlane(e) => e.tables.names(),
            Encoder::DenseGrid(e) => e.tables.names(),
            Encoder::General(e) => e.tables.names(),
        }
    }

    pub fn grad_buffers(&self) -> Vec<Vec<R>> {
        self.tables()
            .iter()
            .map(|t| vec![R::zero(); t.len()])
            .collect()
    }
}

pub(crate) fn check_unit_cube(x: &[f64; 3]) -> Result<(), EncodingError> {
    if x.iter().all(|&c| (0.0..=1.0).contains(&c)) {
        Ok(())
    } else {
        Err(EncodingError::OutOfBox(x[0], x[1], x[2]))
    }
}
