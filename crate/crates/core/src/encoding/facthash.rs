use super::interp::{lattice_lookup, lattice_scatter, LatticeIndexer};
use super::schedule::LevelSchedule;
use super::tables::HashTableSet;
use super::{check_unit_cube, EncodingError};
use crate::real::Real;
use rand::Rng;

/// Axis-plane projections, in reduce order: (x,y), (y,z), (z,x).
pub(crate) const PLANES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Factorized multi-resolution hash encoder: each level interpolates three
/// axis-plane hash tables bilinearly and Hadamard-multiplies the results,
/// confining hash collisions to 2D.
#[derive(Debug, Clone)]
pub struct FactHashEncoder<R: Real> {
    pub schedule: LevelSchedule,
    pub feature_dim: usize,
    pub table_cap: usize,
    pub tables: HashTableSet<R>,
    indexers: Vec<LatticeIndexer>,
}

impl<R: Real> FactHashEncoder<R> {
    pub fn new(
        schedule: LevelSchedule,
        feature_dim: usize,
        table_cap: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, EncodingError> {
        if feature_dim == 0 || table_cap == 0 {
            return Err(EncodingError::InvalidConfig(
                "feature_dim and table_cap must be positive".into(),
            ));
        }
        let mut specs = Vec::new();
        for plane in 0..3 {
            for (l, &n) in schedule.resolutions.iter().enumerate() {
                let verts = (n as usize + 1).pow(2);
                specs.push((format!("plane{plane}_level{l}"), verts.min(table_cap)));
            }
        }
        let tables = HashTableSet::new(&specs, feature_dim, rng);
        let indexers = schedule
            .resolutions
            .iter()
            .map(|&n| {
                LatticeIndexer::choose(&[n, n], (n as usize + 1).pow(2).min(table_cap))
            })
            .collect();
        Ok(FactHashEncoder {
            schedule,
            feature_dim,
            table_cap,
            tables,
            indexers,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.schedule.levels * self.feature_dim
    }

    /// Sum over planes and levels of min(T, (N_l + 1)^2) * F.
    pub fn param_count(&self) -> usize {
        self.tables.param_count()
    }

    #[inline]
    fn table_idx(&self, plane: usize, level: usize) -> usize {
        plane * self.schedule.levels + level
    }

    pub fn encode_into(&self, x: &[f64; 3], out: &mut [R]) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.feature_dim;
        debug_assert_eq!(out.len(), self.output_dim());
        let mut inline_buf = [R::zero(); 8];
        let mut heap_buf;
        let scratch: &mut [R] = if f <= 8 {
            &mut inline_buf[..f]
        } else {
            heap_buf = vec![R::zero(); f];
            &mut heap_buf
        };
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            let extents = [n, n];
            let level_out = &mut out[l * f..(l + 1) * f];
            for (plane, axes) in PLANES.iter().enumerate() {
                let p = [x[axes[0]] * res, x[axes[1]] * res];
                let ti = plane * self.schedule.levels + l;
                if plane == 0 {
                    lattice_lookup(
                        &p,
                        &extents,
                        &self.indexers[l],
                        self.tables.table(ti),
                        f,
                        level_out,
                    );
                } else {
                    lattice_lookup(
                        &p,
                        &extents,
                        &self.indexers[l],
                        self.tables.table(ti),
                        f,
                        scratch,
                    );
                    for (o, &s) in level_out.iter_mut().zip(scratch.iter()) {
                        *o *= s;
                    }
                }
            }
        }
        Ok(())
    }

    /// Scatters `upstream` through the Hadamard product rule and the
    /// bilinear weights into the touched rows of `grads` (one buffer per
    /// table, shaped like the tables).
    pub fn backward_into(
        &self,
        x: &[f64; 3],
        upstream: &[R],
        grads: &mut [Vec<R>],
    ) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.feature_dim;
        if upstream.len() != self.output_dim() {
            return Err(EncodingError::LengthMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut feats_buf = [R::zero(); 24];
        let mut feats_heap;
        let feats: &mut [R] = if f <= 8 {
            &mut feats_buf[..3 * f]
        } else {
            feats_heap = vec![R::zero(); 3 * f];
            &mut feats_heap
        };
        let mut d_buf = [R::zero(); 8];
        let mut d_heap;
        let d_feat: &mut [R] = if f <= 8 {
            &mut d_buf[..f]
        } else {
            d_heap = vec![R::zero(); f];
            &mut d_heap
        };
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            let extents = [n, n];
            for (plane, axes) in PLANES.iter().enumerate() {
                let p = [x[axes[0]] * res, x[axes[1]] * res];
                let ti = self.table_idx(plane, l);
                lattice_lookup(
                    &p,
                    &extents,
                    &self.indexers[l],
                    self.tables.table(ti),
                    f,
                    &mut feats[plane * f..(plane + 1) * f],
                );
            }
            let up = &upstream[l * f..(l + 1) * f];
            for (plane, axes) in PLANES.iter().enumerate() {
                for j in 0..f {
                    let mut other = R::one();
                    for q in 0..3 {
                        if q != plane {
                            other *= feats[q * f + j];
                        }
                    }
                    d_feat[j] = up[j] * other;
                }
                let p = [x[axes[0]] * res, x[axes[1]] * res];
                let ti = self.table_idx(plane, l);
                lattice_scatter(&p, &extents, &self.indexers[l], &mut grads[ti], f, d_feat);
            }
        }
        Ok(())
    }
}
