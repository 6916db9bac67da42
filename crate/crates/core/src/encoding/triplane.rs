use super::facthash::PLANES;
use super::interp::cell_and_frac;
use super::schedule::LevelSchedule;
use super::tables::HashTableSet;
use super::{check_unit_cube, EncodingError};
use crate::real::Real;
use rand::Rng;

/// Explicit tri-plane encoder: every plane level stores all (N+1)^2 vertex
/// features directly, addressed row-major with no hashing. Serves both as a
/// tensor-factorization baseline and as the collision-free reference for the
/// factorized hash encoder.
#[derive(Debug, Clone)]
pub struct TriPlaneEncoder<R: Real> {
    pub schedule: LevelSchedule,
    pub feature_dim: usize,
    pub tables: HashTableSet<R>,
}

impl<R: Real> TriPlaneEncoder<R> {
    pub fn new(
        schedule: LevelSchedule,
        feature_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, EncodingError> {
        if feature_dim == 0 {
            return Err(EncodingError::InvalidConfig(
                "feature_dim must be positive".into(),
            ));
        }
        let mut specs = Vec::new();
        for plane in 0..3 {
            for (l, &n) in schedule.resolutions.iter().enumerate() {
                specs.push((format!("plane{plane}_level{l}"), (n as usize + 1).pow(2)));
            }
        }
        let tables = HashTableSet::new(&specs, feature_dim, rng);
        Ok(TriPlaneEncoder {
            schedule,
            feature_dim,
            tables,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.schedule.levels * self.feature_dim
    }

    pub fn param_count(&self) -> usize {
        self.tables.param_count()
    }

    /// Bilinear read of one fully-stored plane, accumulation order matching
    /// the hashed encoders so collision-free comparisons are exact.
    fn plane_read(&self, table: &[R], n: u32, u: f64, v: f64, out: &mut [R]) {
        let (cu, fu) = cell_and_frac(u, n);
        let (cv, fv) = cell_and_frac(v, n);
        let verts = n as usize + 1;
        out.fill(R::zero());
        for k in 0..4usize {
            let mut w = 1.0;
            w *= if k & 1 == 1 { fu } else { 1.0 - fu };
            w *= if k >> 1 & 1 == 1 { fv } else { 1.0 - fv };
            let wu = R::from_f64(w);
            let row = (cu as usize + (k & 1)) + (cv as usize + (k >> 1 & 1)) * verts;
            let src = &table[row * self.feature_dim..(row + 1) * self.feature_dim];
            for (o, &s) in out.iter_mut().zip(src) {
                *o += wu * s;
            }
        }
    }

    fn plane_scatter(&self, grad: &mut [R], n: u32, u: f64, v: f64, upstream: &[R]) {
        let (cu, fu) = cell_and_frac(u, n);
        let (cv, fv) = cell_and_frac(v, n);
        let verts = n as usize + 1;
        for k in 0..4usize {
            let mut w = 1.0;
            w *= if k & 1 == 1 { fu } else { 1.0 - fu };
            w *= if k >> 1 & 1 == 1 { fv } else { 1.0 - fv };
            let wu = R::from_f64(w);
            let row = (cu as usize + (k & 1)) + (cv as usize + (k >> 1 & 1)) * verts;
            let dst = &mut grad[row * self.feature_dim..(row + 1) * self.feature_dim];
            for (d, &u) in dst.iter_mut().zip(upstream) {
                *d += wu * u;
            }
        }
    }

    pub fn encode_into(&self, x: &[f64; 3], out: &mut [R]) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.feature_dim;
        let levels = self.schedule.levels;
        let mut scratch = vec![R::zero(); f];
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            let level_out = &mut out[l * f..(l + 1) * f];
            for (plane, axes) in PLANES.iter().enumerate() {
                let (u, v) = (x[axes[0]] * res, x[axes[1]] * res);
                let table = self.tables.table(plane * levels + l);
                if plane == 0 {
                    self.plane_read(table, n, u, v, level_out);
                } else {
                    self.plane_read(table, n, u, v, &mut scratch);
                    for (o, &s) in level_out.iter_mut().zip(scratch.iter()) {
                        *o *= s;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn backward_into(
        &self,
        x: &[f64; 3],
        upstream: &[R],
        grads: &mut [Vec<R>],
    ) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.feature_dim;
        let levels = self.schedule.levels;
        if upstream.len() != self.output_dim() {
            return Err(EncodingError::LengthMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut feats = vec![R::zero(); 3 * f];
        let mut d_feat = vec![R::zero(); f];
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            for (plane, axes) in PLANES.iter().enumerate() {
                let (u, v) = (x[axes[0]] * res, x[axes[1]] * res);
                let table = self.tables.table(plane * levels + l);
                let dst = &mut feats[plane * f..(plane + 1) * f];
                self.plane_read(table, n, u, v, dst);
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
                let (u, v) = (x[axes[0]] * res, x[axes[1]] * res);
                self.plane_scatter(&mut grads[plane * levels + l], n, u, v, &d_feat);
            }
        }
        Ok(())
    }
}
