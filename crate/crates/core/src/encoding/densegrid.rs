use super::interp::cell_and_frac;
use super::schedule::LevelSchedule;
use super::tables::HashTableSet;
use super::{check_unit_cube, EncodingError};
use crate::real::Real;
use rand::Rng;

/// Dense voxel-grid encoder: all (N+1)^3 vertex features stored per level,
/// addressed row-major. Collision-free reference for the 3D hash grid; only
/// practical at small resolutions.
#[derive(Debug, Clone)]
pub struct DenseGridEncoder<R: Real> {
    pub schedule: LevelSchedule,
    pub feature_dim: usize,
    pub tables: HashTableSet<R>,
}

impl<R: Real> DenseGridEncoder<R> {
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
        let finest = *schedule.resolutions.last().unwrap() as usize;
        if (finest + 1).pow(3) * feature_dim > 1 << 28 {
            return Err(EncodingError::InvalidConfig(format!(
                "dense grid at resolution {finest} would exceed the parameter budget"
            )));
        }
        let specs: Vec<(String, usize)> = schedule
            .resolutions
            .iter()
            .enumerate()
            .map(|(l, &n)| (format!("level{l}"), (n as usize + 1).pow(3)))
            .collect();
        let tables = HashTableSet::new(&specs, feature_dim, rng);
        Ok(DenseGridEncoder {
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

    pub fn encode_into(&self, x: &[f64; 3], out: &mut [R]) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.feature_dim;
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            let verts = n as usize + 1;
            let (c0, f0) = cell_and_frac(x[0] * res, n);
            let (c1, f1) = cell_and_frac(x[1] * res, n);
            let (c2, f2) = cell_and_frac(x[2] * res, n);
            let table = self.tables.table(l);
            let level_out = &mut out[l * f..(l + 1) * f];
            level_out.fill(R::zero());
            for k in 0..8usize {
                let mut w = 1.0;
                w *= if k & 1 == 1 { f0 } else { 1.0 - f0 };
                w *= if k >> 1 & 1 == 1 { f1 } else { 1.0 - f1 };
                w *= if k >> 2 & 1 == 1 { f2 } else { 1.0 - f2 };
                let wu = R::from_f64(w);
                let row = (c0 as usize + (k & 1))
                    + (c1 as usize + (k >> 1 & 1)) * verts
                    + (c2 as usize + (k >> 2 & 1)) * verts * verts;
                let src = &table[row * f..(row + 1) * f];
                for (o, &s) in level_out.iter_mut().zip(src) {
                    *o += wu * s;
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
        if upstream.len() != self.output_dim() {
            return Err(EncodingError::LengthMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            let verts = n as usize + 1;
            let (c0, f0) = cell_and_frac(x[0] * res, n);
            let (c1, f1) = cell_and_frac(x[1] * res, n);
            let (c2, f2) = cell_and_frac(x[2] * res, n);
            let up = &upstream[l * f..(l + 1) * f];
            for k in 0..8usize {
                let mut w = 1.0;
                w *= if k & 1 == 1 { f0 } else { 1.0 - f0 };
                w *= if k >> 1 & 1 == 1 { f1 } else { 1.0 - f1 };
                w *= if k >> 2 & 1 == 1 { f2 } else { 1.0 - f2 };
                let wu = R::from_f64(w);
                let row = (c0 as usize + (k & 1))
                    + (c1 as usize + (k >> 1 & 1)) * verts
                    + (c2 as usize + (k >> 2 & 1)) * verts * verts;
                let dst = &mut grads[l][row * f..(row + 1) * f];
                for (d, &u) in dst.iter_mut().zip(up) {
                    *d += wu * u;
                }
            }
        }
        Ok(())
    }
}
