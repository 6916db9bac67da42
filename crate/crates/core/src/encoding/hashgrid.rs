use super::interp::{lattice_lookup, lattice_scatter, LatticeIndexer};
use super::schedule::LevelSchedule;
use super::tables::HashTableSet;
use super::{check_unit_cube, EncodingError};
use crate::real::Real;
use rand::Rng;

/// Multi-resolution 3D hash grid: one table per level, trilinear lookup,
/// per-level features concatenated.
#[derive(Debug, Clone)]
pub struct HashGridEncoder<R: Real> {
    pub schedule: LevelSchedule,
    pub feature_dim: usize,
    pub table_cap: usize,
    pub tables: HashTableSet<R>,
    indexers: Vec<LatticeIndexer>,
}

impl<R: Real> HashGridEncoder<R> {
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
        for (l, &n) in schedule.resolutions.iter().enumerate() {
            let verts = (n as usize + 1)
                .checked_pow(3)
                .unwrap_or(usize::MAX);
            specs.push((format!("level{l}"), verts.min(table_cap)));
        }
        let tables = HashTableSet::new(&specs, feature_dim, rng);
        let indexers = schedule
            .resolutions
            .iter()
            .enumerate()
            .map(|(l, &n)| LatticeIndexer::choose(&[n, n, n], tables.rows(l)))
            .collect();
        Ok(HashGridEncoder {
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

    /// Sum over levels of min(T, (N_l + 1)^3) * F.
    pub fn param_count(&self) -> usize {
        self.tables.param_count()
    }

    pub fn encode_into(&self, x: &[f64; 3], out: &mut [R]) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.feature_dim;
        debug_assert_eq!(out.len(), self.output_dim());
        for (l, &n) in self.schedule.resolutions.iter().enumerate() {
            let res = n as f64;
            let p = [x[0] * res, x[1] * res, x[2] * res];
            lattice_lookup(
                &p,
                &[n, n, n],
                &self.indexers[l],
                self.tables.table(l),
                f,
                &mut out[l * f..(l + 1) * f],
            );
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
            let p = [x[0] * res, x[1] * res, x[2] * res];
            lattice_scatter(
                &p,
                &[n, n, n],
                &self.indexers[l],
                &mut grads[l],
                f,
                &upstream[l * f..(l + 1) * f],
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::level_resolutions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_tables_give_constant_output() {
        let schedule = level_resolutions(4, 32, 4).unwrap();
        let mut enc: HashGridEncoder<f64> =
            HashGridEncoder::new(schedule, 2, 1 << 12, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for t in enc.tables.tables_mut() {
            t.fill(0.75);
        }
        let mut out = vec![0.0; enc.output_dim()];
        enc.encode_into(&[0.11, 0.52, 0.93], &mut out).unwrap();
        for v in out {
            assert!((v - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_vertex_query_hits_single_row() {
        let schedule = level_resolutions(4, 4, 1).unwrap();
        let enc: HashGridEncoder<f64> =
            HashGridEncoder::new(schedule, 2, 1 << 12, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        // vertex (1, 2, 3) of the 4-cell grid, injective row-major table
        let x = [0.25, 0.5, 0.75];
        let mut out = vec![0.0; 2];
        enc.encode_into(&x, &mut out).unwrap();
        let row = 1 + 2 * 5 + 3 * 25;
        assert_eq!(out, enc.tables.table(0)[row * 2..row * 2 + 2].to_vec());

        // gradient lands entirely on that row
        let mut grads: Vec<Vec<f64>> = enc
            .tables
            .tables()
            .iter()
            .map(|t| vec![0.0; t.len()])
            .collect();
        enc.backward_into(&x, &[1.0, 2.0], &mut grads).unwrap();
        for (i, g) in grads[0].chunks(2).enumerate() {
            if i == row {
                assert_eq!(g, &[1.0, 2.0]);
            } else {
                assert_eq!(g, &[0.0, 0.0]);
            }
        }
    }
}
