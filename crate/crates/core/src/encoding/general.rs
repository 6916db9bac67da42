use super::facthash::{FactHashEncoder, PLANES};
use super::hashgrid::HashGridEncoder;
use super::interp::{lattice_lookup, lattice_scatter, LatticeIndexer};
use super::schedule::{level_resolutions, LevelSchedule};
use super::tables::HashTableSet;
use super::{check_unit_cube, EncodingError};
use crate::real::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How per-group feature vectors collapse into one vector per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceMode {
    Hadamard,
    Concat,
    Sum,
}

/// Projection tensor M with entries M[i][g][j]: input axis i contributes
/// M[i,g,j] to mapped coordinate j of group g.
#[derive(Debug, Clone, PartialEq)]
pub struct MapTensor {
    pub input_dim: usize,
    pub group_count: usize,
    data: Vec<f64>,
}

impl MapTensor {
    pub fn new(input_dim: usize, group_count: usize, data: Vec<f64>) -> Result<Self, EncodingError> {
        if data.len() != input_dim * group_count * input_dim {
            return Err(EncodingError::InvalidConfig(format!(
                "map tensor needs {} entries, got {}",
                input_dim * group_count * input_dim,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(EncodingError::InvalidConfig(
                "map tensor entries must be finite".into(),
            ));
        }
        Ok(MapTensor {
            input_dim,
            group_count,
            data,
        })
    }

    pub fn zeros(input_dim: usize, group_count: usize) -> Self {
        MapTensor {
            input_dim,
            group_count,
            data: vec![0.0; input_dim * group_count * input_dim],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, g: usize, j: usize) -> f64 {
        self.data[(i * self.group_count + g) * self.input_dim + j]
    }

    pub fn set(&mut self, i: usize, g: usize, j: usize, v: f64) {
        self.data[(i * self.group_count + g) * self.input_dim + j] = v;
    }

    /// Mapped coordinate j of group g: the contraction sum_i x[i] * M[i,g,j].
    #[inline]
    pub fn project_component(&self, x: &[f64], g: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            acc += xi * self.get(i, g, j);
        }
        acc
    }
}

/// Applies the map tensor to one point, producing G mapped D-vectors.
pub fn map_project(map: &MapTensor, x: &[f64]) -> Vec<Vec<f64>> {
    (0..map.group_count)
        .map(|g| {
            (0..map.input_dim)
                .map(|j| map.project_component(x, g, j))
                .collect()
        })
        .collect()
}

/// Collapses per-group feature vectors with the chosen elemental operation.
pub fn reduce_features<R: Real>(
    per_group: &[Vec<R>],
    mode: ReduceMode,
) -> Result<Vec<R>, EncodingError> {
    match mode {
        ReduceMode::Concat => Ok(per_group.iter().flatten().copied().collect()),
        ReduceMode::Hadamard | ReduceMode::Sum => {
            let first = per_group
                .first()
                .ok_or_else(|| EncodingError::InvalidConfig("no groups to reduce".into()))?;
            let mut out = first.clone();
            for v in &per_group[1..] {
                if v.len() != out.len() {
                    return Err(EncodingError::LengthMismatch {
                        expected: out.len(),
                        got: v.len(),
                    });
                }
                for (o, &s) in out.iter_mut().zip(v) {
                    if mode == ReduceMode::Hadamard {
                        *o *= s;
                    } else {
                        *o += s;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Contiguous row range a group owns inside its level's logical table; the
/// concrete realization of the hash-range mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct GeneralEncoderConfig {
    pub map: MapTensor,
    /// partitions[level][group]
    pub partitions: Vec<Vec<Partition>>,
    pub reduce: ReduceMode,
    pub schedule: LevelSchedule,
    pub feature_dim: usize,
}

/// Generalized map-reduce encoder: project the point through the map tensor,
/// look each mapped coordinate up in its own partition of a per-level hash
/// table (only the axes the group actually uses are interpolated), and
/// reduce the per-group features.
#[derive(Debug, Clone)]
pub struct GeneralEncoder<R: Real> {
    pub config: GeneralEncoderConfig,
    pub tables: HashTableSet<R>,
    /// Active (used) input columns per group, ascending.
    active: Vec<Vec<usize>>,
    /// extents[level][group][axis] — cells per active axis.
    extents: Vec<Vec<Vec<u32>>>,
    indexers: Vec<Vec<LatticeIndexer>>,
}

impl<R: Real> GeneralEncoder<R> {
    pub fn new(config: GeneralEncoderConfig, rng: &mut impl Rng) -> Result<Self, EncodingError> {
        let d = config.map.input_dim;
        let groups = config.map.group_count;
        if d != 3 {
            return Err(EncodingError::InvalidConfig(format!(
                "general encoder supports 3D input, got D={d}"
            )));
        }
        if groups == 0 {
            return Err(EncodingError::InvalidConfig("group_count must be >= 1".into()));
        }
        if config.feature_dim == 0 {
            return Err(EncodingError::InvalidConfig("feature_dim must be positive".into()));
        }
        if config.partitions.len() != config.schedule.levels {
            return Err(EncodingError::InvalidConfig(format!(
                "need one partition list per level ({}), got {}",
                config.schedule.levels,
                config.partitions.len()
            )));
        }

        let mut active = Vec::with_capacity(groups);
        for g in 0..groups {
            let cols: Vec<usize> = (0..d)
                .filter(|&j| (0..d).any(|i| config.map.get(i, g, j) != 0.0))
                .collect();
            if cols.is_empty() {
                return Err(EncodingError::InvalidConfig(format!(
                    "group {g} has an all-zero map slice"
                )));
            }
            active.push(cols);
        }

        let mut specs = Vec::new();
        let mut extents = Vec::new();
        let mut indexer_rows = Vec::new();
        for (l, parts) in config.partitions.iter().enumerate() {
            if parts.len() != groups {
                return Err(EncodingError::InvalidConfig(format!(
                    "level {l} needs {groups} partitions, got {}",
                    parts.len()
                )));
            }
            let mut level_rows = 0usize;
            let mut level_extents = Vec::with_capacity(groups);
            let mut level_idx_rows = Vec::with_capacity(groups);
            let n_l = config.schedule.resolutions[l];
            for (g, part) in parts.iter().enumerate() {
                if part.len == 0 {
                    return Err(EncodingError::InvalidConfig(format!(
                        "level {l} group {g} has an empty partition"
                    )));
                }
                level_rows = level_rows.max(part.offset + part.len);
                let ext: Vec<u32> = active[g]
                    .iter()
                    .map(|&j| {
                        let colsum: f64 = (0..d).map(|i| config.map.get(i, g, j).abs()).sum();
                        ((colsum * n_l as f64 - 1e-9).ceil().max(1.0)) as u32
                    })
                    .collect();
                level_extents.push(ext);
                level_idx_rows.push(part.len);
            }
            specs.push((format!("level{l}"), level_rows));
            extents.push(level_extents);
            indexer_rows.push(level_idx_rows);
        }

        let tables = HashTableSet::new(&specs, config.feature_dim, rng);
        let indexers = extents
            .iter()
            .zip(&indexer_rows)
            .map(|(level_ext, level_rows)| {
                level_ext
                    .iter()
                    .zip(level_rows)
                    .map(|(ext, &rows)| LatticeIndexer::choose(ext, rows))
                    .collect()
            })
            .collect();

        Ok(GeneralEncoder {
            config,
            tables,
            active,
            extents,
            indexers,
        })
    }

    /// Reduced feature width per level.
    pub fn level_dim(&self) -> usize {
        match self.config.reduce {
            ReduceMode::Concat => self.config.map.group_count * self.config.feature_dim,
            _ => self.config.feature_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.config.schedule.levels * self.level_dim()
    }

    pub fn param_count(&self) -> usize {
        self.tables.param_count()
    }

    #[inline]
    fn mapped_point(&self, x: &[f64; 3], g: usize, res: f64, out: &mut [f64; 3]) -> usize {
        let cols = &self.active[g];
        for (jj, &j) in cols.iter().enumerate() {
            out[jj] = self.config.map.project_component(x, g, j) * res;
        }
        cols.len()
    }

    fn group_slice<'a>(&self, table: &'a [R], l: usize, g: usize) -> &'a [R] {
        let part = self.config.partitions[l][g];
        let f = self.config.feature_dim;
        &table[part.offset * f..(part.offset + part.len) * f]
    }

    pub fn encode_into(&self, x: &[f64; 3], out: &mut [R]) -> Result<(), EncodingError> {
        check_unit_cube(x)?;
        let f = self.config.feature_dim;
        let groups = self.config.map.group_count;
        let ld = self.level_dim();
        let mut scratch = vec![R::zero(); f];
        let mut p = [0.0f64; 3];
        for l in 0..self.config.schedule.levels {
            let res = self.config.schedule.resolutions[l] as f64;
            let table = self.tables.table(l);
            let level_out = &mut out[l * ld..(l + 1) * ld];
            for g in 0..groups {
                let dims = self.mapped_point(x, g, res, &mut p);
                let slice = self.group_slice(table, l, g);
                let ext = &self.extents[l][g];
                let idx = &self.indexers[l][g];
                match self.config.reduce {
                    ReduceMode::Concat => {
                        lattice_lookup(&p[..dims], ext, idx, slice, f, &mut level_out[g * f..(g + 1) * f]);
                    }
                    ReduceMode::Hadamard | ReduceMode::Sum => {
                        if g == 0 {
                            lattice_lookup(&p[..dims], ext, idx, slice, f, &mut level_out[..f]);
                        } else {
                            lattice_lookup(&p[..dims], ext, idx, slice, f, &mut scratch);
                            for (o, &s) in level_out[..f].iter_mut().zip(scratch.iter()) {
                                if self.config.reduce == ReduceMode::Hadamard {
                                    *o *= s;
                                } else {
                                    *o += s;
                                }
                            }
                        }
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
        let f = self.config.feature_dim;
        let groups = self.config.map.group_count;
        let ld = self.level_dim();
        if upstream.len() != self.output_dim() {
            return Err(EncodingError::LengthMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut p = [0.0f64; 3];
        let mut feats = vec![R::zero(); groups * f];
        let mut d_feat = vec![R::zero(); f];
        for l in 0..self.config.schedule.levels {
            let res = self.config.schedule.resolutions[l] as f64;
            let up = &upstream[l * ld..(l + 1) * ld];

            if self.config.reduce == ReduceMode::Hadamard {
                let table = self.tables.table(l);
                for g in 0..groups {
                    let dims = self.mapped_point(x, g, res, &mut p);
                    let slice = self.group_slice(table, l, g);
                    lattice_lookup(
                        &p[..dims],
                        &self.extents[l][g],
                        &self.indexers[l][g],
                        slice,
                        f,
                        &mut feats[g * f..(g + 1) * f],
                    );
                }
            }

            for g in 0..groups {
                let up_g: &[R] = match self.config.reduce {
                    ReduceMode::Concat => &up[g * f..(g + 1) * f],
                    ReduceMode::Sum => &up[..f],
                    ReduceMode::Hadamard => {
                        for j in 0..f {
                            let mut other = R::one();
                            for q in 0..groups {
                                if q != g {
                                    other *= feats[q * f + j];
                                }
                            }
                            d_feat[j] = up[j] * other;
                        }
                        &d_feat
                    }
                };
                let dims = self.mapped_point(x, g, res, &mut p);
                let part = self.config.partitions[l][g];
                let grad_slice = &mut grads[l][part.offset * f..(part.offset + part.len) * f];
                lattice_scatter(
                    &p[..dims],
                    &self.extents[l][g],
                    &self.indexers[l][g],
                    grad_slice,
                    f,
                    up_g,
                );
            }
        }
        Ok(())
    }

    /// Mirrors a factorized hash encoder: tri-plane permutation map, Hadamard
    /// reduce, per-plane partitions of each level table, contents copied.
    pub fn facthash_instance(src: &FactHashEncoder<R>, rng: &mut impl Rng) -> Self {
        let levels = src.schedule.levels;
        let f = src.feature_dim;
        let mut map = MapTensor::zeros(3, 3);
        for (g, axes) in PLANES.iter().enumerate() {
            map.set(axes[0], g, 0, 1.0);
            map.set(axes[1], g, 1, 1.0);
        }
        let mut partitions = Vec::with_capacity(levels);
        for &n in &src.schedule.resolutions {
            let rows = (n as usize + 1).pow(2).min(src.table_cap);
            partitions.push(
                (0..3)
                    .map(|g| Partition {
                        offset: g * rows,
                        len: rows,
                    })
                    .collect(),
            );
        }
        let config = GeneralEncoderConfig {
            map,
            partitions,
            reduce: ReduceMode::Hadamard,
            schedule: src.schedule.clone(),
            feature_dim: f,
        };
        let mut enc = GeneralEncoder::new(config, rng).expect("mirror config is valid");
        for l in 0..levels {
            let rows = enc.config.partitions[l][0].len;
            for g in 0..3 {
                let src_table = src.tables.table(g * levels + l).to_vec();
                let dst = enc.tables.table_mut(l);
                dst[g * rows * f..(g * rows + rows) * f].copy_from_slice(&src_table);
            }
        }
        enc
    }

    /// Mirrors a 3D hash grid: one group per level with a diagonal N_l map
    /// slice, concat reduce, a single unit-resolution schedule level, and
    /// per-group partitions of one logical table.
    pub fn hashgrid_instance(src: &HashGridEncoder<R>, rng: &mut impl Rng) -> Self {
        let levels = src.schedule.levels;
        let f = src.feature_dim;
        let mut map = MapTensor::zeros(3, levels);
        for (g, &n) in src.schedule.resolutions.iter().enumerate() {
            for j in 0..3 {
                map.set(j, g, j, n as f64);
            }
        }
        let mut offset = 0;
        let mut parts = Vec::with_capacity(levels);
        for g in 0..levels {
            let rows = src.tables.rows(g);
            parts.push(Partition { offset, len: rows });
            offset += rows;
        }
        let config = GeneralEncoderConfig {
            map,
            partitions: vec![parts.clone()],
            reduce: ReduceMode::Concat,
            schedule: level_resolutions(1, 1, 1).expect("unit schedule"),
            feature_dim: f,
        };
        let mut enc = GeneralEncoder::new(config, rng).expect("mirror config is valid");
        let dst = enc.tables.table_mut(0);
        for (g, part) in parts.iter().enumerate() {
            dst[part.offset * f..(part.offset + part.len) * f]
                .copy_from_slice(src.tables.table(g));
        }
        enc
    }
}
