//! Radiance-field model: an encoder plus the two-MLP decoder, with uniform
//! named access to every learnable array for the optimizer, the gradient
//! audit, and checkpoints.

use crate::encoding::{Encoder, EncodingError};
use crate::field::{FieldCache, FieldGrads, FieldModel, SH_DIM};
use crate::real::Real;
use crate::renderer::Aabb;

#[derive(Debug, Clone)]
pub struct NerfModel<R: Real> {
    pub encoder: Encoder<R>,
    pub field: FieldModel<R>,
    pub aabb: Aabb,
}

/// Gradient buffers shaped exactly like the model parameters.
#[derive(Debug, Clone)]
pub struct ModelGrads<R: Real> {
    pub tables: Vec<Vec<R>>,
    pub field: FieldGrads<R>,
}

/// Learning-rate group an array belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Table,
    Mlp,
}

impl<R: Real> NerfModel<R> {
    pub fn grads(&self) -> ModelGrads<R> {
        ModelGrads {
            tables: self.encoder.grad_buffers(),
            field: self.field.grads(),
        }
    }

    pub fn cache(&self) -> FieldCache<R> {
        FieldCache::new(&self.field)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.field.param_count()
    }

    /// Encoded-then-decoded sample at a world position; the caller provides
    /// the per-sample cache row index used later by the backward pass.
    pub fn eval_sample(
        &self,
        cache: &mut FieldCache<R>,
        p_world: &nalgebra::Vector3<f64>,
        sh: &[R; SH_DIM],
        i: usize,
    ) -> Result<(R, [R; 3]), EncodingError> {
        let x = self.aabb.normalize(p_world);
        self.encoder
            .encode_into(&x, cache.feat_row_mut(&self.field, i))?;
        Ok(self.field.eval_at(cache, sh, i))
    }

    /// Density-only query (bitfield maintenance).
    pub fn sigma_at(&self, p_world: &[f64; 3]) -> f64 {
        let x = self.aabb.normalize(&nalgebra::Vector3::from(*p_world));
        let mut feat = vec![R::zero(); self.encoder.output_dim()];
        if self.encoder.encode_into(&x, &mut feat).is_err() {
            return 0.0;
        }
        match self.field.density_head(&feat) {
            Ok((sigma, _)) => sigma.to_f64(),
            Err(_) => 0.0,
        }
    }

    /// Canonical parameter-array order: encoder tables, density layers,
    /// color layers. Gradient/moment buffers follow the same order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .encoder
            .table_names()
            .into_iter()
            .map(|n| format!("enc/{n}"))
            .collect();
        for (k, _) in self.field.density_net.layers.iter().enumerate() {
            names.push(format!("field/density/w{k}"));
            names.push(format!("field/density/b{k}"));
        }
        for (k, _) in self.field.color_net.layers.iter().enumerate() {
            names.push(format!("field/color/w{k}"));
            names.push(format!("field/color/b{k}"));
        }
        names
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut groups = vec![ParamGroup::Table; self.encoder.tables().len()];
        let mlp_arrays =
            (self.field.density_net.layers.len() + self.field.color_net.layers.len()) * 2;
        groups.extend(std::iter::repeat(ParamGroup::Mlp).take(mlp_arrays));
        groups
    }

    pub fn param_arrays(&self) -> Vec<&[R]> {
        let mut arrays: Vec<&[R]> = self.encoder.tables().iter().map(|t| t.as_slice()).collect();
        for layer in &self.field.density_net.layers {
            arrays.push(&layer.w);
            arrays.push(&layer.b);
        }
        for layer in &self.field.color_net.layers {
            arrays.push(&layer.w);
            arrays.push(&layer.b);
        }
        arrays
    }

    pub fn param_arrays_mut(&mut self) -> Vec<&mut [R]> {
        let mut arrays: Vec<&mut [R]> = self
            .encoder
            .tables_mut()
            .iter_mut()
            .map(|t| t.as_mut_slice())
            .collect();
        for layer in &mut self.field.density_net.layers {
            arrays.push(&mut layer.w);
            arrays.push(&mut layer.b);
        }
        for layer in &mut self.field.color_net.layers {
            arrays.push(&mut layer.w);
            arrays.push(&mut layer.b);
        }
        arrays
    }
}

impl<R: Real> ModelGrads<R> {
    pub fn zero(&mut self) {
        for t in &mut self.tables {
            t.fill(R::zero());
        }
        for g in self
            .field
            .density
            .iter_mut()
            .chain(self.field.color.iter_mut())
        {
            g.w.fill(R::zero());
            g.b.fill(R::zero());
        }
    }

    /// Same canonical order as [`NerfModel::param_arrays`].
    pub fn arrays(&self) -> Vec<&[R]> {
        let mut arrays: Vec<&[R]> = self.tables.iter().map(|t| t.as_slice()).collect();
        for g in self.field.density.iter().chain(self.field.color.iter()) {
            arrays.push(&g.w);
            arrays.push(&g.b);
        }
        arrays
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [R]> {
        let mut arrays: Vec<&mut [R]> = self.tables.iter_mut().map(|t| t.as_mut_slice()).collect();
        for g in self
            .field
            .density
            .iter_mut()
            .chain(self.field.color.iter_mut())
        {
            arrays.push(&mut g.w);
            arrays.push(&mut g.b);
        }
        arrays
    }

    pub fn add_assign(&mut self, other: &ModelGrads<R>) {
        for (dst, src) in self.tables.iter_mut().zip(&other.tables) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        for (dst, src) in self
            .field
            .density
            .iter_mut()
            .chain(self.field.color.iter_mut())
            .zip(other.field.density.iter().chain(other.field.color.iter()))
        {
            for (d, &s) in dst.w.iter_mut().zip(&src.w) {
                *d += s;
            }
            for (d, &s) in dst.b.iter_mut().zip(&src.b) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: R) {
        for a in self.arrays_mut() {
            for v in a {
                *v *= factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{level_resolutions, FactHashEncoder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model() -> NerfModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let schedule = level_resolutions(4, 8, 2).unwrap();
        let enc = FactHashEncoder::new(schedule, 2, 1 << 10, &mut rng).unwrap();
        let field = FieldModel::init(4, 3, &[8], &[8], &mut rng);
        NerfModel {
            encoder: Encoder::FactHash(enc),
            field,
            aabb: Aabb::unit(),
        }
    }

    #[test]
    fn grads_mirror_param_shapes() {
        let model = tiny_model();
        let grads = model.grads();
        let params = model.param_arrays();
        let garrays = grads.arrays();
        assert_eq!(params.len(), garrays.len());
        for (p, g) in params.iter().zip(garrays) {
            assert_eq!(p.len(), g.len());
        }
        assert_eq!(model.param_names().len(), params.len());
        assert_eq!(model.param_groups().len(), params.len());
    }

    #[test]
    fn param_count_includes_tables_and_mlps() {
        let model = tiny_model();
        let total: usize = model.param_arrays().iter().map(|a| a.len()).sum();
        assert_eq!(total, model.param_count());
    }
}
