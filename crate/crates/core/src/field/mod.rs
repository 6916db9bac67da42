//! Density/color decoding: encoded position features feed a small density
//! MLP whose first output channel becomes sigma through a softplus, the
//! remaining channels join the SH-encoded view direction, and a second MLP
//! produces sigmoid RGB.

mod mlp;
mod sh;

pub use mlp::{Linear, LinearGrad, Mlp, MlpGrads, MlpWorkspace};
pub use sh::sh_encode;

use crate::real::Real;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("direction must be unit length (|d| = {0})")]
    NonUnitDirection(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub const SH_DIM: usize = 16;

#[inline(always)]
pub fn softplus<R: Real>(u: R) -> R {
    // max(u, 0) + ln(1 + exp(-|u|)), overflow-safe on both tails
    u.max(R::zero()) + (-u.abs()).exp().ln_1p()
}

#[inline(always)]
pub fn sigmoid<R: Real>(u: R) -> R {
    if u >= R::zero() {
        R::one() / (R::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (R::one() + e)
    }
}

/// Hybrid two-network decoder.
#[derive(Debug, Clone)]
pub struct FieldModel<R> {
    pub density_net: Mlp<R>,
    pub color_net: Mlp<R>,
    pub geo_dim: usize,
}

#[derive(Debug, Clone)]
pub struct FieldGrads<R> {
    pub density: MlpGrads<R>,
    pub color: MlpGrads<R>,
}

impl<R: Real> FieldModel<R> {
    pub fn init(
        feat_dim: usize,
        geo_dim: usize,
        density_hidden: &[usize],
        color_hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        let mut d_dims = vec![feat_dim];
        d_dims.extend_from_slice(density_hidden);
        d_dims.push(1 + geo_dim);
        let mut c_dims = vec![geo_dim + SH_DIM];
        c_dims.extend_from_slice(color_hidden);
        c_dims.push(3);
        FieldModel {
            density_net: Mlp::init(&d_dims, rng),
            color_net: Mlp::init(&c_dims, rng),
            geo_dim,
        }
    }

    pub fn grads(&self) -> FieldGrads<R> {
        FieldGrads {
            density: self.density_net.grads(),
            color: self.color_net.grads(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.density_net.param_count() + self.color_net.param_count()
    }

    /// sigma (softplus of the first channel) plus the pass-through geometry
    /// feature. Standalone variant for single queries; the batched cache path
    /// below is what training uses.
    pub fn density_head(&self, feat: &[R]) -> Result<(R, Vec<R>), FieldError> {
        if feat.len() != self.density_net.in_dim() {
            return Err(FieldError::ShapeMismatch(format!(
                "density input {} != {}",
                feat.len(),
                self.density_net.in_dim()
            )));
        }
        let mut ws = self.density_net.workspace();
        let out = self.density_net.forward(feat, &mut ws);
        Ok((softplus(out[0]), out[1..].to_vec()))
    }

    /// Sigmoid RGB from the geometry feature and the SH-encoded direction.
    pub fn color_head(&self, geo: &[R], sh: &[R]) -> Result<[R; 3], FieldError> {
        if geo.len() != self.geo_dim || sh.len() != SH_DIM {
            return Err(FieldError::ShapeMismatch(format!(
                "color input ({}, {}) != ({}, {})",
                geo.len(),
                sh.len(),
                self.geo_dim,
                SH_DIM
            )));
        }
        let mut input = Vec::with_capacity(geo.len() + sh.len());
        input.extend_from_slice(geo);
        input.extend_from_slice(sh);
        let mut ws = self.color_net.workspace();
        let out = self.color_net.forward(&input, &mut ws);
        Ok([sigmoid(out[0]), sigmoid(out[1]), sigmoid(out[2])])
    }
}

/// Per-sample activation storage for one ray (or any batch), so compositing
/// can run over all samples before gradients flow back through each.
#[derive(Debug)]
pub struct FieldCache<R> {
    capacity: usize,
    pub feat: Vec<R>,
    density_acts: Vec<Vec<R>>,
    color_in: Vec<R>,
    color_acts: Vec<Vec<R>>,
    d_row_density: Vec<Vec<R>>,
    d_row_color: Vec<Vec<R>>,
    d_color_in: Vec<R>,
    d_density_out: Vec<R>,
}

impl<R: Real> FieldCache<R> {
    pub fn new(model: &FieldModel<R>) -> Self {
        FieldCache {
            capacity: 0,
            feat: Vec::new(),
            density_acts: model.density_net.layers.iter().map(|_| Vec::new()).collect(),
            color_in: Vec::new(),
            color_acts: model.color_net.layers.iter().map(|_| Vec::new()).collect(),
            d_row_density: model
                .density_net
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.in_dim])
                .collect(),
            d_row_color: model
                .color_net
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.in_dim])
                .collect(),
            d_color_in: vec![R::zero(); model.color_net.in_dim()],
            d_density_out: vec![R::zero(); model.density_net.out_dim()],
        }
    }

    pub fn ensure(&mut self, model: &FieldModel<R>, samples: usize) {
        if samples <= self.capacity {
            return;
        }
        self.capacity = samples;
        self.feat.resize(samples * model.density_net.in_dim(), R::zero());
        for (buf, layer) in self.density_acts.iter_mut().zip(&model.density_net.layers) {
            buf.resize(samples * layer.out_dim, R::zero());
        }
        self.color_in
            .resize(samples * model.color_net.in_dim(), R::zero());
        for (buf, layer) in self.color_acts.iter_mut().zip(&model.color_net.layers) {
            buf.resize(samples * layer.out_dim, R::zero());
        }
    }

    pub fn feat_row_mut(&mut self, model: &FieldModel<R>, i: usize) -> &mut [R] {
        let d = model.density_net.in_dim();
        &mut self.feat[i * d..(i + 1) * d]
    }
}

impl<R: Real> FieldModel<R> {
    /// Forward one sample whose encoded feature is already in
    /// `cache.feat_row_mut(i)`. Returns (sigma, rgb).
    pub fn eval_at(&self, cache: &mut FieldCache<R>, sh: &[R; SH_DIM], i: usize) -> (R, [R; 3]) {
        let feat_dim = self.density_net.in_dim();
        let feat = &cache.feat[i * feat_dim..(i + 1) * feat_dim];
        forward_at(&self.density_net, feat, &mut cache.density_acts, i);
        let d_out_dim = self.density_net.out_dim();
        let d_out = &cache.density_acts.last().unwrap()[i * d_out_dim..(i + 1) * d_out_dim];
        let sigma = softplus(d_out[0]);

        let c_in_dim = self.color_net.in_dim();
        let row = &mut cache.color_in[i * c_in_dim..(i + 1) * c_in_dim];
        row[..self.geo_dim].copy_from_slice(&d_out[1..]);
        row[self.geo_dim..].copy_from_slice(sh);
        let row = &cache.color_in[i * c_in_dim..(i + 1) * c_in_dim];
        forward_at(&self.color_net, row, &mut cache.color_acts, i);
        let c_out = &cache.color_acts.last().unwrap()[i * 3..(i + 1) * 3];
        (sigma, [sigmoid(c_out[0]), sigmoid(c_out[1]), sigmoid(c_out[2])])
    }

    /// Backward for sample `i` of the cached forward pass; accumulates MLP
    /// grads and writes dL/d(feature) into `d_feat`.
    pub fn backward_at(
        &self,
        cache: &mut FieldCache<R>,
        i: usize,
        d_sigma: R,
        d_color: &[R; 3],
        d_feat: &mut [R],
        grads: &mut FieldGrads<R>,
    ) {
        let FieldCache {
            feat,
            density_acts,
            color_in,
            color_acts,
            d_row_density,
            d_row_color,
            d_color_in,
            d_density_out,
            ..
        } = cache;

        let c_out = &color_acts.last().unwrap()[i * 3..(i + 1) * 3];
        let mut d_raw_color = [R::zero(); 3];
        for j in 0..3 {
            let c = sigmoid(c_out[j]);
            d_raw_color[j] = d_color[j] * c * (R::one() - c);
        }
        let c_in_dim = self.color_net.in_dim();
        let color_in_row = &color_in[i * c_in_dim..(i + 1) * c_in_dim];
        backward_at(
            &self.color_net,
            color_in_row,
            &d_raw_color,
            color_acts,
            i,
            d_row_color,
            d_color_in,
            &mut grads.color,
        );

        let d_out_dim = self.density_net.out_dim();
        let raw_sigma = density_acts.last().unwrap()[i * d_out_dim];
        d_density_out[0] = d_sigma * sigmoid(raw_sigma);
        d_density_out[1..].copy_from_slice(&d_color_in[..self.geo_dim]);

        let feat_dim = self.density_net.in_dim();
        let feat_row = &feat[i * feat_dim..(i + 1) * feat_dim];
        backward_at(
            &self.density_net,
            feat_row,
            d_density_out,
            density_acts,
            i,
            d_row_density,
            d_feat,
            &mut grads.density,
        );
    }
}

fn forward_at<R: Real>(mlp: &Mlp<R>, x: &[R], acts: &mut [Vec<R>], row: usize) {
    let n = mlp.layers.len();
    for k in 0..n {
        let (head, tail) = acts.split_at_mut(k);
        let layer = &mlp.layers[k];
        let input: &[R] = if k == 0 {
            x
        } else {
            &head[k - 1][row * layer.in_dim..(row + 1) * layer.in_dim]
        };
        let out = &mut tail[0][row * layer.out_dim..(row + 1) * layer.out_dim];
        layer.forward(input, out);
        if k + 1 < n {
            for v in out.iter_mut() {
                if *v < R::zero() {
                    *v = R::zero();
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_at<R: Real>(
    mlp: &Mlp<R>,
    x: &[R],
    d_out: &[R],
    acts: &[Vec<R>],
    row: usize,
    d_rows: &mut [Vec<R>],
    d_x: &mut [R],
    grads: &mut MlpGrads<R>,
) {
    let n = mlp.layers.len();
    for k in (0..n).rev() {
        let layer = &mlp.layers[k];
        let (left, right) = d_rows.split_at_mut(k + 1);
        let d_cur: &[R] = if k == n - 1 { d_out } else { &right[0] };
        let input: &[R] = if k == 0 {
            x
        } else {
            &acts[k - 1][row * layer.in_dim..(row + 1) * layer.in_dim]
        };
        layer.backward(input, d_cur, &mut left[k], &mut grads[k]);
        if k > 0 {
            let prev = &acts[k - 1][row * layer.in_dim..(row + 1) * layer.in_dim];
            for (d, &a) in left[k].iter_mut().zip(prev) {
                if a <= R::zero() {
                    *d = R::zero();
                }
            }
        }
    }
    d_x.copy_from_slice(&d_rows[0]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> FieldModel<f64> {
        FieldModel::init(8, 7, &[16], &[16, 16], &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn zero_params_give_softplus_zero_density() {
        let mut m = model(0);
        for layer in m.density_net.layers.iter_mut() {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let (sigma, geo) = m.density_head(&vec![0.3; 8]).unwrap();
        assert!((sigma - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(geo.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn saturated_density_limits() {
        assert!(softplus(-60.0f64) < 1e-20);
        assert!((softplus(60.0f64) - 60.0).abs() < 1e-12);
    }

    #[test]
    fn zero_color_net_outputs_mid_gray() {
        let mut m = model(1);
        for layer in m.color_net.layers.iter_mut() {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let sh = [0.1; SH_DIM];
        let c = m.color_head(&vec![0.2; 7], &sh).unwrap();
        assert_eq!(c, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn saturating_bias_drives_channel_to_one() {
        let mut m = model(2);
        let last = m.color_net.layers.last_mut().unwrap();
        last.w.fill(0.0);
        last.b = vec![40.0, -40.0, 0.0];
        let sh = [0.0; SH_DIM];
        let c = m.color_head(&vec![0.1; 7], &sh).unwrap();
        assert!(c[0] > 1.0 - 1e-12);
        assert!(c[1] < 1e-12);
        assert_eq!(c[2], 0.5);
    }

    #[test]
    fn density_head_matches_reference_matmul() {
        let m = model(3);
        let feat: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.35).collect();
        let (sigma, geo) = m.density_head(&feat).unwrap();

        // independent dense reference
        let l0 = &m.density_net.layers[0];
        let mut h = vec![0.0; l0.out_dim];
        for o in 0..l0.out_dim {
            let mut acc = l0.b[o];
            for i in 0..l0.in_dim {
                acc += l0.w[o * l0.in_dim + i] * feat[i];
            }
            h[o] = acc.max(0.0);
        }
        let l1 = &m.density_net.layers[1];
        let mut out = vec![0.0; l1.out_dim];
        for o in 0..l1.out_dim {
            let mut acc = l1.b[o];
            for i in 0..l1.in_dim {
                acc += l1.w[o * l1.in_dim + i] * h[i];
            }
            out[o] = acc;
        }
        assert!((sigma - softplus(out[0])).abs() < 1e-14);
        for (a, b) in geo.iter().zip(&out[1..]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(sigma >= 0.0);
    }

    #[test]
    fn outputs_stay_in_range_for_random_inputs() {
        let m = model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        for _ in 0..100 {
            let feat: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (sigma, geo) = m.density_head(&feat).unwrap();
            assert!(sigma >= 0.0 && sigma.is_finite());
            let sh: Vec<f64> = (0..SH_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c = m.color_head(&geo, &sh).unwrap();
            assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m = model(6);
        assert!(m.density_head(&vec![0.0; 5]).is_err());
        assert!(m.color_head(&vec![0.0; 7], &vec![0.0; 3]).is_err());
    }

    #[test]
    fn cached_eval_matches_standalone_heads() {
        let m = model(7);
        let mut cache = FieldCache::new(&m);
        cache.ensure(&m, 4);
        let sh_f = [0.25; SH_DIM];
        for i in 0..4 {
            let feat: Vec<f64> = (0..8).map(|j| (i as f64 + 1.0) * 0.07 * (j as f64 - 3.0)).collect();
            cache.feat_row_mut(&m, i).copy_from_slice(&feat);
            let (sigma, color) = m.eval_at(&mut cache, &sh_f, i);
            let (s2, geo) = m.density_head(&feat).unwrap();
            let c2 = m.color_head(&geo, &sh_f).unwrap();
            assert_eq!(sigma, s2);
            assert_eq!(color, c2);
        }
    }

    #[test]
    fn cached_backward_matches_finite_differences() {
        let mut m = model(8);
        let sh = [0.3; SH_DIM];
        let feat: Vec<f64> = (0..8).map(|j| 0.2 * (j as f64) - 0.8).collect();

        // scalar objective: 2*sigma + sum(color * [1, -1, 0.5])
        let eval = |m: &FieldModel<f64>| {
            let mut cache = FieldCache::new(m);
            cache.ensure(m, 1);
            cache.feat_row_mut(m, 0).copy_from_slice(&feat);
            let (sigma, c) = m.eval_at(&mut cache, &sh, 0);
            2.0 * sigma + c[0] - c[1] + 0.5 * c[2]
        };

        let mut cache = FieldCache::new(&m);
        cache.ensure(&m, 1);
        cache.feat_row_mut(&m, 0).copy_from_slice(&feat);
        m.eval_at(&mut cache, &sh, 0);
        let mut grads = m.grads();
        let mut d_feat = vec![0.0; 8];
        m.backward_at(&mut cache, 0, 2.0, &[1.0, -1.0, 0.5], &mut d_feat, &mut grads);

        let eps = 1e-6;
        fn wref(m: &mut FieldModel<f64>, net: usize, layer: usize, idx: usize) -> &mut f64 {
            let mlp = if net == 0 { &mut m.density_net } else { &mut m.color_net };
            &mut mlp.layers[layer].w[idx]
        }
        // a few density weights, color weights, and the feature itself
        for (net, layer, idx) in [(0usize, 0usize, 3usize), (0, 1, 10), (1, 0, 5), (1, 2, 7)] {
            let orig = *wref(&mut m, net, layer, idx);
            *wref(&mut m, net, layer, idx) = orig + eps;
            let up = eval(&m);
            *wref(&mut m, net, layer, idx) = orig - eps;
            let down = eval(&m);
            *wref(&mut m, net, layer, idx) = orig;
            let fd = (up - down) / (2.0 * eps);
            let a = if net == 0 {
                grads.density[layer].w[idx]
            } else {
                grads.color[layer].w[idx]
            };
            assert!(
                (fd - a).abs() < 1e-6 * (1.0 + a.abs()),
                "net {net} layer {layer} w[{idx}]: fd {fd} vs {a}"
            );
        }
    }
}
