use super::bitfield::{march_samples, MarchBuffer, OccupancyBitfield};
use super::camera::Camera;
use super::composite::{alpha_from_density, composite};
use super::ray_aabb;
use crate::field::{sh_encode, SH_DIM};
use crate::model::NerfModel;
use crate::real::Real;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub step: f64,
    pub termination_threshold: f64,
    pub background: [f64; 3],
}

impl RenderOptions {
    /// Step = diagonal / 512, termination 1e-4, white background.
    pub fn defaults_for(aabb_diagonal: f64) -> Self {
        RenderOptions {
            step: aabb_diagonal / 512.0,
            termination_threshold: 1e-4,
            background: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB in [0,1].
    pub rgb: Vec<f32>,
    /// Row-major expected depth in scene units (0 where nothing was hit).
    pub depth: Vec<f32>,
    /// Total marched samples, for througput reporting.
    pub samples: u64,
}

/// Composites every pixel of `camera` through the model, background applied
/// as color + remaining-transmittance * background. Rows render in parallel;
/// each pixel is independent, so the result is deterministic.
pub fn render_image<R: Real>(
    model: &NerfModel<R>,
    camera: &Camera,
    bitfield: &OccupancyBitfield,
    opts: &RenderOptions,
) -> RenderedImage {
    let w = camera.width as usize;
    let h = camera.height as usize;
    let mut rgb = vec![0.0f32; w * h * 3];
    let mut depth = vec![0.0f32; w * h];

    let samples: u64 = rgb
        .par_chunks_mut(w * 3)
        .zip(depth.par_chunks_mut(w))
        .enumerate()
        .map(|(v, (rgb_row, depth_row))| {
            let mut march = MarchBuffer::default();
            let mut cache = model.cache();
            let mut row_samples = 0u64;
            for u in 0..w {
                let mut ray = camera.ray_at(u as f64 + 0.5, v as f64 + 0.5);
                let mut color = opts.background;
                let mut d = 0.0f64;
                if let Some((t0, t1)) = ray_aabb(&ray, &model.aabb) {
                    ray.t_near = t0;
                    ray.t_far = t1;
                    march_samples(&ray, bitfield, opts.step, &mut march);
                    if !march.is_empty() {
                        row_samples += march.len() as u64;
                        let (c, dd) = shade_ray(model, &mut cache, &ray, &march, opts);
                        color = c;
                        d = dd;
                    }
                }
                rgb_row[u * 3] = color[0] as f32;
                rgb_row[u * 3 + 1] = color[1] as f32;
                rgb_row[u * 3 + 2] = color[2] as f32;
                depth_row[u] = d as f32;
            }
            row_samples
        })
        .sum();

    RenderedImage {
        width: camera.width,
        height: camera.height,
        rgb,
        depth,
        samples,
    }
}

fn shade_ray<R: Real>(
    model: &NerfModel<R>,
    cache: &mut crate::field::FieldCache<R>,
    ray: &super::camera::Ray,
    march: &MarchBuffer,
    opts: &RenderOptions,
) -> ([f64; 3], f64) {
    let n = march.len();
    cache.ensure(&model.field, n);
    let sh64 = sh_encode(&[ray.direction.x, ray.direction.y, ray.direction.z])
        .expect("ray directions are unit length");
    let mut sh = [R::zero(); SH_DIM];
    for (dst, &s) in sh.iter_mut().zip(&sh64) {
        *dst = R::from_f64(s);
    }

    let mut alphas = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut ts = Vec::with_capacity(n);
    let threshold = R::from_f64(opts.termination_threshold);
    let mut transmittance = R::one();
    for i in 0..n {
        let p = nalgebra::Vector3::from(march.positions[i]);
        let (sigma, c) = model
            .eval_sample(cache, &p, &sh, i)
            .expect("marched samples lie inside the scene box");
        let alpha = alpha_from_density(sigma, R::from_f64(march.deltas[i]));
        alphas.push(alpha);
        colors.push(c);
        ts.push(R::from_f64(march.ts[i]));
        // march/eval stops with compositing past the termination point
        transmittance *= R::one() - alpha;
        if transmittance < threshold {
            break;
        }
    }

    let result = composite(&alphas, &colors, &ts, threshold);
    let mut color = [0.0f64; 3];
    for c in 0..3 {
        color[c] =
            result.color[c].to_f64() + result.transmittance.to_f64() * opts.background[c];
    }
    (color, result.depth.to_f64())
}
