use super::analytic::AnalyticScene;
use super::dataset::View;
use crate::renderer::{composite, ray_aabb, Camera, RenderedImage};
use rayon::prelude::*;

/// Ground-truth render: dense uniform marching of the analytic density and
/// albedo fields through the same opacity/compositing formulas the trained
/// model uses. `step` should sit well under the training step (a quarter of
/// it in the generation pipeline) so quantization is sub-pixel.
pub fn oracle_render(scene: &AnalyticScene, camera: &Camera, step: f64) -> RenderedImage {
    let w = camera.width as usize;
    let h = camera.height as usize;
    let mut rgb = vec![0.0f32; w * h * 3];
    let mut depth = vec![0.0f32; w * h];

    let samples: u64 = rgb
        .par_chunks_mut(w * 3)
        .zip(depth.par_chunks_mut(w))
        .enumerate()
        .map(|(v, (rgb_row, depth_row))| {
            let mut count = 0u64;
            for u in 0..w {
                let mut ray = camera.ray_at(u as f64 + 0.5, v as f64 + 0.5);
                let mut color = scene.background;
                let mut d = 0.0;
                if let Some((t0, t1)) = ray_aabb(&ray, &scene.aabb) {
                    ray.t_near = t0;
                    ray.t_far = t1;
                    let mut alphas = Vec::new();
                    let mut colors = Vec::new();
                    let mut ts = Vec::new();
                    let mut k = 0u64;
                    let mut transmittance = 1.0f64;
                    loop {
                        let t = t0 + k as f64 * step;
                        if t >= t1 || transmittance < 1e-6 {
                            break;
                        }
                        let p = ray.origin + ray.direction * t;
                        let (sigma, albedo) = scene.sample(&[p.x, p.y, p.z]);
                        if sigma > 0.0 {
                            let alpha = 1.0 - (-sigma * step).exp();
                            transmittance *= 1.0 - alpha;
                            alphas.push(alpha);
                            colors.push(albedo);
                            ts.push(t);
                        }
                        k += 1;
                    }
                    count += k;
                    if !alphas.is_empty() {
                        let comp = composite(&alphas, &colors, &ts, 1e-6);
                        for c in 0..3 {
                            color[c] =
                                comp.color[c] + comp.transmittance * scene.background[c];
                        }
                        d = comp.depth;
                    }
                }
                rgb_row[u * 3] = color[0] as f32;
                rgb_row[u * 3 + 1] = color[1] as f32;
                rgb_row[u * 3 + 2] = color[2] as f32;
                depth_row[u] = d as f32;
            }
            count
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

/// Renders a camera list into ground-truth views.
pub fn oracle_views(scene: &AnalyticScene, cameras: &[Camera], step: f64) -> Vec<View> {
    cameras
        .iter()
        .map(|camera| View {
            camera: camera.clone(),
            rgb: oracle_render(scene, camera, step).rgb,
        })
        .collect()
}
