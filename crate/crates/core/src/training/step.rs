use super::loss::{
    loss_distortion, loss_distortion_backward, loss_total, opacity_entropy,
    opacity_entropy_grad, LossWeights,
};
use super::TrainingError;
use crate::field::{sh_encode, FieldCache, SH_DIM};
use crate::model::{ModelGrads, NerfModel};
use crate::real::Real;
use crate::renderer::{
    alpha_from_density, composite, composite_backward, march_samples, CompositeResult,
    MarchBuffer, OccupancyBitfield, Ray,
};
use rayon::prelude::*;

/// Rays with their t ranges already clamped to the scene box, plus ground
/// truth colors.
#[derive(Debug, Clone, Default)]
pub struct RayBatch {
    pub rays: Vec<Ray>,
    pub gts: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct StepOptions {
    pub march_step: f64,
    pub termination_threshold: f64,
    pub background: [f64; 3],
    pub loss_weights: LossWeights,
    /// Gradient workers; chunk grads merge in fixed chunk order, so runs are
    /// reproducible for a fixed value.
    pub chunks: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LossReport {
    pub rgb: f64,
    pub opacity: f64,
    pub distortion: f64,
    pub total: f64,
    pub rays: usize,
    pub samples: usize,
}

/// Everything one chunk's forward pass keeps for its backward pass.
struct ChunkForward<R: Real> {
    ray_ids: Vec<usize>,
    ray_ranges: Vec<(usize, usize)>,
    t_ranges: Vec<(f64, f64)>,
    sh: Vec<[R; SH_DIM]>,
    composites: Vec<CompositeResult<R>>,
    preds: Vec<[R; 3]>,
    cache: FieldCache<R>,
    positions: Vec<[f64; 3]>,
    ts: Vec<f64>,
    deltas: Vec<f64>,
    alphas: Vec<R>,
    colors: Vec<[R; 3]>,
    // per-ray loss parts
    rgb_parts: Vec<R>,
    dist_parts: Vec<R>,
    entropy_sum: R,
}

fn chunk_ranges(n: usize, chunks: usize) -> Vec<(usize, usize)> {
    let chunks = chunks.max(1).min(n.max(1));
    let per = n.div_ceil(chunks);
    (0..chunks)
        .map(|c| (c * per, ((c + 1) * per).min(n)))
        .filter(|(a, b)| a < b)
        .collect()
}

fn forward_chunk<R: Real>(
    model: &NerfModel<R>,
    bitfield: &OccupancyBitfield,
    batch: &RayBatch,
    range: (usize, usize),
    opts: &StepOptions,
) -> Result<ChunkForward<R>, TrainingError> {
    let mut fwd = ChunkForward {
        ray_ids: Vec::new(),
        ray_ranges: Vec::new(),
        t_ranges: Vec::new(),
        sh: Vec::new(),
        composites: Vec::new(),
        preds: Vec::new(),
        cache: model.cache(),
        positions: Vec::new(),
        ts: Vec::new(),
        deltas: Vec::new(),
        alphas: Vec::new(),
        colors: Vec::new(),
        rgb_parts: Vec::new(),
        dist_parts: Vec::new(),
        entropy_sum: R::zero(),
    };
    let mut march = MarchBuffer::default();
    let threshold = R::from_f64(opts.termination_threshold);
    let bg = [
        R::from_f64(opts.background[0]),
        R::from_f64(opts.background[1]),
        R::from_f64(opts.background[2]),
    ];

    for r in range.0..range.1 {
        let ray = &batch.rays[r];
        march_samples(ray, bitfield, opts.march_step, &mut march);

        let base = fwd.ts.len();
        let sh64 = sh_encode(&[ray.direction.x, ray.direction.y, ray.direction.z])?;
        let mut sh = [R::zero(); SH_DIM];
        for (dst, &s) in sh.iter_mut().zip(&sh64) {
            *dst = R::from_f64(s);
        }

        fwd.cache.ensure(&model.field, base + march.len());
        let mut transmittance = R::one();
        for i in 0..march.len() {
            let p = nalgebra::Vector3::from(march.positions[i]);
            let (sigma, c) = model.eval_sample(&mut fwd.cache, &p, &sh, base + i)?;
            let alpha = alpha_from_density(sigma, R::from_f64(march.deltas[i]));
            fwd.positions.push(march.positions[i]);
            fwd.ts.push(march.ts[i]);
            fwd.deltas.push(march.deltas[i]);
            fwd.alphas.push(alpha);
            fwd.colors.push(c);
            transmittance *= R::one() - alpha;
            if transmittance < threshold {
                break;
            }
        }
        let end = fwd.ts.len();

        let ts_r: Vec<R> = fwd.ts[base..end].iter().map(|&t| R::from_f64(t)).collect();
        let comp = composite(&fwd.alphas[base..end], &fwd.colors[base..end], &ts_r, threshold);
        debug_assert_eq!(comp.processed, end - base);

        let mut pred = [R::zero(); 3];
        for c in 0..3 {
            pred[c] = comp.color[c] + comp.transmittance * bg[c];
        }

        let gt = batch.gts[r];
        let mut rgb_part = R::zero();
        for c in 0..3 {
            let d = pred[c] - R::from_f64(gt[c]);
            rgb_part += d * d;
        }

        for &a in &fwd.alphas[base..end] {
            fwd.entropy_sum += opacity_entropy(a);
        }

        let dist_part = if end > base {
            let (s, ds) = normalized_intervals::<R>(
                &fwd.ts[base..end],
                &fwd.deltas[base..end],
                ray.t_near,
                ray.t_far,
            );
            loss_distortion(&comp.weights, &s, &ds)?
        } else {
            R::zero()
        };

        fwd.ray_ids.push(r);
        fwd.ray_ranges.push((base, end));
        fwd.t_ranges.push((ray.t_near, ray.t_far));
        fwd.sh.push(sh);
        fwd.composites.push(comp);
        fwd.preds.push(pred);
        fwd.rgb_parts.push(rgb_part);
        fwd.dist_parts.push(dist_part);
    }
    Ok(fwd)
}

fn normalized_intervals<R: Real>(
    ts: &[f64],
    deltas: &[f64],
    t_near: f64,
    t_far: f64,
) -> (Vec<R>, Vec<R>) {
    let span = (t_far - t_near).max(1e-12);
    let s = ts
        .iter()
        .map(|&t| R::from_f64((t - t_near) / span))
        .collect();
    let ds = deltas.iter().map(|&d| R::from_f64(d / span)).collect();
    (s, ds)
}

#[allow(clippy::too_many_arguments)]
fn backward_chunk<R: Real>(
    model: &NerfModel<R>,
    batch: &RayBatch,
    fwd: &mut ChunkForward<R>,
    opts: &StepOptions,
    n_rays: usize,
    n_samples: usize,
    grads: &mut ModelGrads<R>,
) -> Result<(), TrainingError> {
    let inv_rays = R::from_f64(1.0 / n_rays as f64);
    let op_scale = if n_samples > 0 {
        R::from_f64(opts.loss_weights.lambda_op / n_samples as f64)
    } else {
        R::zero()
    };
    let dist_scale = R::from_f64(opts.loss_weights.lambda_dist) * inv_rays;
    let two = R::from_f64(2.0);
    let bg = [
        R::from_f64(opts.background[0]),
        R::from_f64(opts.background[1]),
        R::from_f64(opts.background[2]),
    ];

    let mut d_alpha: Vec<R> = Vec::new();
    let mut d_color: Vec<[R; 3]> = Vec::new();
    let mut d_w: Vec<R> = Vec::new();
    let mut d_feat = vec![R::zero(); model.encoder.output_dim()];

    for (k, &ray_id) in fwd.ray_ids.iter().enumerate() {
        let (base, end) = fwd.ray_ranges[k];
        let n = end - base;
        if n == 0 {
            continue;
        }
        let comp = &fwd.composites[k];
        let gt = batch.gts[ray_id];

        let mut d_pred = [R::zero(); 3];
        for c in 0..3 {
            d_pred[c] = two * (fwd.preds[k][c] - R::from_f64(gt[c])) * inv_rays;
        }

        d_w.clear();
        d_w.resize(n, R::zero());
        let (s, ds) = normalized_intervals::<R>(
            &fwd.ts[base..end],
            &fwd.deltas[base..end],
            fwd.t_ranges[k].0,
            fwd.t_ranges[k].1,
        );
        loss_distortion_backward(&comp.weights, &s, &ds, dist_scale, &mut d_w)?;

        d_alpha.clear();
        d_alpha.resize(n, R::zero());
        d_color.clear();
        d_color.resize(n, [R::zero(); 3]);
        composite_backward(
            &fwd.alphas[base..end],
            &fwd.colors[base..end],
            comp,
            &d_pred,
            Some(&d_w),
            Some(&bg),
            &mut d_alpha,
            &mut d_color,
        );

        for i in 0..n {
            let alpha = fwd.alphas[base + i];
            let d_alpha_total = d_alpha[i] + op_scale * opacity_entropy_grad(alpha);
            let delta = R::from_f64(fwd.deltas[base + i]);
            let d_sigma = d_alpha_total * (R::one() - alpha) * delta;
            model.field.backward_at(
                &mut fwd.cache,
                base + i,
                d_sigma,
                &d_color[i],
                &mut d_feat,
                &mut grads.field,
            );
            let x = model
                .aabb
                .normalize(&nalgebra::Vector3::from(fwd.positions[base + i]));
            model.encoder.backward_into(&x, &d_feat, &mut grads.tables)?;
        }
    }
    Ok(())
}

fn assemble_report<R: Real>(
    chunks: &[ChunkForward<R>],
    weights: &LossWeights,
    n_rays: usize,
) -> LossReport {
    let mut rgb = 0.0;
    let mut entropy = 0.0;
    let mut dist = 0.0;
    let mut samples = 0usize;
    for c in chunks {
        rgb += c.rgb_parts.iter().map(|v| Real::to_f64(*v)).sum::<f64>();
        dist += c.dist_parts.iter().map(|v| Real::to_f64(*v)).sum::<f64>();
        entropy += c.entropy_sum.to_f64();
        samples += c.ts.len();
    }
    let rgb = rgb / n_rays.max(1) as f64;
    let dist = dist / n_rays.max(1) as f64;
    let opacity = if samples > 0 {
        entropy / samples as f64
    } else {
        0.0
    };
    LossReport {
        rgb,
        opacity,
        distortion: dist,
        total: loss_total(rgb, opacity, dist, weights),
        rays: n_rays,
        samples,
    }
}

/// Forward render + loss for a ray batch, without gradients.
pub fn forward_loss<R: Real>(
    model: &NerfModel<R>,
    bitfield: &OccupancyBitfield,
    batch: &RayBatch,
    opts: &StepOptions,
) -> Result<LossReport, TrainingError> {
    let ranges = chunk_ranges(batch.rays.len(), opts.chunks);
    let chunks: Vec<ChunkForward<R>> = ranges
        .into_par_iter()
        .map(|range| forward_chunk(model, bitfield, batch, range, opts))
        .collect::<Result<_, _>>()?;
    Ok(assemble_report(&chunks, &opts.loss_weights, batch.rays.len()))
}

/// Forward + reverse pass over a ray batch. Gradients of the total loss
/// accumulate into `grads` (zeroed here). Chunks run in parallel and merge
/// in index order.
pub fn forward_backward<R: Real>(
    model: &NerfModel<R>,
    bitfield: &OccupancyBitfield,
    batch: &RayBatch,
    opts: &StepOptions,
    grads: &mut ModelGrads<R>,
) -> Result<LossReport, TrainingError> {
    if batch.rays.len() != batch.gts.len() {
        return Err(TrainingError::LengthMismatch {
            expected: batch.rays.len(),
            got: batch.gts.len(),
        });
    }
    grads.zero();
    let n_rays = batch.rays.len();
    let ranges = chunk_ranges(n_rays, opts.chunks);

    let mut chunks: Vec<ChunkForward<R>> = ranges
        .into_par_iter()
        .map(|range| forward_chunk(model, bitfield, batch, range, opts))
        .collect::<Result<_, _>>()?;

    let report = assemble_report(&chunks, &opts.loss_weights, n_rays);
    let n_samples = report.samples;

    let chunk_grads: Vec<ModelGrads<R>> = chunks
        .par_iter_mut()
        .map(|fwd| {
            let mut g = model.grads();
            backward_chunk(model, batch, fwd, opts, n_rays, n_samples, &mut g).map(|_| g)
        })
        .collect::<Result<_, _>>()?;
    for g in &chunk_grads {
        grads.add_assign(g);
    }
    Ok(report)
}
