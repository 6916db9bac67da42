use super::loss::LossWeights;
use super::step::{forward_backward, RayBatch, StepOptions};
use super::{TrainState, TrainingError};
use crate::metrics::psnr;
use crate::real::Real;
use crate::renderer::{ray_aabb, render_image, OccupancyBitfield, RenderOptions};
use crate::scenedata::View;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};


#[derive(Debug, Clone)]
pub struct TrainLoopConfig {
    pub iterations: u64,
    pub batch_rays: usize,
    pub lr_tables: f64,
    pub lr_mlp: f64,
    pub cosine_decay: bool,
    pub seed: u64,
    /// Gradient worker count; fixed value => reproducible run.
    pub workers: usize,
    /// March step in scene units; 0 picks diagonal / 512.
    pub step_size: f64,
    pub termination_threshold: f64,
    pub background: [f64; 3],
    pub loss_weights: LossWeights,
    pub bitfield_resolution: usize,
    pub bitfield_warmup: u64,
    pub bitfield_interval: u64,
    pub bitfield_decay: f64,
    /// Density threshold; 0 picks 0.01 / step.
    pub bitfield_threshold: f64,
    /// Held-out PSNR cadence in steps (0 disables).
    pub eval_interval: u64,
    /// How many test views the periodic PSNR averages over.
    pub eval_views: usize,
}

impl Default for TrainLoopConfig {
    fn default() -> Self {
        TrainLoopConfig {
            iterations: 30_000,
            batch_rays: 4096,
            lr_tables: 1e-2,
            lr_mlp: 1e-3,
            cosine_decay: true,
            seed: 0,
            workers: 0,
            step_size: 0.0,
            termination_threshold: 1e-4,
            background: [1.0, 1.0, 1.0],
            loss_weights: LossWeights::default(),
            bitfield_resolution: 128,
            bitfield_warmup: 256,
            bitfield_interval: 16,
            bitfield_decay: 0.95,
            bitfield_threshold: 0.0,
            eval_interval: 0,
            eval_views: 2,
        }
    }
}

/// One training-step record. Wall-clock timing deliberately lives outside
/// this struct so identical seeded runs serialize byte-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    pub loss_rgb: f64,
    pub loss_opacity: f64,
    pub loss_distortion: f64,
    pub loss_total: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

pub struct TrainOutput<R: Real> {
    pub state: TrainState<R>,
    pub bitfield: OccupancyBitfield,
    pub records: Vec<MetricRecord>,
    /// Seconds per recorded step, parallel to `records`.
    pub wall_times: Vec<f64>,
}

pub(crate) fn sample_batch<R: Real>(
    views: &[View],
    aabb: &crate::renderer::Aabb,
    batch_rays: usize,
    rng: &mut ChaCha8Rng,
) -> RayBatch {
    let _ = R::zero();
    let mut batch = RayBatch::default();
    batch.rays.reserve(batch_rays);
    batch.gts.reserve(batch_rays);
    for _ in 0..batch_rays {
        let view = &views[rng.gen_range(0..views.len())];
        let u = rng.gen_range(0..view.camera.width);
        let v = rng.gen_range(0..view.camera.height);
        let mut ray = view.camera.ray_at(u as f64 + 0.5, v as f64 + 0.5);
        match ray_aabb(&ray, aabb) {
            Some((t0, t1)) => {
                ray.t_near = t0;
                ray.t_far = t1;
            }
            None => {
                ray.t_near = 0.0;
                ray.t_far = 0.0;
            }
        }
        let idx = ((v * view.camera.width + u) * 3) as usize;
        batch.rays.push(ray);
        batch.gts.push([
            view.rgb[idx] as f64,
            view.rgb[idx + 1] as f64,
            view.rgb[idx + 2] as f64,
        ]);
    }
    batch
}

fn cosine_lr(base: f64, step: u64, total: u64) -> f64 {
    if total <= 1 {
        return base;
    }
    let t = step as f64 / total as f64;
    base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

pub fn eval_psnr<R: Real>(
    state: &TrainState<R>,
    bitfield: &OccupancyBitfield,
    views: &[View],
    opts: &RenderOptions,
    max_views: usize,
) -> f64 {
    let n = views.len().min(max_views.max(1));
    let mut total = 0.0;
    for view in &views[..n] {
        let img = render_image(&state.model, &view.camera, bitfield, opts);
        total += psnr(&img.rgb, &view.rgb).unwrap_or(0.0);
    }
    total / n as f64
}

/// Runs the optimization loop: per-step ray batches, Adam updates with
/// cosine-decayed per-group learning rates, scheduled bitfield refreshes,
/// and periodic held-out PSNR. `checkpoint_hook`, when given, fires every
/// `interval` steps (0 = never) and at the end.
pub fn train<R: Real>(
    mut state: TrainState<R>,
    train_views: &[View],
    test_views: &[View],
    config: &TrainLoopConfig,
    mut checkpoint_hook: Option<(u64, &mut dyn FnMut(u64, &TrainState<R>, &OccupancyBitfield))>,
) -> Result<TrainOutput<R>, TrainingError> {
    if train_views.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let aabb = state.model.aabb;
    let step_size = if config.step_size > 0.0 {
        config.step_size
    } else {
        aabb.diagonal() / 512.0
    };
    let bf_threshold = if config.bitfield_threshold > 0.0 {
        config.bitfield_threshold
    } else {
        0.01 / step_size
    } as f32;
    let workers = if config.workers > 0 {
        config.workers
    } else {
        rayon::current_num_threads()
    };

    let opts = StepOptions {
        march_step: step_size,
        termination_threshold: config.termination_threshold,
        background: config.background,
        loss_weights: state.loss_weights,
        chunks: workers,
    };
    let render_opts = RenderOptions {
        step: step_size,
        termination_threshold: config.termination_threshold,
        background: config.background,
    };

    let mut bitfield = OccupancyBitfield::new(config.bitfield_resolution, aabb);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grads = state.model.grads();
    let mut records = Vec::with_capacity(config.iterations as usize);
    let mut wall_times = Vec::with_capacity(config.iterations as usize);

    for step in 0..config.iterations {
        let t0 = std::time::Instant::now();
        let batch = sample_batch::<R>(train_views, &aabb, config.batch_rays, &mut rng);
        let report = forward_backward(&state.model, &bitfield, &batch, &opts, &mut grads)?;
        if !report.total.is_finite() {
            return Err(TrainingError::NonFiniteLoss {
                step,
                rgb: report.rgb,
                opacity: report.opacity,
                distortion: report.distortion,
            });
        }

        let (lr_t, lr_m) = if config.cosine_decay {
            (
                cosine_lr(config.lr_tables, step, config.iterations),
                cosine_lr(config.lr_mlp, step, config.iterations),
            )
        } else {
            (config.lr_tables, config.lr_mlp)
        };
        let groups = state.model.param_groups();
        let garr = grads.arrays();
        let mut parr = state.model.param_arrays_mut();
        state.adam.step(&mut parr, &garr, &groups, lr_t, lr_m);
        drop(parr);
        state.step = step + 1;

        if config.bitfield_interval > 0
            && state.step > config.bitfield_warmup
            && state.step % config.bitfield_interval == 0
        {
            let mut bf_rng =
                ChaCha8Rng::seed_from_u64(config.seed ^ state.step.wrapping_mul(0x9E3779B97F4A7C15));
            let model = &state.model;
            bitfield.update(
                |p| model.sigma_at(p),
                config.bitfield_decay,
                bf_threshold,
                &mut bf_rng,
            );
        }

        let psnr_val = if config.eval_interval > 0
            && !test_views.is_empty()
            && (state.step % config.eval_interval == 0 || state.step == config.iterations)
        {
            Some(eval_psnr(
                &state,
                &bitfield,
                test_views,
                &render_opts,
                config.eval_views,
            ))
        } else {
            None
        };

        records.push(MetricRecord {
            step: state.step,
            loss_rgb: report.rgb,
            loss_opacity: report.opacity,
            loss_distortion: report.distortion,
            loss_total: report.total,
            samples: report.samples,
            psnr: psnr_val,
        });
        wall_times.push(t0.elapsed().as_secs_f64());

        if let Some((interval, hook)) = checkpoint_hook.as_mut() {
            if *interval > 0 && state.step % *interval == 0 && state.step < config.iterations {
                hook(state.step, &state, &bitfield);
            }
        }
    }

    Ok(TrainOutput {
        state,
        bitfield,
        records,
        wall_times,
    })
}
