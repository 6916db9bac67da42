use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use super::config::{EncoderKind, RunConfig};
use super::CliError;
use crate::metrics::{psnr, ssim};
use crate::model::NerfModel;
use crate::real::{Dtype, Real};
use crate::renderer::{render_image, Camera, OccupancyBitfield, RenderOptions};
use crate::scenedata::{
    generate_scene, images, load_dataset, oracle_views, orbit_cameras, write_dataset, View,
};
use crate::training::{train, TrainState};
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Train/test views for a config: oracle renders of the procedural scene or
/// the dataset splits from disk.
pub fn build_views(config: &RunConfig) -> Result<(Vec<View>, Vec<View>), CliError> {
    if let Some(sc) = &config.scene {
        let spec = config.scene_spec().unwrap();
        let scene = generate_scene(&spec, sc.scene_seed)?;
        let oracle_step = config.march_step() / sc.oracle_step_divisor;
        let train_cams = orbit_cameras(
            sc.views,
            sc.orbit_radius,
            sc.image_size,
            sc.image_size,
            sc.fov_x,
        );
        let test_cams: Vec<Camera> = orbit_cameras(
            sc.views + sc.test_views,
            sc.orbit_radius,
            sc.image_size,
            sc.image_size,
            sc.fov_x,
        )
        .into_iter()
        .skip(sc.views)
        .collect();
        let mut train_views = oracle_views(&scene, &train_cams, oracle_step);
        let test_views = oracle_views(&scene, &test_cams, oracle_step);
        if sc.train_view_limit > 0 && sc.train_view_limit < train_views.len() {
            let n = train_views.len();
            train_views = (0..sc.train_view_limit)
                .map(|i| train_views[i * n / sc.train_view_limit].clone())
                .collect();
        }
        Ok((train_views, test_views))
    } else if let Some(ds) = &config.dataset {
        let bg = config.background().map(|v| v as f32);
        let train = load_dataset(&ds.path, &ds.train_split, bg, config.aabb())?;
        let test = load_dataset(&ds.path, &ds.test_split, bg, config.aabb())?;
        let mut train_views = train.views;
        if ds.train_view_limit > 0 && ds.train_view_limit < train_views.len() {
            let n = train_views.len();
            train_views = (0..ds.train_view_limit)
                .map(|i| train_views[i * n / ds.train_view_limit].clone())
                .collect();
        }
        Ok((train_views, test.views))
    } else {
        Err(CliError::Config("one of `scene` or `dataset` must be set".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub metrics_log: PathBuf,
    pub steps: u64,
    pub final_psnr: f64,
}

/// Validates, trains, and writes checkpoint + metric logs under the output
/// directory. Nothing is created on disk until validation passes.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary, CliError> {
    config.validate()?;
    match config.precision.as_str() {
        "f64" => run_train::<f64>(config),
        _ => run_train::<f32>(config),
    }
}

fn run_train<R: Real>(config: &RunConfig) -> Result<TrainSummary, CliError> {
    let (train_views, test_views) = build_views(config)?;
    let out = &config.out;
    std::fs::create_dir_all(out)?;
    let snapshot = config.to_toml();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model: NerfModel<R> = config.build_model(&mut rng)?;
    let state = TrainState::new(model, config.loss_weights());
    let loop_config = config.train_loop_config();

    let ck_interval = config.training.checkpoint_interval;
    let snapshot_for_hook = snapshot.clone();
    let out_for_hook = out.clone();
    let mut hook = move |step: u64, state: &TrainState<R>, bf: &OccupancyBitfield| {
        let path = out_for_hook.join(format!("step_{step:07}.fhcp"));
        if let Err(e) = save_checkpoint(&state.model, bf, step, &snapshot_for_hook, &path) {
            eprintln!("warning: periodic checkpoint failed: {e}");
        }
    };
    let hook_opt: Option<(u64, &mut dyn FnMut(u64, &TrainState<R>, &OccupancyBitfield))> =
        if ck_interval > 0 {
            Some((ck_interval, &mut hook))
        } else {
            None
        };

    let output = train(state, &train_views, &test_views, &loop_config, hook_opt)?;

    let metrics_path = out.join("metrics.jsonl");
    let mut metrics = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
    for record in &output.records {
        serde_json::to_writer(&mut metrics, record).map_err(|e| CliError::Other(e.to_string()))?;
        metrics.write_all(b"\n")?;
    }
    metrics.flush()?;

    let timings_path = out.join("timings.jsonl");
    let mut timings = std::io::BufWriter::new(std::fs::File::create(&timings_path)?);
    for (record, wall) in output.records.iter().zip(&output.wall_times) {
        let line = json!({"step": record.step, "wall_seconds": wall});
        timings.write_all(line.to_string().as_bytes())?;
        timings.write_all(b"\n")?;
    }
    timings.flush()?;

    let ck_path = out.join("checkpoint.fhcp");
    save_checkpoint(
        &output.state.model,
        &output.bitfield,
        output.state.step,
        &snapshot,
        &ck_path,
    )?;

    let render_opts = RenderOptions {
        step: config.march_step(),
        termination_threshold: config.renderer.termination_threshold,
        background: config.background(),
    };
    let final_psnr = if test_views.is_empty() {
        0.0
    } else {
        crate::training::eval_psnr(
            &output.state,
            &output.bitfield,
            &test_views,
            &render_opts,
            test_views.len(),
        )
    };

    Ok(TrainSummary {
        checkpoint: ck_path,
        metrics_log: metrics_path,
        steps: output.state.step,
        final_psnr,
    })
}

/// Checkpoint plus the effective config: the embedded snapshot unless the
/// caller supplies an override.
pub fn load_run(
    checkpoint_path: &Path,
    config_override: Option<&RunConfig>,
) -> Result<(Checkpoint, RunConfig), CliError> {
    let ck = load_checkpoint(checkpoint_path)?;
    let config = match config_override {
        Some(c) => c.clone(),
        None => RunConfig::from_toml(&ck.config_text)?,
    };
    Ok((ck, config))
}

fn checkpoint_dtype(ck: &Checkpoint) -> Dtype {
    ck.arrays.first().map(|a| a.dtype).unwrap_or(Dtype::F32)
}

fn rebuild_model<R: Real>(ck: &Checkpoint, config: &RunConfig) -> Result<NerfModel<R>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model: NerfModel<R> = config.build_model(&mut rng)?;
    ck.apply_to_model(&mut model)?;
    Ok(model)
}

/// A standalone camera description for `render --camera`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CameraSpec {
    pub camera_angle_x: f64,
    pub width: u32,
    pub height: u32,
    pub transform_matrix: [[f64; 4]; 4],
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<Camera, CliError> {
        let m = &self.transform_matrix;
        let rotation = Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        );
        let translation = Vector3::new(m[0][3], m[1][3], m[2][3]);
        Ok(Camera::from_fov(
            self.camera_angle_x,
            self.width,
            self.height,
            rotation,
            translation,
        )?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenderSummary {
    pub images: usize,
    pub out: PathBuf,
}

/// Renders RGB + depth PNGs for the test split (or one explicit camera).
pub fn cmd_render(
    checkpoint_path: &Path,
    config_override: Option<&RunConfig>,
    out: &Path,
    view_limit: usize,
    camera_spec: Option<&Path>,
) -> Result<RenderSummary, CliError> {
    let (ck, config) = load_run(checkpoint_path, config_override)?;
    match checkpoint_dtype(&ck) {
        Dtype::F64 => render_with::<f64>(&ck, &config, out, view_limit, camera_spec),
        Dtype::F32 => render_with::<f32>(&ck, &config, out, view_limit, camera_spec),
    }
}

fn render_with<R: Real>(
    ck: &Checkpoint,
    config: &RunConfig,
    out: &Path,
    view_limit: usize,
    camera_spec: Option<&Path>,
) -> Result<RenderSummary, CliError> {
    let model: NerfModel<R> = rebuild_model(ck, config)?;
    let cameras: Vec<Camera> = if let Some(spec_path) = camera_spec {
        let text = std::fs::read_to_string(spec_path)?;
        let spec: CameraSpec =
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        vec![spec.to_camera()?]
    } else {
        let (_, test_views) = build_views(config)?;
        let mut cams: Vec<Camera> = test_views.into_iter().map(|v| v.camera).collect();
        if view_limit > 0 {
            cams.truncate(view_limit);
        }
        cams
    };

    std::fs::create_dir_all(out)?;
    let opts = RenderOptions {
        step: config.march_step(),
        termination_threshold: config.renderer.termination_threshold,
        background: config.background(),
    };
    let depth_scale = model.aabb.diagonal() + config.scene.as_ref().map(|s| s.orbit_radius).unwrap_or(0.0);
    for (i, camera) in cameras.iter().enumerate() {
        let img = render_image(&model, camera, &ck.bitfield, &opts);
        images::write_rgb_png(&out.join(format!("r_{i}.png")), &img.rgb, img.width, img.height)?;
        images::write_depth_png(
            &out.join(format!("d_{i}.png")),
            &img.depth,
            img.width,
            img.height,
            depth_scale,
        )?;
    }
    Ok(RenderSummary {
        images: cameras.len(),
        out: out.to_path_buf(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub view: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub encoder_params: usize,
    pub mlp_params: usize,
}

/// PSNR/SSIM of the checkpointed model against the test split.
pub fn cmd_eval(
    checkpoint_path: &Path,
    config_override: Option<&RunConfig>,
    out: Option<&Path>,
) -> Result<EvalReport, CliError> {
    let (ck, config) = load_run(checkpoint_path, config_override)?;
    let report = match checkpoint_dtype(&ck) {
        Dtype::F64 => eval_with::<f64>(&ck, &config)?,
        Dtype::F32 => eval_with::<f32>(&ck, &config)?,
    };
    if let Some(out) = out {
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
        for row in &report.rows {
            serde_json::to_writer(&mut file, row).map_err(|e| CliError::Other(e.to_string()))?;
            file.write_all(b"\n")?;
        }
        let summary = json!({
            "mean_psnr": report.mean_psnr,
            "mean_ssim": report.mean_ssim,
            "encoder_params": report.encoder_params,
            "mlp_params": report.mlp_params,
        });
        file.write_all(summary.to_string().as_bytes())?;
        file.write_all(b"\n")?;
    }
    Ok(report)
}

fn eval_with<R: Real>(ck: &Checkpoint, config: &RunConfig) -> Result<EvalReport, CliError> {
    let model: NerfModel<R> = rebuild_model(ck, config)?;
    let (_, test_views) = build_views(config)?;
    let opts = RenderOptions {
        step: config.march_step(),
        termination_threshold: config.renderer.termination_threshold,
        background: config.background(),
    };
    let mut rows = Vec::with_capacity(test_views.len());
    for (i, view) in test_views.iter().enumerate() {
        let img = render_image(&model, &view.camera, &ck.bitfield, &opts);
        if img.rgb.len() != view.rgb.len() {
            return Err(CliError::Other(format!(
                "view {i}: rendered {} values vs ground truth {}",
                img.rgb.len(),
                view.rgb.len()
            )));
        }
        rows.push(EvalRow {
            view: i,
            psnr: psnr(&img.rgb, &view.rgb)?,
            ssim: ssim(&img.rgb, &view.rgb, img.width, img.height)?,
        });
    }
    let n = rows.len().max(1) as f64;
    Ok(EvalReport {
        mean_psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        encoder_params: model.encoder.param_count(),
        mlp_params: model.field.param_count(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub view: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub samples_per_ray: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub repetitions: usize,
    pub param_bytes: usize,
    pub median_seconds: f64,
}

/// Wall-time rendering benchmark over test views.
pub fn cmd_bench(
    checkpoint_path: &Path,
    config_override: Option<&RunConfig>,
    views: usize,
    repetitions: usize,
) -> Result<BenchReport, CliError> {
    let (ck, config) = load_run(checkpoint_path, config_override)?;
    match checkpoint_dtype(&ck) {
        Dtype::F64 => bench_with::<f64>(&ck, &config, views, repetitions),
        Dtype::F32 => bench_with::<f32>(&ck, &config, views, repetitions),
    }
}

fn bench_with<R: Real>(
    ck: &Checkpoint,
    config: &RunConfig,
    views: usize,
    repetitions: usize,
) -> Result<BenchReport, CliError> {
    let model: NerfModel<R> = rebuild_model(ck, config)?;
    let param_bytes = model.param_count() * R::DTYPE.size();
    if repetitions == 0 {
        return Ok(BenchReport {
            rows: vec![],
            repetitions: 0,
            param_bytes,
            median_seconds: 0.0,
        });
    }
    let (_, test_views) = build_views(config)?;
    let cameras: Vec<Camera> = test_views
        .into_iter()
        .take(if views == 0 { usize::MAX } else { views })
        .map(|v| v.camera)
        .collect();
    let opts = RenderOptions {
        step: config.march_step(),
        termination_threshold: config.renderer.termination_threshold,
        background: config.background(),
    };

    let mut rows = Vec::with_capacity(cameras.len());
    let mut all_medians = Vec::new();
    for (i, camera) in cameras.iter().enumerate() {
        let mut times = Vec::with_capacity(repetitions);
        let mut samples = 0u64;
        for _ in 0..repetitions {
            let t0 = Instant::now();
            let img = render_image(&model, camera, &ck.bitfield, &opts);
            times.push(t0.elapsed().as_secs_f64());
            samples = img.samples;
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[times.len() / 2];
        all_medians.push(median);
        let rays = (camera.width * camera.height) as f64;
        rows.push(BenchRow {
            view: i,
            median_seconds: median,
            min_seconds: times[0],
            max_seconds: *times.last().unwrap(),
            samples_per_ray: samples as f64 / rays,
        });
    }
    all_medians.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_seconds = all_medians.get(all_medians.len() / 2).copied().unwrap_or(0.0);
    Ok(BenchReport {
        rows,
        repetitions,
        param_bytes,
        median_seconds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub table_size_log2: u32,
    pub encoder_params: usize,
    /// Occupied-lattice-point count over table rows, per level.
    pub collision_per_level: Vec<f64>,
    pub mean_collision: f64,
    pub psnr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Trains one model per table size and reports parameter count, collision
/// estimate from the converged bitfield, and test PSNR. A failing row is
/// recorded and the sweep continues.
pub fn cmd_ablate_collision(
    config: &RunConfig,
    table_sizes_log2: &[u32],
) -> Result<Vec<AblationRow>, CliError> {
    config.validate()?;
    let mut rows = Vec::with_capacity(table_sizes_log2.len());
    for &log2 in table_sizes_log2 {
        let mut variant = config.clone();
        variant.encoder.table_size_log2 = log2;
        variant.out = config.out.join(format!("t{log2}"));
        match ablate_one(&variant) {
            Ok(row) => rows.push(row),
            Err(e) => rows.push(AblationRow {
                table_size_log2: log2,
                encoder_params: 0,
                collision_per_level: vec![],
                mean_collision: 0.0,
                psnr: 0.0,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(rows)
}

fn ablate_one(config: &RunConfig) -> Result<AblationRow, CliError> {
    let summary = cmd_train(config)?;
    let ck = load_checkpoint(&summary.checkpoint)?;
    let sched = level_resolutions_for(config)?;
    let collision_per_level = collision_estimate(
        config.encoder.kind,
        &sched,
        1usize << config.encoder.table_size_log2,
        &ck.bitfield,
    );
    let mean_collision = if collision_per_level.is_empty() {
        0.0
    } else {
        collision_per_level.iter().sum::<f64>() / collision_per_level.len() as f64
    };
    let encoder_params = match checkpoint_dtype(&ck) {
        Dtype::F32 => rebuild_model::<f32>(&ck, config)?.encoder.param_count(),
        Dtype::F64 => rebuild_model::<f64>(&ck, config)?.encoder.param_count(),
    };
    Ok(AblationRow {
        table_size_log2: config.encoder.table_size_log2,
        encoder_params,
        collision_per_level,
        mean_collision,
        psnr: summary.final_psnr,
        error: None,
    })
}

fn level_resolutions_for(config: &RunConfig) -> Result<Vec<u32>, CliError> {
    Ok(crate::encoding::level_resolutions(
        config.encoder.n_min,
        config.encoder.n_max,
        config.encoder.levels,
    )?
    .resolutions)
}

/// Occupied-lattice-point count / table size per level. Plane encoders
/// project the bitfield onto each axis plane and average the three planes;
/// volume encoders test voxels directly.
pub fn collision_estimate(
    kind: EncoderKind,
    resolutions: &[u32],
    table_size: usize,
    bitfield: &OccupancyBitfield,
) -> Vec<f64> {
    let r = bitfield.resolution;
    let planes: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];
    // project occupancy onto the three axis planes
    let mut plane_masks = vec![vec![false; r * r]; 3];
    for iz in 0..r {
        for iy in 0..r {
            for ix in 0..r {
                if bitfield.bits[ix + iy * r + iz * r * r] {
                    let v = [ix, iy, iz];
                    for (p, axes) in planes.iter().enumerate() {
                        plane_masks[p][v[axes[0]] + v[axes[1]] * r] = true;
                    }
                }
            }
        }
    }

    resolutions
        .iter()
        .map(|&n| {
            let verts = n as usize + 1;
            match kind {
                EncoderKind::Hashgrid3d | EncoderKind::Densegrid => {
                    let mut count = 0usize;
                    for iz in 0..verts {
                        for iy in 0..verts {
                            for ix in 0..verts {
                                let v = [
                                    (ix * r / verts).min(r - 1),
                                    (iy * r / verts).min(r - 1),
                                    (iz * r / verts).min(r - 1),
                                ];
                                if bitfield.bits[v[0] + v[1] * r + v[2] * r * r] {
                                    count += 1;
                                }
                            }
                        }
                    }
                    count as f64 / table_size as f64
                }
                _ => {
                    let mut total = 0.0;
                    for mask in &plane_masks {
                        let mut count = 0usize;
                        for iy in 0..verts {
                            for ix in 0..verts {
                                let vx = (ix * r / verts).min(r - 1);
                                let vy = (iy * r / verts).min(r - 1);
                                if mask[vx + vy * r] {
                                    count += 1;
                                }
                            }
                        }
                        total += count as f64 / table_size as f64;
                    }
                    total / 3.0
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GenSceneSummary {
    pub out: PathBuf,
    pub train_views: usize,
    pub test_views: usize,
}

/// Generates the analytic scene, renders oracle ground truth, and writes a
/// loadable dataset (manifests + PNGs) plus the scene description.
pub fn cmd_gen_scene(config: &RunConfig, out: &Path) -> Result<GenSceneSummary, CliError> {
    config.validate()?;
    let sc = config
        .scene
        .as_ref()
        .ok_or_else(|| CliError::Config("gen-scene needs a `scene` section".into()))?;
    let (train_views, test_views) = build_views(config)?;
    std::fs::create_dir_all(out)?;
    write_dataset(out, "train", &train_views)?;
    write_dataset(out, "test", &test_views)?;
    let scene = generate_scene(&config.scene_spec().unwrap(), sc.scene_seed)?;
    std::fs::write(
        out.join("scene.json"),
        serde_json::to_string_pretty(&scene).map_err(|e| CliError::Other(e.to_string()))?,
    )?;
    Ok(GenSceneSummary {
        out: out.to_path_buf(),
        train_views: train_views.len(),
        test_views: test_views.len(),
    })
}
