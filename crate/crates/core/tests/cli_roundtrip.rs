//! End-to-end command flows on a miniature procedural scene.

use facthash::cli::{self, RunConfig};

fn tiny_config(out: &std::path::Path) -> RunConfig {
    let text = format!(
        r#"
seed = 3
out = "{}"

[scene]
primitives = 2
scene_seed = 5
views = 4
test_views = 2
image_size = 24

[encoder]
n_min = 4
n_max = 32
levels = 4
feature_dim = 2
table_size_log2 = 12

[field]
geo_dim = 7
density_hidden = [16]
color_hidden = [16]

[renderer]
bitfield_resolution = 16
bitfield_warmup = 10
bitfield_interval = 5
step_divisor = 128

[training]
iterations = 30
batch_rays = 128
eval_interval = 0
"#,
        out.display()
    );
    RunConfig::from_toml(&text).unwrap()
}

#[test]
fn train_writes_checkpoint_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = tiny_config(&out);
    let summary = cli::cmd_train(&config).unwrap();
    assert!(summary.checkpoint.exists());
    assert!(summary.metrics_log.exists());
    assert_eq!(summary.steps, 30);
    let lines = std::fs::read_to_string(&summary.metrics_log).unwrap();
    assert_eq!(lines.lines().count(), 30);
}

#[test]
fn invalid_config_creates_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut config = tiny_config(&out);
    config.scene = None; // no data source
    assert!(cli::cmd_train(&config).is_err());
    assert!(!out.exists(), "invalid config must not create outputs");
}

#[test]
fn same_config_twice_gives_identical_metric_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let mut c1 = tiny_config(&out1);
    c1.training.iterations = 15;
    let mut c2 = tiny_config(&out2);
    c2.training.iterations = 15;
    let s1 = cli::cmd_train(&c1).unwrap();
    let s2 = cli::cmd_train(&c2).unwrap();
    let log1 = std::fs::read(&s1.metrics_log).unwrap();
    let log2 = std::fs::read(&s2.metrics_log).unwrap();
    assert_eq!(log1, log2);
}

#[test]
fn render_eval_bench_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = tiny_config(&out);
    let summary = cli::cmd_train(&config).unwrap();

    // render the test split
    let render_out = dir.path().join("renders");
    let rs = cli::cmd_render(&summary.checkpoint, None, &render_out, 0, None).unwrap();
    assert_eq!(rs.images, 2);
    assert!(render_out.join("r_0.png").exists());
    assert!(render_out.join("d_0.png").exists());

    // eval reports per-view and mean metrics plus parameter counts
    let report = cli::cmd_eval(&summary.checkpoint, None, None).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.mean_psnr > 5.0);
    assert!(report.encoder_params > 0);

    // eval of the reloaded checkpoint must match a second eval exactly
    let report2 = cli::cmd_eval(&summary.checkpoint, None, None).unwrap();
    assert_eq!(report.mean_psnr, report2.mean_psnr);
    assert_eq!(report.mean_ssim, report2.mean_ssim);

    // bench: zero repetitions is an empty success
    let empty = cli::cmd_bench(&summary.checkpoint, None, 0, 0).unwrap();
    assert!(empty.rows.is_empty());
    let bench = cli::cmd_bench(&summary.checkpoint, None, 1, 2).unwrap();
    assert_eq!(bench.rows.len(), 1);
    assert!(bench.rows[0].median_seconds > 0.0);
    assert!(bench.param_bytes > 0);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = tiny_config(&out);
    let summary = cli::cmd_train(&config).unwrap();
    let mut bytes = std::fs::read(&summary.checkpoint).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    std::fs::write(&summary.checkpoint, &bytes).unwrap();
    let err = cli::cmd_eval(&summary.checkpoint, None, None).unwrap_err();
    assert!(err.to_string().contains("checksum"), "{err}");
}

#[test]
fn gen_scene_writes_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = tiny_config(&out);
    let data_dir = dir.path().join("scene_data");
    let summary = cli::cmd_gen_scene(&config, &data_dir).unwrap();
    assert_eq!(summary.train_views, 4);
    assert_eq!(summary.test_views, 2);

    // train against the written dataset through the dataset source
    let out2 = dir.path().join("run2");
    let text = format!(
        r#"
seed = 3
out = "{}"

[dataset]
path = "{}"
aabb_half = 1.0

[encoder]
n_min = 4
n_max = 16
levels = 3
table_size_log2 = 10

[field]
geo_dim = 7
density_hidden = [16]
color_hidden = [16]

[renderer]
bitfield_resolution = 16
bitfield_warmup = 8
bitfield_interval = 4
step_divisor = 128

[training]
iterations = 10
batch_rays = 64
"#,
        out2.display(),
        data_dir.display()
    );
    let config2 = RunConfig::from_toml(&text).unwrap();
    let s2 = cli::cmd_train(&config2).unwrap();
    assert!(s2.checkpoint.exists());
}

#[test]
fn ablation_sweep_reports_rows_per_table_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ablate");
    let mut config = tiny_config(&out);
    config.training.iterations = 10;
    let rows = cli::cmd_ablate_collision(&config, &[10, 12]).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert!(row.error.is_none(), "{:?}", row.error);
        assert!(row.encoder_params > 0);
        assert_eq!(row.collision_per_level.len(), 4);
    }
    // single size -> one row
    let one = cli::cmd_ablate_collision(&config, &[11]).unwrap();
    assert_eq!(one.len(), 1);
    // generous table: collision estimate <= 1 at every level
    let big = cli::cmd_ablate_collision(&config, &[16]).unwrap();
    assert!(big[0].collision_per_level.iter().all(|&c| c <= 1.0));
}
