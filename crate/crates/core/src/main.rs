use clap::{Parser, Subcommand};
use facthash::cli::{self, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "facthash",
    about = "Factorized multi-resolution hash-grid radiance fields on the CPU"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render test views (or one camera spec) from a checkpoint.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of test views to render (0 = all).
        #[arg(long, default_value_t = 0)]
        views: usize,
        /// JSON camera spec (camera_angle_x, width, height, transform_matrix).
        #[arg(long)]
        camera: Option<PathBuf>,
    },
    /// PSNR/SSIM report for a checkpoint against its test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rendering wall-time benchmark.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Test views to time (0 = all).
        #[arg(long, default_value_t = 0)]
        views: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// Train across hash table sizes and report collision/PSNR rows.
    AblateCollision {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated log2 table sizes, e.g. 10,12,14.
        #[arg(long, value_delimiter = ',')]
        table_sizes: Vec<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an analytic scene dataset (oracle ground truth) on disk.
    GenScene {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<RunConfig, cli::CliError> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.out = out;
    }
    Ok(config)
}

fn run() -> Result<(), cli::CliError> {
    match Args::parse().command {
        Command::Train { config, seed, out } => {
            let config = load_config(&config, seed, out)?;
            let summary = cli::cmd_train(&config)?;
            println!(
                "trained {} steps, final test PSNR {:.2} dB",
                summary.steps, summary.final_psnr
            );
            println!("checkpoint: {}", summary.checkpoint.display());
            println!("metrics:    {}", summary.metrics_log.display());
        }
        Command::Render {
            checkpoint,
            config,
            out,
            views,
            camera,
        } => {
            let config = config.map(|p| RunConfig::load(&p)).transpose()?;
            let out = out.unwrap_or_else(|| PathBuf::from("renders"));
            let summary = cli::cmd_render(
                &checkpoint,
                config.as_ref(),
                &out,
                views,
                camera.as_deref(),
            )?;
            println!("wrote {} view(s) to {}", summary.images, summary.out.display());
        }
        Command::Eval {
            checkpoint,
            config,
            out,
        } => {
            let config = config.map(|p| RunConfig::load(&p)).transpose()?;
            let report = cli::cmd_eval(&checkpoint, config.as_ref(), out.as_deref())?;
            for row in &report.rows {
                println!(
                    "view {:3}  PSNR {:6.2} dB  SSIM {:.4}",
                    row.view, row.psnr, row.ssim
                );
            }
            println!(
                "mean PSNR {:.2} dB, mean SSIM {:.4}, encoder params {}, mlp params {}",
                report.mean_psnr, report.mean_ssim, report.encoder_params, report.mlp_params
            );
        }
        Command::Bench {
            checkpoint,
            config,
            views,
            repetitions,
        } => {
            let config = config.map(|p| RunConfig::load(&p)).transpose()?;
            let report = cli::cmd_bench(&checkpoint, config.as_ref(), views, repetitions)?;
            for row in &report.rows {
                println!(
                    "view {:3}  median {:.3}s  [{:.3}, {:.3}]  {:.1} samples/ray",
                    row.view,
                    row.median_seconds,
                    row.min_seconds,
                    row.max_seconds,
                    row.samples_per_ray
                );
            }
            println!(
                "median {:.3}s over {} repetition(s), parameter memory {} bytes",
                report.median_seconds, report.repetitions, report.param_bytes
            );
        }
        Command::AblateCollision {
            config,
            table_sizes,
            seed,
            out,
        } => {
            let config = load_config(&config, seed, out)?;
            let rows = cli::cmd_ablate_collision(&config, &table_sizes)?;
            for row in &rows {
                match &row.error {
                    None => println!(
                        "T=2^{:2}  params {:9}  collision {:8.3}  PSNR {:6.2} dB",
                        row.table_size_log2, row.encoder_params, row.mean_collision, row.psnr
                    ),
                    Some(e) => {
                        println!("T=2^{:2}  failed: {e}", row.table_size_log2)
                    }
                }
            }
        }
        Command::GenScene { config, out, seed } => {
            let config = load_config(&config, seed, None)?;
            let summary = cli::cmd_gen_scene(&config, &out)?;
            println!(
                "wrote {} train + {} test views to {}",
                summary.train_views,
                summary.test_views,
                summary.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
