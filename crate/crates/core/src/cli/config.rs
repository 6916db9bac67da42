use super::CliError;
use crate::encoding::{
    level_resolutions, DenseGridEncoder, Encoder, FactHashEncoder, GeneralEncoder,
    HashGridEncoder, TriPlaneEncoder,
};
use crate::field::FieldModel;
use crate::model::NerfModel;
use crate::real::Real;
use crate::renderer::Aabb;
use crate::scenedata::SceneSpec;
use crate::training::{LossWeights, TrainLoopConfig};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Facthash,
    Hashgrid3d,
    Triplane,
    Densegrid,
    General,
}

/// Which canonical instantiation a `general` encoder mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneralForm {
    TriplaneHadamard,
    MultiresDiagonal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub n_min: u32,
    pub n_max: u32,
    pub levels: usize,
    pub feature_dim: usize,
    pub table_size_log2: u32,
    pub general_form: GeneralForm,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Facthash,
            n_min: 16,
            n_max: 256,
            levels: 8,
            feature_dim: 2,
            table_size_log2: 14,
            general_form: GeneralForm::TriplaneHadamard,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldConfig {
    pub geo_dim: usize,
    pub density_hidden: Vec<usize>,
    pub color_hidden: Vec<usize>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            geo_dim: 15,
            density_hidden: vec![64],
            color_hidden: vec![64, 64],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RendererConfig {
    /// March step = scene diagonal / step_divisor.
    pub step_divisor: f64,
    pub termination_threshold: f64,
    /// "white" or "black" composite behind transparent rays.
    pub background: String,
    pub bitfield_resolution: usize,
    pub bitfield_warmup: u64,
    pub bitfield_interval: u64,
    pub bitfield_decay: f64,
    /// 0 picks 0.01 / step.
    pub bitfield_threshold: f64,
}

impl Default for RendererConfig {
    fn default() -> Self {
        RendererConfig {
            step_divisor: 512.0,
            termination_threshold: 1e-4,
            background: "white".into(),
            bitfield_resolution: 128,
            bitfield_warmup: 256,
            bitfield_interval: 16,
            bitfield_decay: 0.95,
            bitfield_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub iterations: u64,
    pub batch_rays: usize,
    pub lr_tables: f64,
    pub lr_mlp: f64,
    pub cosine_decay: bool,
    pub lambda_op: f64,
    pub lambda_dist: f64,
    /// Gradient worker count (0 = all cores); fixed value => reproducible.
    pub workers: usize,
    pub eval_interval: u64,
    pub eval_views: usize,
    pub checkpoint_interval: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            iterations: 30_000,
            batch_rays: 4096,
            lr_tables: 1e-2,
            lr_mlp: 1e-3,
            cosine_decay: true,
            lambda_op: 1e-3,
            lambda_dist: 1e-2,
            workers: 0,
            eval_interval: 0,
            eval_views: 2,
            checkpoint_interval: 0,
        }
    }
}

/// Procedural scene source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub primitives: usize,
    pub scene_seed: u64,
    pub aabb_half: f64,
    pub density: f64,
    pub views: usize,
    pub test_views: usize,
    pub image_size: u32,
    pub fov_x: f64,
    pub orbit_radius: f64,
    /// Oracle step = train step / this.
    pub oracle_step_divisor: f64,
    /// Few-shot: train on this many uniformly strided views (0 = all).
    pub train_view_limit: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            primitives: 3,
            scene_seed: 7,
            aabb_half: 1.0,
            density: 150.0,
            views: 20,
            test_views: 6,
            image_size: 96,
            fov_x: 0.8,
            orbit_radius: 3.2,
            oracle_step_divisor: 4.0,
            train_view_limit: 0,
        }
    }
}

/// Dataset-on-disk source (camera-manifest layout).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default = "default_train_split")]
    pub train_split: String,
    #[serde(default = "default_test_split")]
    pub test_split: String,
    #[serde(default = "default_aabb_half")]
    pub aabb_half: f64,
    #[serde(default)]
    pub train_view_limit: usize,
}

fn default_train_split() -> String {
    "train".into()
}
fn default_test_split() -> String {
    "test".into()
}
fn default_aabb_half() -> f64 {
    1.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_precision")]
    pub precision: String,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub renderer: RendererConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    pub scene: Option<SceneConfig>,
    pub dataset: Option<DatasetConfig>,
}

fn default_precision() -> String {
    "f32".into()
}
fn default_out() -> PathBuf {
    PathBuf::from("runs/out")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Field-level validation; runs before any output is created.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.scene, &self.dataset) {
            (None, None) => {
                return Err(CliError::Config(
                    "one of `scene` or `dataset` must be set".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "`scene` and `dataset` are mutually exclusive".into(),
                ))
            }
            _ => {}
        }
        if let Some(ds) = &self.dataset {
            if !ds.path.exists() {
                return Err(CliError::Config(format!(
                    "dataset: path {} does not exist",
                    ds.path.display()
                )));
            }
        }
        if let Some(sc) = &self.scene {
            if sc.primitives == 0 {
                return Err(CliError::Config("scene.primitives must be >= 1".into()));
            }
            if sc.views == 0 || sc.image_size == 0 {
                return Err(CliError::Config(
                    "scene.views and scene.image_size must be positive".into(),
                ));
            }
        }
        match self.precision.as_str() {
            "f32" | "f64" => {}
            other => {
                return Err(CliError::Config(format!(
                    "precision: expected f32 or f64, got {other}"
                )))
            }
        }
        if self.encoder.feature_dim == 0 {
            return Err(CliError::Config("encoder.feature_dim must be >= 1".into()));
        }
        if self.encoder.levels == 0 {
            return Err(CliError::Config("encoder.levels must be >= 1".into()));
        }
        if self.encoder.n_max < self.encoder.n_min || self.encoder.n_min == 0 {
            return Err(CliError::Config(
                "encoder.n_min/n_max must satisfy 1 <= n_min <= n_max".into(),
            ));
        }
        if self.encoder.table_size_log2 == 0 || self.encoder.table_size_log2 > 28 {
            return Err(CliError::Config(
                "encoder.table_size_log2 must be in 1..=28".into(),
            ));
        }
        if self.training.batch_rays == 0 {
            return Err(CliError::Config("training.batch_rays must be >= 1".into()));
        }
        match self.renderer.background.as_str() {
            "white" | "black" => {}
            other => {
                return Err(CliError::Config(format!(
                    "renderer.background: expected white or black, got {other}"
                )))
            }
        }
        Ok(())
    }

    pub fn aabb(&self) -> Aabb {
        let half = self
            .scene
            .as_ref()
            .map(|s| s.aabb_half)
            .or_else(|| self.dataset.as_ref().map(|d| d.aabb_half))
            .unwrap_or(1.0);
        Aabb::centered(half)
    }

    pub fn background(&self) -> [f64; 3] {
        match self.renderer.background.as_str() {
            "black" => [0.0, 0.0, 0.0],
            _ => [1.0, 1.0, 1.0],
        }
    }

    pub fn march_step(&self) -> f64 {
        self.aabb().diagonal() / self.renderer.step_divisor
    }

    pub fn scene_spec(&self) -> Option<SceneSpec> {
        self.scene.as_ref().map(|s| SceneSpec {
            primitives: s.primitives,
            aabb_half: s.aabb_half,
            density: s.density,
            background: self.background(),
        })
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_op: self.training.lambda_op,
            lambda_dist: self.training.lambda_dist,
        }
    }

    pub fn train_loop_config(&self) -> TrainLoopConfig {
        TrainLoopConfig {
            iterations: self.training.iterations,
            batch_rays: self.training.batch_rays,
            lr_tables: self.training.lr_tables,
            lr_mlp: self.training.lr_mlp,
            cosine_decay: self.training.cosine_decay,
            seed: self.seed,
            workers: self.training.workers,
            step_size: self.march_step(),
            termination_threshold: self.renderer.termination_threshold,
            background: self.background(),
            loss_weights: self.loss_weights(),
            bitfield_resolution: self.renderer.bitfield_resolution,
            bitfield_warmup: self.renderer.bitfield_warmup,
            bitfield_interval: self.renderer.bitfield_interval,
            bitfield_decay: self.renderer.bitfield_decay,
            bitfield_threshold: self.renderer.bitfield_threshold,
            eval_interval: self.training.eval_interval,
            eval_views: self.training.eval_views,
        }
    }

    /// Builds the seeded model this config describes.
    pub fn build_model<R: Real>(&self, rng: &mut ChaCha8Rng) -> Result<NerfModel<R>, CliError> {
        let schedule = level_resolutions(self.encoder.n_min, self.encoder.n_max, self.encoder.levels)?;
        let f = self.encoder.feature_dim;
        let cap = 1usize << self.encoder.table_size_log2;
        let encoder = match self.encoder.kind {
            EncoderKind::Facthash => Encoder::FactHash(FactHashEncoder::new(schedule, f, cap, rng)?),
            EncoderKind::Hashgrid3d => {
                Encoder::HashGrid(HashGridEncoder::new(schedule, f, cap, rng)?)
            }
            EncoderKind::Triplane => Encoder::TriPlane(TriPlaneEncoder::new(schedule, f, rng)?),
            EncoderKind::Densegrid => Encoder::DenseGrid(DenseGridEncoder::new(schedule, f, rng)?),
            EncoderKind::General => match self.encoder.general_form {
                GeneralForm::TriplaneHadamard => {
                    let base = FactHashEncoder::new(schedule, f, cap, rng)?;
                    Encoder::General(GeneralEncoder::facthash_instance(&base, rng))
                }
                GeneralForm::MultiresDiagonal => {
                    let base = HashGridEncoder::new(schedule, f, cap, rng)?;
                    Encoder::General(GeneralEncoder::hashgrid_instance(&base, rng))
                }
            },
        };
        let feat_dim = encoder.output_dim();
        let field = FieldModel::init(
            feat_dim,
            self.field.geo_dim,
            &self.field.density_hidden,
            &self.field.color_hidden,
            rng,
        );
        Ok(NerfModel {
            encoder,
            field,
            aabb: self.aabb(),
        })
    }
}
