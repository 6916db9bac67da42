//! Thin Python bindings over the core types and operations: resolution
//! schedules, spatial hashing, SH encoding, compositing, losses, metrics,
//! encoders, and oracle scene rendering.

use facthash::encoding;
use facthash::field;
use facthash::metrics;
use facthash::renderer;
use facthash::scenedata;
use facthash::training;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn val_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Per-level grid resolutions N_l = floor(n_min * b^l).
#[pyfunction]
fn level_resolutions(n_min: u32, n_max: u32, levels: usize) -> PyResult<Vec<u32>> {
    Ok(encoding::level_resolutions(n_min, n_max, levels)
        .map_err(val_err)?
        .resolutions)
}

/// Table row of a lattice vertex: injective row-major when the grid fits,
/// XOR-of-prime-products hash modulo the table size otherwise.
#[pyfunction]
fn hash_index(lattice_point: Vec<u64>, table_size: usize, grid_resolution: u32) -> usize {
    encoding::hash_index(&lattice_point, table_size, grid_resolution)
}

/// Real spherical harmonics basis, degrees 0..3 (16 values).
#[pyfunction]
fn sh_encode(direction: [f64; 3]) -> PyResult<Vec<f64>> {
    Ok(field::sh_encode(&direction).map_err(val_err)?.to_vec())
}

/// alpha = 1 - exp(-sigma * delta).
#[pyfunction]
fn alpha_from_density(sigma: f64, delta: f64) -> f64 {
    renderer::alpha_from_density(sigma, delta)
}

/// Front-to-back compositing; returns (color, weights, weight_sum, depth).
#[pyfunction]
fn composite(
    alphas: Vec<f64>,
    colors: Vec<[f64; 3]>,
    ts: Vec<f64>,
    termination_threshold: f64,
) -> PyResult<([f64; 3], Vec<f64>, f64, f64)> {
    if alphas.len() != colors.len() || alphas.len() != ts.len() {
        return Err(PyValueError::new_err("alphas/colors/ts length mismatch"));
    }
    let r = renderer::composite(&alphas, &colors, &ts, termination_threshold);
    Ok((r.color, r.weights, r.weight_sum, r.depth))
}

/// O(K) distortion loss (prefix-sum form).
#[pyfunction]
fn loss_distortion(w: Vec<f64>, s: Vec<f64>, ds: Vec<f64>) -> PyResult<f64> {
    training::loss_distortion(&w, &s, &ds).map_err(val_err)
}

/// O(K^2) reference form of the distortion loss.
#[pyfunction]
fn loss_distortion_naive(w: Vec<f64>, s: Vec<f64>, ds: Vec<f64>) -> PyResult<f64> {
    training::loss_distortion_naive(&w, &s, &ds).map_err(val_err)
}

#[pyfunction]
fn psnr(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    metrics::psnr(&a, &b).map_err(val_err)
}

#[pyfunction]
fn ssim(a: Vec<f32>, b: Vec<f32>, width: u32, height: u32) -> PyResult<f64> {
    metrics::ssim(&a, &b, width, height).map_err(val_err)
}

/// Factorized multi-resolution hash encoder over the unit cube.
#[pyclass]
struct FactHashEncoder {
    inner: encoding::FactHashEncoder<f32>,
}

#[pymethods]
impl FactHashEncoder {
    #[new]
    fn new(
        n_min: u32,
        n_max: u32,
        levels: usize,
        feature_dim: usize,
        table_size_log2: u32,
        seed: u64,
    ) -> PyResult<Self> {
        let schedule = encoding::level_resolutions(n_min, n_max, levels).map_err(val_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner =
            encoding::FactHashEncoder::new(schedule, feature_dim, 1 << table_size_log2, &mut rng)
                .map_err(val_err)?;
        Ok(FactHashEncoder { inner })
    }

    fn encode(&self, x: [f64; 3]) -> PyResult<Vec<f32>> {
        let mut out = vec![0.0f32; self.inner.output_dim()];
        self.inner.encode_into(&x, &mut out).map_err(val_err)?;
        Ok(out)
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
}

/// 3D multi-resolution hash-grid encoder.
#[pyclass]
struct HashGridEncoder {
    inner: encoding::HashGridEncoder<f32>,
}

#[pymethods]
impl HashGridEncoder {
    #[new]
    fn new(
        n_min: u32,
        n_max: u32,
        levels: usize,
        feature_dim: usize,
        table_size_log2: u32,
        seed: u64,
    ) -> PyResult<Self> {
        let schedule = encoding::level_resolutions(n_min, n_max, levels).map_err(val_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner =
            encoding::HashGridEncoder::new(schedule, feature_dim, 1 << table_size_log2, &mut rng)
                .map_err(val_err)?;
        Ok(HashGridEncoder { inner })
    }

    fn encode(&self, x: [f64; 3]) -> PyResult<Vec<f32>> {
        let mut out = vec![0.0f32; self.inner.output_dim()];
        self.inner.encode_into(&x, &mut out).map_err(val_err)?;
        Ok(out)
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
}

/// Renders one orbit view of a procedural constant-density scene with the
/// dense-march oracle; returns (rgb, width, height).
#[pyfunction]
fn oracle_render(
    primitives: usize,
    scene_seed: u64,
    image_size: u32,
    step: f64,
) -> PyResult<(Vec<f32>, u32, u32)> {
    let spec = scenedata::SceneSpec {
        primitives,
        ..scenedata::SceneSpec::default()
    };
    let scene = scenedata::generate_scene(&spec, scene_seed).map_err(val_err)?;
    let cams = scenedata::orbit_cameras(1, 3.2, image_size, image_size, 0.8);
    let img = scenedata::oracle_render(&scene, &cams[0], step);
    Ok((img.rgb, img.width, img.height))
}

#[pymodule]
fn facthash_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(level_resolutions, m)?)?;
    m.add_function(wrap_pyfunction!(hash_index, m)?)?;
    m.add_function(wrap_pyfunction!(sh_encode, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_from_density, m)?)?;
    m.add_function(wrap_pyfunction!(composite, m)?)?;
    m.add_function(wrap_pyfunction!(loss_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(loss_distortion_naive, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_render, m)?)?;
    m.add_class::<FactHashEncoder>()?;
    m.add_class::<HashGridEncoder>()?;
    Ok(())
}
