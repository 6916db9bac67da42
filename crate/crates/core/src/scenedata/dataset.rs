use super::images::{read_rgb_png, write_rgb_png};
use super::SceneError;
use crate::renderer::{Aabb, Camera};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One posed view with composited unit-range RGB pixels, row-major.
#[derive(Debug, Clone)]
pub struct View {
    pub camera: Camera,
    pub rgb: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub views: Vec<View>,
    pub split: String,
    pub aabb: Aabb,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    camera_angle_x: f64,
    frames: Vec<Frame>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Frame {
    file_path: String,
    transform_matrix: [[f64; 4]; 4],
}

/// Loads `transforms_<split>.json` plus the referenced images from `dir`.
/// Alpha channels composite onto `background`.
pub fn load_dataset(
    dir: &Path,
    split: &str,
    background: [f32; 3],
    aabb: Aabb,
) -> Result<Dataset, SceneError> {
    let manifest_path = dir.join(format!("transforms_{split}.json"));
    if !manifest_path.exists() {
        return Err(SceneError::MissingManifest(manifest_path));
    }
    let text = std::fs::read_to_string(&manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| SceneError::BadManifest(e.to_string()))?;

    let mut views = Vec::with_capacity(manifest.frames.len());
    for (index, frame) in manifest.frames.iter().enumerate() {
        let mut img_path = dir.join(frame.file_path.trim_start_matches("./"));
        if !img_path.exists() && img_path.extension().is_none() {
            img_path.set_extension("png");
        }
        let (rgb, w, h) = read_rgb_png(&img_path, background)?;

        let m = &frame.transform_matrix;
        let rotation = Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        );
        let translation = Vector3::new(m[0][3], m[1][3], m[2][3]);
        let fx = 0.5 * w as f64 / (0.5 * manifest.camera_angle_x).tan();
        let camera = Camera::new(
            fx,
            fx,
            w as f64 / 2.0,
            h as f64 / 2.0,
            w,
            h,
            rotation,
            translation,
        )
        .map_err(|e| SceneError::BadMatrix {
            index,
            detail: e.to_string(),
        })?;
        views.push(View { camera, rgb });
    }
    Ok(Dataset {
        views,
        split: split.to_string(),
        aabb,
    })
}

/// Writes a dataset in the same manifest layout `load_dataset` reads:
/// `transforms_<split>.json` plus 8-bit PNGs under `<split>/r_<i>.png`.
/// All views must share one field of view.
pub fn write_dataset(dir: &Path, split: &str, views: &[View]) -> Result<(), SceneError> {
    if views.is_empty() {
        return Err(SceneError::BadManifest("no views to write".into()));
    }
    let img_dir = dir.join(split);
    std::fs::create_dir_all(&img_dir)?;
    let mut frames = Vec::with_capacity(views.len());
    for (i, view) in views.iter().enumerate() {
        let rel = format!("./{split}/r_{i}");
        write_rgb_png(
            &img_dir.join(format!("r_{i}.png")),
            &view.rgb,
            view.camera.width,
            view.camera.height,
        )?;
        let r = &view.camera.rotation;
        let t = &view.camera.translation;
        let mut m = [[0.0f64; 4]; 4];
        for row in 0..3 {
            for col in 0..3 {
                m[row][col] = r[(row, col)];
            }
            m[row][3] = t[row];
        }
        m[3][3] = 1.0;
        frames.push(Frame {
            file_path: rel,
            transform_matrix: m,
        });
    }
    let manifest = Manifest {
        camera_angle_x: views[0].camera.fov_x(),
        frames,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| SceneError::BadManifest(e.to_string()))?;
    std::fs::write(dir.join(format!("transforms_{split}.json")), text)?;
    Ok(())
}

/// Uniform-stride subset: indices floor(i * N / count) in original order.
pub fn subsample_views(dataset: &Dataset, count: usize) -> Result<Dataset, SceneError> {
    let n = dataset.views.len();
    if count == 0 || count > n {
        return Err(SceneError::CountOutOfRange { count, max: n });
    }
    let views = (0..count)
        .map(|i| dataset.views[i * n / count].clone())
        .collect();
    Ok(Dataset {
        views,
        split: dataset.split.clone(),
        aabb: dataset.aabb,
    })
}

/// Look-at cameras on an orbit around the origin with gently varying
/// elevation, the desk-scale stand-in for an inward-facing capture rig.
pub fn orbit_cameras(
    count: usize,
    radius: f64,
    width: u32,
    height: u32,
    fov_x: f64,
) -> Vec<Camera> {
    (0..count)
        .map(|i| {
            let azimuth = i as f64 / count as f64 * std::f64::consts::TAU;
            let elevation = 0.35 + 0.25 * ((i as f64 * 2.399963).sin());
            let eye = Vector3::new(
                radius * elevation.cos() * azimuth.cos(),
                radius * elevation.cos() * azimuth.sin(),
                radius * elevation.sin(),
            );
            look_at(eye, Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0), width, height, fov_x)
        })
        .collect()
}

fn look_at(
    eye: Vector3<f64>,
    target: Vector3<f64>,
    up: Vector3<f64>,
    width: u32,
    height: u32,
    fov_x: f64,
) -> Camera {
    let z = (eye - target).normalize();
    let x = up.cross(&z).normalize();
    let y = z.cross(&x);
    let rotation = Matrix3::from_columns(&[x, y, z]);
    Camera::from_fov(fov_x, width, height, rotation, eye).expect("look-at basis is orthonormal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn checker_view(camera: Camera) -> View {
        let (w, h) = (camera.width as usize, camera.height as usize);
        let mut rgb = vec![0.0f32; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let v = checker_value(x, y);
                let i = (y * w + x) * 3;
                rgb[i] = v;
                rgb[i + 1] = 1.0 - v;
                rgb[i + 2] = 0.5;
            }
        }
        View { camera, rgb }
    }

    fn checker_value(x: usize, y: usize) -> f32 {
        if (x / 2 + y / 2) % 2 == 0 {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn identity_pose_single_frame() {
        let dir = tempfile::tempdir().unwrap();
        let cam = Camera::from_fov(
            std::f64::consts::FRAC_PI_2,
            8,
            8,
            Matrix3::identity(),
            Vector3::zeros(),
        )
        .unwrap();
        write_dataset(dir.path(), "train", &[checker_view(cam)]).unwrap();
        let ds = load_dataset(dir.path(), "train", [1.0; 3], Aabb::centered(1.0)).unwrap();
        assert_eq!(ds.views.len(), 1);
        assert_relative_eq!(
            ds.views[0].camera.rotation,
            Matrix3::identity(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn fov_to_focal_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let cam = Camera::from_fov(
            std::f64::consts::FRAC_PI_2,
            800,
            600,
            Matrix3::identity(),
            Vector3::zeros(),
        )
        .unwrap();
        write_dataset(dir.path(), "train", &[checker_view(cam)]).unwrap();
        let ds = load_dataset(dir.path(), "train", [1.0; 3], Aabb::centered(1.0)).unwrap();
        assert_relative_eq!(ds.views[0].camera.fx, 400.0, epsilon = 1e-9);
    }

    #[test]
    fn generated_then_loaded_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cams = orbit_cameras(5, 3.0, 16, 12, 0.9);
        let views: Vec<View> = cams.into_iter().map(checker_view).collect();
        write_dataset(dir.path(), "test", &views).unwrap();
        let ds = load_dataset(dir.path(), "test", [1.0; 3], Aabb::centered(1.0)).unwrap();
        assert_eq!(ds.views.len(), 5);
        for (orig, loaded) in views.iter().zip(&ds.views) {
            assert_relative_eq!(
                loaded.camera.rotation,
                orig.camera.rotation,
                epsilon = 1e-6
            );
            assert_relative_eq!(
                loaded.camera.translation,
                orig.camera.translation,
                epsilon = 1e-6
            );
            assert_relative_eq!(loaded.camera.fx, orig.camera.fx, epsilon = 1e-6);
            // pixels were exact multiples of 1/255 or exactly representable
            for (a, b) in orig.rgb.iter().zip(&loaded.rgb) {
                assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
    }

    #[test]
    fn distinct_errors_for_missing_pieces() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path(), "train", [0.0; 3], Aabb::unit()).unwrap_err();
        assert!(matches!(err, SceneError::MissingManifest(_)));

        // manifest referencing a missing image
        std::fs::write(
            dir.path().join("transforms_train.json"),
            r#"{"camera_angle_x": 0.8, "frames": [{"file_path": "./train/r_0", "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]}"#,
        )
        .unwrap();
        let err = load_dataset(dir.path(), "train", [0.0; 3], Aabb::unit()).unwrap_err();
        assert!(matches!(err, SceneError::MissingImage(_)));

        // non-rigid rotation
        let img_dir = dir.path().join("train");
        std::fs::create_dir_all(&img_dir).unwrap();
        write_rgb_png(&img_dir.join("r_0.png"), &vec![0.5; 4 * 4 * 3], 4, 4).unwrap();
        std::fs::write(
            dir.path().join("transforms_train.json"),
            r#"{"camera_angle_x": 0.8, "frames": [{"file_path": "./train/r_0", "transform_matrix": [[2,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]}"#,
        )
        .unwrap();
        let err = load_dataset(dir.path(), "train", [0.0; 3], Aabb::unit()).unwrap_err();
        assert!(matches!(err, SceneError::BadMatrix { index: 0, .. }));
    }

    #[test]
    fn subsample_examples() {
        let cams = orbit_cameras(100, 3.0, 4, 4, 0.9);
        let ds = Dataset {
            views: cams.into_iter().map(checker_view).collect(),
            split: "train".into(),
            aabb: Aabb::centered(1.0),
        };
        let all = subsample_views(&ds, 100).unwrap();
        assert_eq!(all.views.len(), 100);
        let one = subsample_views(&ds, 1).unwrap();
        assert_relative_eq!(
            one.views[0].camera.translation,
            ds.views[0].camera.translation
        );
        // stride indices for 8 of 100: floor(i * 100 / 8)
        let eight = subsample_views(&ds, 8).unwrap();
        let expect = [0usize, 12, 25, 37, 50, 62, 75, 87];
        for (v, &idx) in eight.views.iter().zip(&expect) {
            assert_relative_eq!(
                v.camera.translation,
                ds.views[idx].camera.translation,
                epsilon = 1e-12
            );
        }
        assert!(subsample_views(&ds, 0).is_err());
        assert!(subsample_views(&ds, 101).is_err());
    }
}
