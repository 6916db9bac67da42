//! PNG helpers: 8-bit RGB color, 16-bit grayscale depth.

use super::SceneError;
use std::path::Path;

/// Writes unit-range RGB as 8-bit PNG.
pub fn write_rgb_png(path: &Path, rgb: &[f32], width: u32, height: u32) -> Result<(), SceneError> {
    let bytes: Vec<u8> = rgb
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::RgbImage::from_raw(width, height, bytes)
        .ok_or_else(|| SceneError::Image("rgb buffer size mismatch".into()))?;
    img.save(path).map_err(|e| SceneError::Image(e.to_string()))
}

/// Writes depth as 16-bit grayscale PNG with the linear mapping
/// value = round(clamp(depth / scale, 0, 1) * 65535); `scale` is the depth
/// in scene units that maps to full white.
pub fn write_depth_png(
    path: &Path,
    depth: &[f32],
    width: u32,
    height: u32,
    scale: f64,
) -> Result<(), SceneError> {
    let v: Vec<u16> = depth
        .iter()
        .map(|&d| ((d as f64 / scale).clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(width, height, v)
        .ok_or_else(|| SceneError::Image("depth buffer size mismatch".into()))?;
    img.save(path).map_err(|e| SceneError::Image(e.to_string()))
}

/// Reads a PNG, compositing any alpha channel onto `background`.
/// Returns (rgb in [0,1], width, height).
pub fn read_rgb_png(path: &Path, background: [f32; 3]) -> Result<(Vec<f32>, u32, u32), SceneError> {
    if !path.exists() {
        return Err(SceneError::MissingImage(path.to_path_buf()));
    }
    let img = image::open(path)
        .map_err(|e| SceneError::Image(format!("{}: {e}", path.display())))?
        .to_rgba8();
    let (w, h) = img.dimensions();
    let mut rgb = Vec::with_capacity((w * h * 3) as usize);
    for px in img.pixels() {
        let a = px[3] as f32 / 255.0;
        for c in 0..3 {
            let v = px[c] as f32 / 255.0;
            rgb.push(v * a + background[c] * (1.0 - a));
        }
    }
    Ok((rgb, w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_is_bit_exact_after_first_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let rgb: Vec<f32> = (0..4 * 4 * 3).map(|i| (i % 7) as f32 / 6.0).collect();
        write_rgb_png(&path, &rgb, 4, 4).unwrap();
        let (loaded, w, h) = read_rgb_png(&path, [0.0; 3]).unwrap();
        assert_eq!((w, h), (4, 4));
        // write again from the loaded values; second trip must be identity
        let path2 = dir.path().join("img2.png");
        write_rgb_png(&path2, &loaded, 4, 4).unwrap();
        let (loaded2, _, _) = read_rgb_png(&path2, [0.0; 3]).unwrap();
        assert_eq!(loaded, loaded2);
    }

    #[test]
    fn missing_image_is_distinct_error() {
        let err = read_rgb_png(Path::new("/nonexistent/file.png"), [0.0; 3]).unwrap_err();
        assert!(matches!(err, SceneError::MissingImage(_)));
    }

    #[test]
    fn depth_png_uses_linear_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        write_depth_png(&path, &[0.0, 1.0, 2.0, 4.0], 2, 2, 4.0).unwrap();
        let img = image::open(&path).unwrap().to_luma16();
        let px: Vec<u16> = img.pixels().map(|p| p[0]).collect();
        assert_eq!(px, vec![0, 16384, 32768, 65535]);
    }
}
