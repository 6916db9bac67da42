//! Image quality metrics over row-major RGB buffers in [0,1].

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image size mismatch: {0} vs {1} values")]
    SizeMismatch(usize, usize),
    #[error("image {0}x{1} smaller than the {2}x{2} SSIM window")]
    TooSmall(u32, u32, usize),
}

/// PSNR cap reported for identical images (zero MSE).
pub const PSNR_CAP: f64 = 99.0;

/// 10 log10(1 / MSE) over all channels, capped at 99 dB.
pub fn psnr(a: &[f32], b: &[f32]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch(a.len(), b.len()));
    }
    let mut mse = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        mse += d * d;
    }
    mse /= a.len().max(1) as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn rec601_luma(rgb: &[f32], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for i in 0..w * h {
        out[i] = 0.299 * rgb[i * 3] as f64
            + 0.587 * rgb[i * 3 + 1] as f64
            + 0.114 * rgb[i * 3 + 2] as f64;
    }
    out
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Standard single-scale SSIM on Rec.601 luma: 11x11 Gaussian window
/// (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2 on unit range, averaged over valid
/// window positions only.
pub fn ssim(a: &[f32], b: &[f32], width: u32, height: u32) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch(a.len(), b.len()));
    }
    let (w, h) = (width as usize, height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(width, height, SSIM_WINDOW));
    }
    let la = rec601_luma(a, w, h);
    let lb = rec601_luma(b, w, h);
    let k = gaussian_kernel();

    // separable pass: horizontal then vertical, on the 5 moment images
    let planes: [&[f64]; 2] = [&la, &lb];
    let mut moments = vec![vec![0.0; w * h]; 5]; // a, b, aa, bb, ab
    for i in 0..w * h {
        moments[0][i] = planes[0][i];
        moments[1][i] = planes[1][i];
        moments[2][i] = planes[0][i] * planes[0][i];
        moments[3][i] = planes[1][i] * planes[1][i];
        moments[4][i] = planes[0][i] * planes[1][i];
    }
    let half = SSIM_WINDOW / 2;
    let wh = w - 2 * half;
    let hh = h - 2 * half;
    let mut tmp = vec![0.0; wh * h];
    let mut filtered = vec![vec![0.0; wh * hh]; 5];
    for (m, out) in moments.iter().zip(filtered.iter_mut()) {
        for y in 0..h {
            for x in 0..wh {
                let mut acc = 0.0;
                for (j, &kj) in k.iter().enumerate() {
                    acc += kj * m[y * w + x + j];
                }
                tmp[y * wh + x] = acc;
            }
        }
        for y in 0..hh {
            for x in 0..wh {
                let mut acc = 0.0;
                for (j, &kj) in k.iter().enumerate() {
                    acc += kj * tmp[(y + j) * wh + x];
                }
                out[y * wh + x] = acc;
            }
        }
    }

    let mut total = 0.0;
    for i in 0..wh * hh {
        let mu_a = filtered[0][i];
        let mu_b = filtered[1][i];
        let var_a = filtered[2][i] - mu_a * mu_a;
        let var_b = filtered[3][i] - mu_b * mu_b;
        let cov = filtered[4][i] - mu_a * mu_b;
        let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
        total += num / den;
    }
    Ok(total / (wh * hh) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_images_hit_the_cap() {
        let img = vec![0.25f32; 16 * 16 * 3];
        assert_eq!(psnr(&img, &img).unwrap(), 99.0);
    }

    #[test]
    fn uniform_tenth_offset_is_twenty_db() {
        let a = vec![0.5f32; 8 * 8 * 3];
        let b = vec![0.6f32; 8 * 8 * 3];
        let v = psnr(&a, &b).unwrap();
        assert!((v - 20.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn psnr_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f32> = (0..300).map(|_| rng.gen()).collect();
        let b: Vec<f32> = (0..300).map(|_| rng.gen()).collect();
        let mut mse = 0.0f64;
        for i in 0..300 {
            mse += (a[i] as f64 - b[i] as f64).powi(2);
        }
        mse /= 300.0;
        let expect = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-9);
        assert!(psnr(&a, &b[..297]).is_err());
    }

    #[test]
    fn ssim_identical_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img: Vec<f32> = (0..24 * 24 * 3).map(|_| rng.gen()).collect();
        let v = ssim(&img, &img, 24, 24).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn negated_structure_scores_low() {
        // block pattern vs its negative
        let (w, h) = (32u32, 32u32);
        let mut a = vec![0.0f32; (w * h * 3) as usize];
        for y in 0..h as usize {
            for x in 0..w as usize {
                let v = if (x / 8 + y / 8) % 2 == 0 { 0.9 } else { 0.1 };
                for c in 0..3 {
                    a[(y * w as usize + x) * 3 + c] = v;
                }
            }
        }
        let b: Vec<f32> = a.iter().map(|v| 1.0 - v).collect();
        let v = ssim(&a, &b, w, h).unwrap();
        assert!(v < 0.5, "{v}");
    }

    #[test]
    fn ssim_matches_naive_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (w, h) = (16usize, 14usize);
        let a: Vec<f32> = (0..w * h * 3).map(|_| rng.gen()).collect();
        let b: Vec<f32> = (0..w * h * 3)
            .map(|i| (a[i] + rng.gen::<f32>() * 0.2).min(1.0))
            .collect();

        let fast = ssim(&a, &b, w as u32, h as u32).unwrap();

        // direct reference: full 2D window at every valid position
        let la = rec601_luma(&a, w, h);
        let lb = rec601_luma(&b, w, h);
        let k1 = gaussian_kernel();
        let mut k2 = vec![0.0; SSIM_WINDOW * SSIM_WINDOW];
        for y in 0..SSIM_WINDOW {
            for x in 0..SSIM_WINDOW {
                k2[y * SSIM_WINDOW + x] = k1[y] * k1[x];
            }
        }
        let mut total = 0.0;
        let mut count = 0;
        for y0 in 0..h - SSIM_WINDOW + 1 {
            for x0 in 0..w - SSIM_WINDOW + 1 {
                let (mut ma, mut mb, mut maa, mut mbb, mut mab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let kw = k2[dy * SSIM_WINDOW + dx];
                        let va = la[(y0 + dy) * w + x0 + dx];
                        let vb = lb[(y0 + dy) * w + x0 + dx];
                        ma += kw * va;
                        mb += kw * vb;
                        maa += kw * va * va;
                        mbb += kw * vb * vb;
                        mab += kw * va * vb;
                    }
                }
                let (va, vb, cov) = (maa - ma * ma, mbb - mb * mb, mab - ma * mb);
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1;
            }
        }
        let naive = total / count as f64;
        assert!((fast - naive).abs() < 1e-6, "fast {fast} vs naive {naive}");
    }

    #[test]
    fn too_small_for_window() {
        let img = vec![0.0f32; 8 * 8 * 3];
        assert!(ssim(&img, &img, 8, 8).is_err());
    }
}
