use crate::real::Real;

/// Largest allowed gap below 1: keeps alpha strictly inside [0, 1) even in
/// f32, where 1 - exp(-x) rounds to exactly 1 past x ~ 17 and would blow up
/// the 1/(1-alpha) factor of the compositing backward pass.
const ALPHA_ONE_GAP: f64 = 1e-7;

/// Opacity alpha = 1 - exp(-sigma * delta), capped strictly below 1.
#[inline(always)]
pub fn alpha_from_density<R: Real>(sigma: R, delta: R) -> R {
    (R::one() - (-sigma * delta).exp()).min(R::one() - R::from_f64(ALPHA_ONE_GAP))
}

#[derive(Debug, Clone)]
pub struct CompositeResult<R> {
    pub color: [R; 3],
    pub weights: Vec<R>,
    pub weight_sum: R,
    /// Transmittance remaining after the last processed sample.
    pub transmittance: R,
    /// Expected depth: sum(w_k t_k) / max(sum w, 1e-8).
    pub depth: R,
    /// Number of samples actually accumulated before early termination.
    pub processed: usize,
}

/// Front-to-back compositing with w_k = alpha_k * prod_{l<k} (1 - alpha_l).
/// Accumulation stops once transmittance falls below
/// `termination_threshold`; later samples get weight zero.
pub fn composite<R: Real>(
    alphas: &[R],
    colors: &[[R; 3]],
    ts: &[R],
    termination_threshold: R,
) -> CompositeResult<R> {
    let mut color = [R::zero(); 3];
    let mut weights = vec![R::zero(); alphas.len()];
    let mut weight_sum = R::zero();
    let mut depth_acc = R::zero();
    let mut transmittance = R::one();
    let mut processed = 0;
    for k in 0..alphas.len() {
        let w = transmittance * alphas[k];
        weights[k] = w;
        weight_sum += w;
        depth_acc += w * ts[k];
        for c in 0..3 {
            color[c] += w * colors[k][c];
        }
        transmittance *= R::one() - alphas[k];
        processed = k + 1;
        if transmittance < termination_threshold {
            break;
        }
    }
    let depth = depth_acc / weight_sum.max(R::from_f64(1e-8));
    CompositeResult {
        color,
        weights,
        weight_sum,
        transmittance,
        depth,
        processed,
    }
}

/// Reverse pass for [`composite`] with an optional background composited as
/// `color + transmittance * background` by the caller.
///
/// Inputs: dL/d(composite color), optional per-sample dL/dw (distortion
/// loss), and the background color if one was composited (it routes color
/// gradient into the final transmittance). Writes dL/dalpha_k and
/// dL/dcolor_k for the processed prefix; truncated samples get zeros.
#[allow(clippy::too_many_arguments)]
pub fn composite_backward<R: Real>(
    alphas: &[R],
    colors: &[[R; 3]],
    result: &CompositeResult<R>,
    d_color: &[R; 3],
    d_weights: Option<&[R]>,
    background: Option<&[R; 3]>,
    d_alpha: &mut [R],
    d_sample_color: &mut [[R; 3]],
) {
    let n = result.processed;
    d_alpha.fill(R::zero());
    for c in d_sample_color.iter_mut() {
        *c = [R::zero(); 3];
    }

    // dL/dw_k folding the color term and any direct weight gradient
    let g = |k: usize| -> R {
        let mut v = R::zero();
        for c in 0..3 {
            v += d_color[c] * colors[k][c];
        }
        if let Some(dw) = d_weights {
            v += dw[k];
        }
        v
    };

    // dL/dT_final from the background term
    let mut suffix = if let Some(bg) = background {
        let mut v = R::zero();
        for c in 0..3 {
            v += d_color[c] * bg[c];
        }
        v * result.transmittance
    } else {
        R::zero()
    };

    // transmittance in front of each sample, recomputed front-to-back
    let mut trans = vec![R::zero(); n];
    let mut t = R::one();
    for k in 0..n {
        trans[k] = t;
        t *= R::one() - alphas[k];
    }

    // suffix holds sum_{j>k} g_j w_j + dL/dT_fin * T_fin while walking back
    for k in (0..n).rev() {
        let gk = g(k);
        d_alpha[k] = gk * trans[k] - suffix / (R::one() - alphas[k]);
        for c in 0..3 {
            d_sample_color[k][c] = d_color[c] * result.weights[k];
        }
        suffix += gk * result.weights[k];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from_density(0.0f64, 0.3), 0.0);
        let half = alpha_from_density(std::f64::consts::LN_2, 1.0);
        assert!((half - 0.5).abs() < 1e-15);
        // 1 - e^{-1}, evaluated at high precision beforehand
        let a = alpha_from_density(10.0f64, 0.1);
        assert!((a - 0.6321205588285577).abs() < 1e-15);
    }

    #[test]
    fn opaque_front_sample_dominates() {
        let alphas = [0.999999f64];
        let colors = [[1.0, 0.0, 0.0]];
        let r = composite(&alphas, &colors, &[1.0], 0.0);
        assert!((r.color[0] - 0.999999).abs() < 1e-12);
        assert!((r.weights[0] - 0.999999).abs() < 1e-12);
    }

    #[test]
    fn saturated_density_stays_strictly_below_one() {
        // f32 would round 1 - exp(-1000) to exactly 1 without the cap
        let a32 = alpha_from_density(10_000.0f32, 1.0);
        assert!(a32 < 1.0);
        let a64 = alpha_from_density(10_000.0f64, 1.0);
        assert!(a64 < 1.0);

        // the compositing backward stays finite at the cap
        let alphas = [a64, 0.5];
        let colors = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let base = composite(&alphas, &colors, &[0.0, 1.0], 0.0);
        let mut d_alpha = [0.0; 2];
        let mut d_sc = [[0.0; 3]; 2];
        composite_backward(
            &alphas,
            &colors,
            &base,
            &[1.0, 1.0, 1.0],
            None,
            Some(&[1.0, 1.0, 1.0]),
            &mut d_alpha,
            &mut d_sc,
        );
        assert!(d_alpha.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn two_half_alpha_samples() {
        let alphas = [0.5f64, 0.5];
        let colors = [[1.0, 1.0, 1.0]; 2];
        let r = composite(&alphas, &colors, &[1.0, 2.0], 0.0);
        assert_eq!(r.weights, vec![0.5, 0.25]);
        assert!((r.weight_sum - 0.75).abs() < 1e-15);
        assert!((r.transmittance - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weights_match_prefix_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..40);
            let alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.999)).collect();
            let colors: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.gen(), rng.gen(), rng.gen()])
                .collect();
            let ts: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
            let r = composite(&alphas, &colors, &ts, 0.0);

            // brute-force prefix products
            let mut sum = 0.0;
            for k in 0..n {
                let mut w = alphas[k];
                for l in 0..k {
                    w *= 1.0 - alphas[l];
                }
                assert!((r.weights[k] - w).abs() < 1e-12);
                sum += w;
            }
            let prod: f64 = alphas.iter().map(|a| 1.0 - a).product();
            assert!((sum - (1.0 - prod)).abs() < 1e-10);
            assert!(r.weight_sum <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn early_termination_bounds_color_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = 60;
            let alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.7)).collect();
            let colors: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.gen(), rng.gen(), rng.gen()])
                .collect();
            let ts: Vec<f64> = (0..n).map(|k| k as f64).collect();
            let tau = 1e-3;
            let full = composite(&alphas, &colors, &ts, 0.0);
            let cut = composite(&alphas, &colors, &ts, tau);
            for c in 0..3 {
                assert!((full.color[c] - cut.color[c]).abs() <= tau);
            }
        }
    }

    #[test]
    fn appending_opaque_sample_saturates_weight_sum() {
        let mut alphas = vec![0.3f64, 0.2, 0.4];
        let mut colors = vec![[0.5, 0.5, 0.5]; 3];
        alphas.push(1.0 - 1e-12);
        colors.push([1.0, 1.0, 1.0]);
        let ts = vec![0.0, 1.0, 2.0, 3.0];
        let r = composite(&alphas, &colors, &ts, 0.0);
        assert!((r.weight_sum - 1.0).abs() < 1e-5);
    }

    #[test]
    fn compositing_is_order_dependent() {
        let alphas = [0.9f64, 0.9];
        let colors = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let fwd = composite(&alphas, &colors, &[0.0, 1.0], 0.0);
        let rev = composite(
            &[alphas[1], alphas[0]],
            &[colors[1], colors[0]],
            &[0.0, 1.0],
            0.0,
        );
        assert!((fwd.color[0] - rev.color[0]).abs() > 0.5);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 12;
        let alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.9)).collect();
        let colors: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.gen(), rng.gen(), rng.gen()])
            .collect();
        let ts: Vec<f64> = (0..n).map(|k| k as f64 * 0.05).collect();
        let d_color = [0.7, -1.3, 0.4];
        let dw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bg = [1.0, 0.5, 0.25];

        let scalar = |alphas: &[f64]| -> f64 {
            let r = composite(alphas, &colors, &ts, 0.0);
            let mut s = 0.0;
            for c in 0..3 {
                s += d_color[c] * (r.color[c] + r.transmittance * bg[c]);
            }
            for k in 0..n {
                s += dw[k] * r.weights[k];
            }
            s
        };

        let base = composite(&alphas, &colors, &ts, 0.0);
        let mut d_alpha = vec![0.0; n];
        let mut d_sc = vec![[0.0; 3]; n];
        composite_backward(
            &alphas,
            &colors,
            &base,
            &d_color,
            Some(&dw),
            Some(&bg),
            &mut d_alpha,
            &mut d_sc,
        );

        let eps = 1e-7;
        for k in 0..n {
            let mut up = alphas.clone();
            up[k] += eps;
            let mut down = alphas.clone();
            down[k] -= eps;
            let fd = (scalar(&up) - scalar(&down)) / (2.0 * eps);
            assert!(
                (fd - d_alpha[k]).abs() < 1e-6 * (1.0 + fd.abs()),
                "alpha {k}: fd {fd} vs {}",
                d_alpha[k]
            );
        }
        for k in 0..n {
            for c in 0..3 {
                let expect = d_color[c] * base.weights[k];
                assert!((d_sc[k][c] - expect).abs() < 1e-14);
            }
        }
    }
}
