use super::TrainingError;
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Regularizer weights from the total-loss combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_op: f64,
    pub lambda_dist: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_op: 1e-3,
            lambda_dist: 1e-2,
        }
    }
}

pub const ENTROPY_EPS: f64 = 1e-10;

/// Mean over rays of the squared L2 color error.
pub fn loss_rgb<R: Real>(pred: &[[R; 3]], gt: &[[R; 3]]) -> Result<R, TrainingError> {
    if pred.len() != gt.len() {
        return Err(TrainingError::LengthMismatch {
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Ok(R::zero());
    }
    let mut acc = R::zero();
    for (p, g) in pred.iter().zip(gt) {
        for c in 0..3 {
            let d = p[c] - g[c];
            acc += d * d;
        }
    }
    Ok(acc / R::from_f64(pred.len() as f64))
}

/// Entropy of one opacity sample: -alpha * log(max(alpha, eps)).
#[inline]
pub fn opacity_entropy<R: Real>(alpha: R) -> R {
    -alpha * alpha.max(R::from_f64(ENTROPY_EPS)).ln()
}

/// d/dalpha of [`opacity_entropy`].
#[inline]
pub fn opacity_entropy_grad<R: Real>(alpha: R) -> R {
    let eps = R::from_f64(ENTROPY_EPS);
    if alpha > eps {
        -(alpha.ln() + R::one())
    } else {
        -eps.ln()
    }
}

/// Mean over samples of the opacity entropy.
pub fn loss_opacity<R: Real>(alphas: &[R]) -> R {
    if alphas.is_empty() {
        return R::zero();
    }
    let sum: R = alphas.iter().map(|&a| opacity_entropy(a)).sum();
    sum / R::from_f64(alphas.len() as f64)
}

fn check_sorted<R: Real>(s: &[R]) -> Result<(), TrainingError> {
    if s.windows(2).any(|w| w[1] < w[0]) {
        return Err(TrainingError::UnsortedSamples);
    }
    Ok(())
}

/// O(K^2) reference: sum_ij w_i w_j |s_i - s_j| + (1/3) sum_i w_i^2 ds_i.
pub fn loss_distortion_naive<R: Real>(
    w: &[R],
    s: &[R],
    ds: &[R],
) -> Result<R, TrainingError> {
    check_sorted(s)?;
    let third = R::from_f64(1.0 / 3.0);
    let mut bi = R::zero();
    for i in 0..w.len() {
        for j in 0..w.len() {
            bi += w[i] * w[j] * (s[i] - s[j]).abs();
        }
    }
    let mut own = R::zero();
    for i in 0..w.len() {
        own += w[i] * w[i] * ds[i];
    }
    Ok(bi + third * own)
}

/// O(K) prefix-sum form of the same quantity; this one runs in training.
pub fn loss_distortion<R: Real>(w: &[R], s: &[R], ds: &[R]) -> Result<R, TrainingError> {
    check_sorted(s)?;
    let third = R::from_f64(1.0 / 3.0);
    let mut w_prefix = R::zero();
    let mut ws_prefix = R::zero();
    let mut bi = R::zero();
    let mut own = R::zero();
    for i in 0..w.len() {
        // sum_{j<i} w_i w_j (s_i - s_j), doubled for the symmetric pair
        bi += w[i] * (s[i] * w_prefix - ws_prefix);
        own += w[i] * w[i] * ds[i];
        w_prefix += w[i];
        ws_prefix += w[i] * s[i];
    }
    Ok(bi + bi + third * own)
}

/// Accumulates `scale * d(distortion)/dw_k` into `d_w`, O(K).
pub fn loss_distortion_backward<R: Real>(
    w: &[R],
    s: &[R],
    ds: &[R],
    scale: R,
    d_w: &mut [R],
) -> Result<(), TrainingError> {
    check_sorted(s)?;
    let n = w.len();
    let two = R::from_f64(2.0);
    let two_thirds = R::from_f64(2.0 / 3.0);

    // suffix sums of w and w*s
    let mut w_suffix = R::zero();
    let mut ws_suffix = R::zero();
    let mut suffix = vec![(R::zero(), R::zero()); n];
    for i in (0..n).rev() {
        suffix[i] = (w_suffix, ws_suffix);
        w_suffix += w[i];
        ws_suffix += w[i] * s[i];
    }

    let mut w_prefix = R::zero();
    let mut ws_prefix = R::zero();
    for i in 0..n {
        let (w_after, ws_after) = suffix[i];
        // sum_j w_j |s_i - s_j| split around i
        let abs_sum = s[i] * w_prefix - ws_prefix + ws_after - s[i] * w_after;
        d_w[i] += scale * (two * abs_sum + two_thirds * w[i] * ds[i]);
        w_prefix += w[i];
        ws_prefix += w[i] * s[i];
    }
    Ok(())
}

/// Weighted total: rgb + lambda_op * op + lambda_dist * dist.
pub fn loss_total<R: Real>(rgb: R, op: R, dist: R, weights: &LossWeights) -> R {
    rgb + R::from_f64(weights.lambda_op) * op + R::from_f64(weights.lambda_dist) * dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rgb_loss_examples() {
        let a = [[0.5f64, 0.5, 0.5]];
        assert_eq!(loss_rgb(&a, &a).unwrap(), 0.0);

        let p = [[0.6f64, 0.5, 0.5]];
        let g = [[0.5f64, 0.5, 0.5]];
        assert!((loss_rgb(&p, &g).unwrap() - 0.01).abs() < 1e-15);

        assert!(loss_rgb(&p, &[]).is_err());
    }

    #[test]
    fn rgb_loss_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 64;
        let pred: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let gt: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let mut expect = 0.0;
        for i in 0..n {
            for c in 0..3 {
                expect += (pred[i][c] - gt[i][c]).powi(2);
            }
        }
        let expect = expect / n as f64;
        assert!((loss_rgb(&pred, &gt).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn opacity_entropy_fixed_points() {
        assert_eq!(loss_opacity(&[1.0f64; 8]), 0.0);
        assert_eq!(loss_opacity(&[0.0f64; 8]), 0.0);
        let e = std::f64::consts::E;
        let v = loss_opacity(&[1.0 / e]);
        assert!((v - 1.0 / e).abs() < 1e-15);
    }

    #[test]
    fn distortion_trivial_cases() {
        assert_eq!(loss_distortion::<f64>(&[], &[], &[]).unwrap(), 0.0);
        assert_eq!(
            loss_distortion(&[0.0f64; 5], &[0.1, 0.2, 0.3, 0.4, 0.5], &[0.1; 5]).unwrap(),
            0.0
        );
        // single sample: only the self term
        let v = loss_distortion(&[0.4f64], &[0.5], &[0.2]).unwrap();
        assert!((v - 0.4 * 0.4 * 0.2 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distortion_rejects_unsorted() {
        assert!(loss_distortion(&[0.1f64, 0.1], &[0.9, 0.1], &[0.1, 0.1]).is_err());
        assert!(loss_distortion_naive(&[0.1f64, 0.1], &[0.9, 0.1], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn efficient_matches_naive_on_random_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.gen_range(1..48);
            let mut s: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.2)).collect();
            let ds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.001..0.05)).collect();
            let fast = loss_distortion(&w, &s, &ds).unwrap();
            let slow = loss_distortion_naive(&w, &s, &ds).unwrap();
            let denom = slow.abs().max(1e-12);
            assert!(
                ((fast - slow) / denom).abs() < 1e-6,
                "fast {fast} vs naive {slow}"
            );
        }
    }

    #[test]
    fn distortion_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 16;
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.3)).collect();
        let ds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.001..0.05)).collect();

        let mut d_w = vec![0.0; n];
        loss_distortion_backward(&w, &s, &ds, 1.0, &mut d_w).unwrap();

        let eps = 1e-7;
        for k in 0..n {
            let mut up = w.clone();
            up[k] += eps;
            let mut down = w.clone();
            down[k] -= eps;
            let fd = (loss_distortion(&up, &s, &ds).unwrap()
                - loss_distortion(&down, &s, &ds).unwrap())
                / (2.0 * eps);
            assert!((fd - d_w[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", d_w[k]);
        }
    }

    #[test]
    fn total_is_linear_in_parts() {
        let w = LossWeights::default();
        assert_eq!(loss_total(1.0f64, 0.0, 0.0, &w), 1.0);
        assert!((loss_total(0.0f64, 1.0, 0.0, &w) - 1e-3).abs() < 1e-18);
        assert!((loss_total(0.5f64, 2.0, 3.0, &w) - 0.532).abs() < 1e-15);
    }
}
