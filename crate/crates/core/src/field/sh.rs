use super::FieldError;

/// Real spherical harmonics basis for degrees 0..3, Condon-Shortley-free,
/// ordered degree-major with m ascending:
///
/// ```text
/// [ Y00,
///   Y1-1, Y10, Y11,
///   Y2-2, Y2-1, Y20, Y21, Y22,
///   Y3-3, Y3-2, Y3-1, Y30, Y31, Y32, Y33 ]
/// ```
///
/// `direction` must be unit length within 1e-6.
pub fn sh_encode(direction: &[f64; 3]) -> Result<[f64; 16], FieldError> {
    let [x, y, z] = *direction;
    let norm = (x * x + y * y + z * z).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(FieldError::NonUnitDirection(norm));
    }

    const C0: f64 = 0.28209479177387814;
    const C1: f64 = 0.4886025119029199;
    const C2_N2: f64 = 1.0925484305920792;
    const C2_0: f64 = 0.31539156525252005;
    const C2_2: f64 = 0.5462742152960396;
    const C3_N3: f64 = 0.5900435899266435;
    const C3_N2: f64 = 2.890611442640554;
    const C3_N1: f64 = 0.4570457994644658;
    const C3_0: f64 = 0.3731763325901154;
    const C3_2: f64 = 1.445305721320277;

    let (x2, y2, z2) = (x * x, y * y, z * z);
    Ok([
        C0,
        C1 * y,
        C1 * z,
        C1 * x,
        C2_N2 * x * y,
        C2_N2 * y * z,
        C2_0 * (3.0 * z2 - 1.0),
        C2_N2 * x * z,
        C2_2 * (x2 - y2),
        C3_N3 * y * (3.0 * x2 - y2),
        C3_N2 * x * y * z,
        C3_N1 * y * (5.0 * z2 - 1.0),
        C3_0 * z * (5.0 * z2 - 3.0),
        C3_N1 * x * (5.0 * z2 - 1.0),
        C3_2 * z * (x2 - y2),
        C3_N3 * x * (x2 - 3.0 * y2),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dc_component_is_constant() {
        for d in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.0, 0.8]] {
            let sh = sh_encode(&d).unwrap();
            assert!((sh[0] - 0.28209479177387814).abs() < 1e-15);
        }
    }

    #[test]
    fn z_axis_kills_all_nonzero_m() {
        let sh = sh_encode(&[0.0, 0.0, 1.0]).unwrap();
        for l in 0..4usize {
            let base = l * l;
            for m in 0..(2 * l + 1) {
                let idx = base + m;
                if m == l {
                    assert!(sh[idx].abs() > 0.1, "m=0 term of degree {l} should survive");
                } else {
                    assert_eq!(sh[idx], 0.0, "Y_{l}^{} should vanish", m as i64 - l as i64);
                }
            }
        }
    }

    #[test]
    fn x_axis_matches_reference_table() {
        // Frozen from an independent evaluation of the real SH basis
        // (complex harmonics recombined, Condon-Shortley phase removed).
        let expect = [
            0.28209479177387814,
            0.0,
            0.0,
            0.4886025119029199,
            0.0,
            0.0,
            -0.31539156525252005,
            0.0,
            0.5462742152960396,
            0.0,
            0.0,
            0.0,
            0.0,
            -0.4570457994644658,
            0.0,
            0.5900435899266435,
        ];
        let sh = sh_encode(&[1.0, 0.0, 0.0]).unwrap();
        for (a, e) in sh.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15, "{a} vs {e}");
        }
    }

    #[test]
    fn rejects_non_unit_input() {
        assert!(sh_encode(&[1.0, 1.0, 0.0]).is_err());
        assert!(sh_encode(&[0.0, 0.0, 0.9999])
            .err()
            .is_some_and(|e| matches!(e, FieldError::NonUnitDirection(_))));
    }

    #[test]
    fn per_degree_norm_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base_norms: Vec<f64> = degree_norms(&sh_encode(&[0.0, 0.0, 1.0]).unwrap());
        for _ in 0..50 {
            // random unit direction via normalized gaussian triple
            let d = random_unit(&mut rng);
            let norms = degree_norms(&sh_encode(&d).unwrap());
            for (a, b) in norms.iter().zip(&base_norms) {
                assert!((a - b).abs() < 1e-6, "{norms:?} vs {base_norms:?}");
            }
        }
    }

    fn degree_norms(sh: &[f64; 16]) -> Vec<f64> {
        (0..4usize)
            .map(|l| {
                sh[l * l..(l + 1) * (l + 1)]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
        loop {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }
}
