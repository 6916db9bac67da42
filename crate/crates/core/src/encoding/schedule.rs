use super::EncodingError;
use serde::{Deserialize, Serialize};

/// Geometric per-level grid resolutions, coarsest to finest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub n_min: u32,
    pub n_max: u32,
    pub levels: usize,
    pub resolutions: Vec<u32>,
    pub growth: f64,
}

/// Builds the resolution ladder N_l = floor(n_min * b^l) with
/// b = exp(ln(n_max/n_min) / (levels - 1)).
///
/// The floor argument is nudged up by one part in 1e12 before truncation:
/// power-of-two ladders hit exact integers (e.g. 16 * 32^(3/15) = 32) that
/// f64 evaluates a few ulps low, and truncating those would skip a grid size.
pub fn level_resolutions(
    n_min: u32,
    n_max: u32,
    levels: usize,
) -> Result<LevelSchedule, EncodingError> {
    if n_min < 1 {
        return Err(EncodingError::InvalidConfig(
            "n_min must be at least 1".into(),
        ));
    }
    if n_max < n_min {
        return Err(EncodingError::InvalidConfig(format!(
            "n_max ({n_max}) must be >= n_min ({n_min})"
        )));
    }
    if levels < 1 {
        return Err(EncodingError::InvalidConfig(
            "levels must be at least 1".into(),
        ));
    }

    if levels == 1 {
        return Ok(LevelSchedule {
            n_min,
            n_max,
            levels,
            resolutions: vec![n_min],
            growth: 1.0,
        });
    }

    let log_b = (n_max as f64 / n_min as f64).ln() / (levels - 1) as f64;
    let resolutions: Vec<u32> = (0..levels)
        .map(|l| {
            let x = n_min as f64 * (l as f64 * log_b).exp();
            (x * (1.0 + 1e-12)).floor() as u32
        })
        .collect();

    Ok(LevelSchedule {
        n_min,
        n_max,
        levels,
        resolutions,
        growth: log_b.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_level_ladder() {
        let s = level_resolutions(16, 512, 16).unwrap();
        assert_eq!(s.resolutions[0], 16);
        // b = exp(ln 32 / 15) = 1.2599..., floor(16 * b) = 20; checked
        // against a 60-digit reference evaluation.
        assert_eq!(s.resolutions[1], 20);
        assert_eq!(s.resolutions[15], 512);
        assert_eq!(
            s.resolutions,
            vec![16, 20, 25, 32, 40, 50, 64, 80, 101, 128, 161, 203, 256, 322, 406, 512]
        );
        assert!((s.growth - 1.2599210498948732).abs() < 1e-12);
    }

    #[test]
    fn desk_ladder_hits_exact_top() {
        // 16 * 16^(7/7) = 256 exactly; plain f64 floor would give 255.
        let s = level_resolutions(16, 256, 8).unwrap();
        assert_eq!(s.resolutions, vec![16, 23, 35, 52, 78, 115, 172, 256]);
    }

    #[test]
    fn single_level_is_n_min() {
        let s = level_resolutions(16, 512, 1).unwrap();
        assert_eq!(s.resolutions, vec![16]);
    }

    #[test]
    fn flat_ladder() {
        let s = level_resolutions(4, 4, 3).unwrap();
        assert_eq!(s.resolutions, vec![4, 4, 4]);
    }

    #[test]
    fn monotone_non_decreasing() {
        for &(lo, hi, levels) in &[(2u32, 64u32, 4usize), (16, 512, 16), (1, 7, 5), (3, 999, 11)] {
            let s = level_resolutions(lo, hi, levels).unwrap();
            assert_eq!(s.resolutions[0], lo);
            assert!(s.resolutions.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*s.resolutions.last().unwrap(), hi);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(level_resolutions(16, 8, 4).is_err());
        assert!(level_resolutions(16, 32, 0).is_err());
        assert!(level_resolutions(0, 32, 4).is_err());
    }
}
