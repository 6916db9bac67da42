use super::SceneError;
use crate::renderer::Aabb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Constant-density solid; density is uniform inside and zero outside, so
/// footprint and occupancy oracles are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
        albedo: [f64; 3],
        density: f64,
    },
    #[serde(rename = "box")]
    Cuboid {
        center: [f64; 3],
        half: [f64; 3],
        albedo: [f64; 3],
        density: f64,
    },
}

impl Primitive {
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        match self {
            Primitive::Sphere { center, radius, .. } => {
                let d2 = (0..3).map(|i| (p[i] - center[i]).powi(2)).sum::<f64>();
                d2 <= radius * radius
            }
            Primitive::Cuboid { center, half, .. } => {
                (0..3).all(|i| (p[i] - center[i]).abs() <= half[i])
            }
        }
    }

    pub fn density(&self) -> f64 {
        match self {
            Primitive::Sphere { density, .. } | Primitive::Cuboid { density, .. } => *density,
        }
    }

    pub fn albedo(&self) -> [f64; 3] {
        match self {
            Primitive::Sphere { albedo, .. } | Primitive::Cuboid { albedo, .. } => *albedo,
        }
    }

    fn max_extent_from_center(&self) -> f64 {
        match self {
            Primitive::Sphere { radius, .. } => *radius,
            Primitive::Cuboid { half, .. } => half.iter().cloned().fold(0.0, f64::max),
        }
    }

    fn center(&self) -> [f64; 3] {
        match self {
            Primitive::Sphere { center, .. } | Primitive::Cuboid { center, .. } => *center,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticScene {
    pub primitives: Vec<Primitive>,
    pub background: [f64; 3],
    pub aabb: Aabb,
}

impl AnalyticScene {
    /// Density and albedo at a point; the first containing primitive in
    /// list order wins on overlap.
    pub fn sample(&self, p: &[f64; 3]) -> (f64, [f64; 3]) {
        for prim in &self.primitives {
            if prim.contains(p) {
                return (prim.density(), prim.albedo());
            }
        }
        (0.0, [0.0, 0.0, 0.0])
    }

    pub fn contains_all_primitives(&self) -> bool {
        self.primitives.iter().all(|prim| {
            let c = prim.center();
            let e = prim.max_extent_from_center();
            (0..3).all(|i| c[i] - e >= self.aabb.min[i] && c[i] + e <= self.aabb.max[i])
        })
    }
}

/// Knobs for procedural desk scenes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: usize,
    /// Half-width of the centered cubic scene box.
    pub aabb_half: f64,
    pub density: f64,
    pub background: [f64; 3],
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            primitives: 3,
            aabb_half: 1.0,
            density: 150.0,
            background: [1.0, 1.0, 1.0],
        }
    }
}

/// Deterministic scene from a seed: non-degenerate spheres and boxes strictly
/// inside the box, saturated distinct albedos.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<AnalyticScene, SceneError> {
    if spec.primitives == 0 {
        return Err(SceneError::EmptySpec);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spec.aabb_half;
    let mut primitives = Vec::with_capacity(spec.primitives);
    for i in 0..spec.primitives {
        let size = rng.gen_range(0.15..0.32) * h;
        let margin = size * 1.05;
        let center = [
            rng.gen_range(-h + margin..h - margin),
            rng.gen_range(-h + margin..h - margin),
            rng.gen_range(-h + margin..h - margin),
        ];
        let albedo = [
            rng.gen_range(0.1..0.95),
            rng.gen_range(0.1..0.95),
            rng.gen_range(0.1..0.95),
        ];
        if i % 2 == 0 {
            primitives.push(Primitive::Sphere {
                center,
                radius: size,
                albedo,
                density: spec.density,
            });
        } else {
            primitives.push(Primitive::Cuboid {
                center,
                half: [
                    size * rng.gen_range(0.6..1.0),
                    size * rng.gen_range(0.6..1.0),
                    size * rng.gen_range(0.6..1.0),
                ],
                albedo,
                density: spec.density,
            });
        }
    }
    Ok(AnalyticScene {
        primitives,
        background: spec.background,
        aabb: Aabb::centered(h),
    })
}
