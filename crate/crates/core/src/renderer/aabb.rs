use super::camera::Ray;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Axis-aligned scene bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Aabb { min, max }
    }

    pub fn unit() -> Self {
        Aabb::new([0.0; 3], [1.0; 3])
    }

    pub fn centered(half: f64) -> Self {
        Aabb::new([-half; 3], [half; 3])
    }

    pub fn diagonal(&self) -> f64 {
        let d = [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Maps a world point into the unit cube, clamped against boundary
    /// round-off.
    pub fn normalize(&self, p: &Vector3<f64>) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let extent = self.max[i] - self.min[i];
            out[i] = ((p[i] - self.min[i]) / extent).clamp(0.0, 1.0);
        }
        out
    }
}

/// Slab intersection clamped to t >= 0; None on miss.
pub fn ray_aabb(ray: &Ray, aabb: &Aabb) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        let o = ray.origin[i];
        let d = ray.direction[i];
        if d == 0.0 {
            if o < aabb.min[i] || o > aabb.max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let mut ta = (aabb.min[i] - o) * inv;
        let mut tb = (aabb.max[i] - o) * inv;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}
