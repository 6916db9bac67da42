use super::aabb::Aabb;
use super::camera::Ray;
use rand::Rng;

/// Boolean voxel grid gating sample generation, backed by an exponentially
/// decayed density cache. Freshly constructed fields are fully open (all
/// bits set) until the first update establishes cache-consistent bits.
#[derive(Debug, Clone)]
pub struct OccupancyBitfield {
    pub resolution: usize,
    pub bits: Vec<bool>,
    pub density_cache: Vec<f32>,
    pub aabb: Aabb,
}

impl OccupancyBitfield {
    pub fn new(resolution: usize, aabb: Aabb) -> Self {
        let n = resolution * resolution * resolution;
        OccupancyBitfield {
            resolution,
            bits: vec![true; n],
            density_cache: vec![0.0; n],
            aabb,
        }
    }

    #[inline]
    pub fn voxel_index(&self, p: &[f64; 3]) -> Option<usize> {
        let r = self.resolution;
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let extent = self.aabb.max[i] - self.aabb.min[i];
            let s = (p[i] - self.aabb.min[i]) / extent * r as f64;
            if s < 0.0 || s >= r as f64 + 1e-12 {
                return None;
            }
            idx[i] = (s as usize).min(r - 1);
        }
        Some(idx[0] + idx[1] * r + idx[2] * r * r)
    }

    #[inline]
    pub fn occupied(&self, p: &[f64; 3]) -> bool {
        match self.voxel_index(p) {
            Some(i) => self.bits[i],
            None => false,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// One full sweep: every voxel's cache becomes max(decay * old, sigma at
    /// a jittered interior point), and bits become cache > threshold.
    pub fn update(
        &mut self,
        mut sigma_at: impl FnMut(&[f64; 3]) -> f64,
        decay: f64,
        threshold: f32,
        rng: &mut impl Rng,
    ) {
        let r = self.resolution;
        let cell = [
            (self.aabb.max[0] - self.aabb.min[0]) / r as f64,
            (self.aabb.max[1] - self.aabb.min[1]) / r as f64,
            (self.aabb.max[2] - self.aabb.min[2]) / r as f64,
        ];
        for iz in 0..r {
            for iy in 0..r {
                for ix in 0..r {
                    let p = [
                        self.aabb.min[0] + (ix as f64 + rng.gen_range(0.0..1.0)) * cell[0],
                        self.aabb.min[1] + (iy as f64 + rng.gen_range(0.0..1.0)) * cell[1],
                        self.aabb.min[2] + (iz as f64 + rng.gen_range(0.0..1.0)) * cell[2],
                    ];
                    let sigma = sigma_at(&p) as f32;
                    let i = ix + iy * r + iz * r * r;
                    self.density_cache[i] = (self.density_cache[i] * decay as f32).max(sigma);
                    self.bits[i] = self.density_cache[i] > threshold;
                }
            }
        }
    }
}

/// Reusable storage for one ray's marched samples.
#[derive(Debug, Default, Clone)]
pub struct MarchBuffer {
    pub ts: Vec<f64>,
    pub deltas: Vec<f64>,
    pub positions: Vec<[f64; 3]>,
}

impl MarchBuffer {
    pub fn clear(&mut self) {
        self.ts.clear();
        self.deltas.clear();
        self.positions.clear();
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

/// Uniform stepping over [t_near, t_far) at `step`, keeping only samples in
/// occupied voxels. Deltas span consecutive retained samples; the last one
/// falls back to the step size. Empty output when the range is empty.
pub fn march_samples(ray: &Ray, bitfield: &OccupancyBitfield, step: f64, out: &mut MarchBuffer) {
    out.clear();
    if !(ray.t_far > ray.t_near) || step <= 0.0 {
        return;
    }
    let mut k = 0u64;
    loop {
        let t = ray.t_near + k as f64 * step;
        if t >= ray.t_far {
            break;
        }
        let p = ray.origin + ray.direction * t;
        let p = [p.x, p.y, p.z];
        if bitfield.occupied(&p) {
            if let Some(last) = out.ts.last() {
                let idx = out.deltas.len() - 1;
                out.deltas[idx] = t - last;
            }
            out.ts.push(t);
            out.deltas.push(step);
            out.positions.push(p);
        }
        k += 1;
    }
}
