use super::hash::hash_lattice;
use crate::real::Real;

/// Maps lattice vertices to table rows: injective row-major when the grid
/// fits the table, spatial hash otherwise (bit mask for power-of-two row
/// counts, modulo in general).
#[derive(Debug, Clone)]
pub enum LatticeIndexer {
    RowMajor { strides: [u64; 3] },
    HashPow2 { mask: u64 },
    Hash { rows: usize },
}

impl LatticeIndexer {
    /// Chooses the indexing scheme for a grid with `extents[i]` cells per
    /// axis (so `extents[i] + 1` vertices) and a table of `rows` rows.
    pub fn choose(extents: &[u32], rows: usize) -> Self {
        let mut strides = [0u64; 3];
        let mut total = 1u64;
        let mut fits = true;
        for (i, &e) in extents.iter().enumerate() {
            strides[i] = total;
            total = match total.checked_mul(e as u64 + 1) {
                Some(t) => t,
                None => {
                    fits = false;
                    break;
                }
            };
        }
        if fits && total <= rows as u64 {
            LatticeIndexer::RowMajor { strides }
        } else if rows.is_power_of_two() {
            LatticeIndexer::HashPow2 {
                mask: rows as u64 - 1,
            }
        } else {
            LatticeIndexer::Hash { rows }
        }
    }

    #[inline(always)]
    pub fn row(&self, vertex: &[u64]) -> usize {
        match self {
            LatticeIndexer::RowMajor { strides } => {
                let mut idx = 0u64;
                for (i, &v) in vertex.iter().enumerate() {
                    idx += v * strides[i];
                }
                idx as usize
            }
            LatticeIndexer::HashPow2 { mask } => (hash_lattice(vertex) & mask) as usize,
            LatticeIndexer::Hash { rows } => (hash_lattice(vertex) % *rows as u64) as usize,
        }
    }

    /// Row of a 2D vertex, dispatch hoisted out of the corner loop.
    #[inline(always)]
    fn row2(&self, v0: u64, v1: u64) -> usize {
        match self {
            LatticeIndexer::RowMajor { strides } => (v0 + v1 * strides[1]) as usize,
            LatticeIndexer::HashPow2 { mask } => {
                ((v0 ^ v1.wrapping_mul(super::hash::HASH_PRIMES[1])) & mask) as usize
            }
            LatticeIndexer::Hash { rows } => {
                ((v0 ^ v1.wrapping_mul(super::hash::HASH_PRIMES[1])) % *rows as u64) as usize
            }
        }
    }

    #[inline(always)]
    fn row3(&self, v0: u64, v1: u64, v2: u64) -> usize {
        match self {
            LatticeIndexer::RowMajor { strides } => {
                (v0 + v1 * strides[1] + v2 * strides[2]) as usize
            }
            LatticeIndexer::HashPow2 { mask } => ((v0
                ^ v1.wrapping_mul(super::hash::HASH_PRIMES[1])
                ^ v2.wrapping_mul(super::hash::HASH_PRIMES[2]))
                & mask) as usize,
            LatticeIndexer::Hash { rows } => ((v0
                ^ v1.wrapping_mul(super::hash::HASH_PRIMES[1])
                ^ v2.wrapping_mul(super::hash::HASH_PRIMES[2]))
                % *rows as u64) as usize,
        }
    }
}

/// Cell base index and fractional offset for one lattice axis. Points on
/// the far face land in the last cell with fraction exactly 1.
#[inline(always)]
pub fn cell_and_frac(p: f64, extent: u32) -> (u64, f64) {
    let p = p.clamp(0.0, extent as f64);
    let mut c = p.floor() as i64;
    if c >= extent as i64 {
        c = extent as i64 - 1;
    }
    (c as u64, p - c as f64)
}

/// Per-corner multilinear weights for a point inside one cell.
#[derive(Debug, Clone)]
pub struct CornerWeights {
    pub dims: usize,
    pub cell: [u64; 3],
    pub frac: [f64; 3],
}

impl CornerWeights {
    pub fn at(point: &[f64], extents: &[u32]) -> Self {
        let dims = point.len();
        debug_assert!(dims >= 1 && dims <= 3 && extents.len() == dims);
        let mut cell = [0u64; 3];
        let mut frac = [0.0f64; 3];
        for i in 0..dims {
            let (c, f) = cell_and_frac(point[i], extents[i]);
            cell[i] = c;
            frac[i] = f;
        }
        CornerWeights { dims, cell, frac }
    }

    /// Weight of corner `k` (bit i of `k` selects the high vertex on axis i).
    #[inline(always)]
    pub fn weight(&self, k: usize) -> f64 {
        let mut w = 1.0;
        for i in 0..self.dims {
            w *= if k >> i & 1 == 1 {
                self.frac[i]
            } else {
                1.0 - self.frac[i]
            };
        }
        w
    }

    #[inline(always)]
    pub fn vertex(&self, k: usize, out: &mut [u64; 3]) {
        for i in 0..self.dims {
            out[i] = self.cell[i] + (k >> i & 1) as u64;
        }
    }
}

/// Corner weights and rows for one cell, bilinear/trilinear specialized.
/// Weight products multiply axis 0 first, matching the generic path
/// bit-for-bit.
#[inline(always)]
fn corners<const N: usize>(
    point: &[f64],
    extents: &[u32],
    indexer: &LatticeIndexer,
) -> ([f64; N], [usize; N]) {
    debug_assert_eq!(1usize << point.len(), N);
    match N {
        4 => {
            let (c0, f0) = cell_and_frac(point[0], extents[0]);
            let (c1, f1) = cell_and_frac(point[1], extents[1]);
            let mut w = [0.0; N];
            let mut rows = [0usize; N];
            w[0] = (1.0 - f0) * (1.0 - f1);
            w[1] = f0 * (1.0 - f1);
            w[2] = (1.0 - f0) * f1;
            w[3] = f0 * f1;
            rows[0] = indexer.row2(c0, c1);
            rows[1] = indexer.row2(c0 + 1, c1);
            rows[2] = indexer.row2(c0, c1 + 1);
            rows[3] = indexer.row2(c0 + 1, c1 + 1);
            (w, rows)
        }
        8 => {
            let (c0, f0) = cell_and_frac(point[0], extents[0]);
            let (c1, f1) = cell_and_frac(point[1], extents[1]);
            let (c2, f2) = cell_and_frac(point[2], extents[2]);
            let mut w = [0.0; N];
            let mut rows = [0usize; N];
            for k in 0..8 {
                let w0 = if k & 1 == 1 { f0 } else { 1.0 - f0 };
                let w1 = if k >> 1 & 1 == 1 { f1 } else { 1.0 - f1 };
                let w2 = if k >> 2 & 1 == 1 { f2 } else { 1.0 - f2 };
                w[k] = w0 * w1 * w2;
                rows[k] = indexer.row3(
                    c0 + (k & 1) as u64,
                    c1 + (k >> 1 & 1) as u64,
                    c2 + (k >> 2 & 1) as u64,
                );
            }
            (w, rows)
        }
        _ => unreachable!(),
    }
}

/// Multilinear interpolation of the 2^d lattice rows around `point`,
/// written (not accumulated) into `out`.
pub fn lattice_lookup<R: Real>(
    point: &[f64],
    extents: &[u32],
    indexer: &LatticeIndexer,
    table: &[R],
    feature_dim: usize,
    out: &mut [R],
) {
    out.fill(R::zero());
    match point.len() {
        2 => {
            let (w, rows) = corners::<4>(point, extents, indexer);
            gather(table, feature_dim, &w, &rows, out);
        }
        3 => {
            let (w, rows) = corners::<8>(point, extents, indexer);
            gather(table, feature_dim, &w, &rows, out);
        }
        _ => {
            let cw = CornerWeights::at(point, extents);
            let mut vertex = [0u64; 3];
            for k in 0..1usize << cw.dims {
                let w = R::from_f64(cw.weight(k));
                cw.vertex(k, &mut vertex);
                let row = indexer.row(&vertex[..cw.dims]);
                let src = &table[row * feature_dim..(row + 1) * feature_dim];
                for (o, &s) in out.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
    }
}

#[inline(always)]
fn gather<R: Real, const N: usize>(
    table: &[R],
    feature_dim: usize,
    w: &[f64; N],
    rows: &[usize; N],
    out: &mut [R],
) {
    for k in 0..N {
        let wk = R::from_f64(w[k]);
        let src = &table[rows[k] * feature_dim..(rows[k] + 1) * feature_dim];
        for (o, &s) in out.iter_mut().zip(src) {
            *o += wk * s;
        }
    }
}

/// Adjoint of [`lattice_lookup`]: scatters `upstream` into the touched rows
/// of `grad_table` with the same interpolation weights.
pub fn lattice_scatter<R: Real>(
    point: &[f64],
    extents: &[u32],
    indexer: &LatticeIndexer,
    grad_table: &mut [R],
    feature_dim: usize,
    upstream: &[R],
) {
    match point.len() {
        2 => {
            let (w, rows) = corners::<4>(point, extents, indexer);
            scatter(grad_table, feature_dim, &w, &rows, upstream);
        }
        3 => {
            let (w, rows) = corners::<8>(point, extents, indexer);
            scatter(grad_table, feature_dim, &w, &rows, upstream);
        }
        _ => {
            let cw = CornerWeights::at(point, extents);
            let mut vertex = [0u64; 3];
            for k in 0..1usize << cw.dims {
                let w = R::from_f64(cw.weight(k));
                cw.vertex(k, &mut vertex);
                let row = indexer.row(&vertex[..cw.dims]);
                let dst = &mut grad_table[row * feature_dim..(row + 1) * feature_dim];
                for (d, &u) in dst.iter_mut().zip(upstream) {
                    *d += w * u;
                }
            }
        }
    }
}

#[inline(always)]
fn scatter<R: Real, const N: usize>(
    grad_table: &mut [R],
    feature_dim: usize,
    w: &[f64; N],
    rows: &[usize; N],
    upstream: &[R],
) {
    for k in 0..N {
        let wk = R::from_f64(w[k]);
        let dst = &mut grad_table[rows[k] * feature_dim..(rows[k] + 1) * feature_dim];
        for (d, &u) in dst.iter_mut().zip(upstream) {
            *d += wk * u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dense_table(rows: usize, f: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..rows * f).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn vertex_query_returns_row() {
        let extents = [4u32, 4];
        let table = dense_table(25, 3, 7);
        let indexer = LatticeIndexer::choose(&extents, 25);
        let mut out = vec![0.0f64; 3];
        lattice_lookup(&[2.0, 3.0], &extents, &indexer, &table, 3, &mut out);
        let row = 2 + 3 * 5;
        assert_eq!(out, table[row * 3..row * 3 + 3].to_vec());
    }

    #[test]
    fn cell_center_is_corner_mean() {
        let extents = [2u32, 2];
        let table = dense_table(9, 2, 3);
        let indexer = LatticeIndexer::choose(&extents, 9);
        let mut out = vec![0.0f64; 2];
        lattice_lookup(&[0.5, 1.5], &extents, &indexer, &table, 2, &mut out);
        let rows = [0 + 1 * 3, 1 + 1 * 3, 0 + 2 * 3, 1 + 2 * 3];
        for f in 0..2 {
            let mean: f64 = rows.iter().map(|&r| table[r * 2 + f]).sum::<f64>() / 4.0;
            assert!((out[f] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_distance_weight_formula() {
        // Independent oracle: weight of vertex v is prod_i (1 - |p_i - v_i|)
        // over the surrounding unit cell.
        let extents = [8u32, 8, 8];
        let table = dense_table(729, 2, 11);
        let indexer = LatticeIndexer::choose(&extents, 729);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let p = [
                rng.gen_range(0.0..8.0),
                rng.gen_range(0.0..8.0),
                rng.gen_range(0.0..8.0),
            ];
            let mut out = vec![0.0f64; 2];
            lattice_lookup(&p, &extents, &indexer, &table, 2, &mut out);

            let base = [p[0].floor() as u64, p[1].floor() as u64, p[2].floor() as u64];
            let mut expect = vec![0.0f64; 2];
            for k in 0..8usize {
                let v = [
                    base[0] + (k & 1) as u64,
                    base[1] + (k >> 1 & 1) as u64,
                    base[2] + (k >> 2 & 1) as u64,
                ];
                let w: f64 = (0..3)
                    .map(|i| 1.0 - (p[i] - v[i] as f64).abs())
                    .product();
                let row = (v[0] + v[1] * 9 + v[2] * 81) as usize;
                for f in 0..2 {
                    expect[f] += w * table[row * 2 + f];
                }
            }
            for f in 0..2 {
                assert!((out[f] - expect[f]).abs() < 1e-12, "{out:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn weights_sum_to_one_and_stay_in_range() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for dims in 1..=3usize {
            for _ in 0..200 {
                let point: Vec<f64> = (0..dims).map(|_| rng.gen_range(0.0..16.0)).collect();
                let extents = vec![16u32; dims];
                let cw = CornerWeights::at(&point, &extents);
                let mut sum = 0.0;
                for k in 0..1usize << dims {
                    let w = cw.weight(k);
                    assert!((0.0..=1.0).contains(&w));
                    sum += w;
                }
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn far_face_lands_on_last_vertex() {
        let (c, f) = cell_and_frac(16.0, 16);
        assert_eq!(c, 15);
        assert_eq!(f, 1.0);
    }
}
