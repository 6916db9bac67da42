/// Spatial hash primes. The first axis deliberately uses 1 so that 1D
/// lookups and the low axis of 2D plane lookups reduce to the coordinate
/// itself before the modulo.
pub const HASH_PRIMES: [u64; 3] = [1, 2_654_435_761, 805_459_861];

/// XOR of prime-multiplied lattice coordinates, wrapping in u64.
#[inline(always)]
pub fn hash_lattice(coords: &[u64]) -> u64 {
    let mut h = 0u64;
    for (i, &c) in coords.iter().enumerate() {
        h ^= c.wrapping_mul(HASH_PRIMES[i]);
    }
    h
}

/// Table row for a lattice vertex of a uniform-resolution grid.
///
/// When the whole grid fits the table ((resolution + 1)^d <= table_size) the
/// mapping is the injective row-major index, axis 0 fastest; otherwise the
/// spatial hash modulo the table size.
pub fn hash_index(lattice_point: &[u64], table_size: usize, grid_resolution: u32) -> usize {
    let verts = grid_resolution as u64 + 1;
    let d = lattice_point.len() as u32;
    if verts.checked_pow(d).is_some_and(|n| n <= table_size as u64) {
        let mut idx = 0u64;
        let mut stride = 1u64;
        for &c in lattice_point {
            idx += c * stride;
            stride *= verts;
        }
        idx as usize
    } else {
        (hash_lattice(lattice_point) % table_size as u64) as usize
    }
}
