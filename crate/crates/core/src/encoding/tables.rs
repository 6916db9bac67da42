use crate::real::Real;
use rand::Rng;

/// Symmetric half-width of the uniform table initialization.
pub fn table_init_scale() -> f64 {
    1e-4
}

/// Named collection of learnable feature tables. Each table is a flat
/// rows x feature_dim array; distinct names own disjoint storage.
#[derive(Debug, Clone)]
pub struct HashTableSet<R> {
    feature_dim: usize,
    names: Vec<String>,
    rows: Vec<usize>,
    tables: Vec<Vec<R>>,
}

impl<R: Real> HashTableSet<R> {
    /// Allocates tables initialized uniformly in [-1e-4, 1e-4].
    pub fn new(specs: &[(String, usize)], feature_dim: usize, rng: &mut impl Rng) -> Self {
        let scale = table_init_scale();
        let mut names = Vec::with_capacity(specs.len());
        let mut rows = Vec::with_capacity(specs.len());
        let mut tables = Vec::with_capacity(specs.len());
        for (name, r) in specs {
            names.push(name.clone());
            rows.push(*r);
            tables.push(
                (0..r * feature_dim)
                    .map(|_| R::from_f64(rng.gen_range(-scale..scale)))
                    .collect(),
            );
        }
        HashTableSet {
            feature_dim,
            names,
            rows,
            tables,
        }
    }

    /// All-constant tables; handy for tests.
    pub fn constant(specs: &[(String, usize)], feature_dim: usize, value: R) -> Self {
        let mut set = Self::new(specs, feature_dim, &mut rand::rngs::mock::StepRng::new(0, 0));
        for t in &mut set.tables {
            t.fill(value);
        }
        set
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn rows(&self, idx: usize) -> usize {
        self.rows[idx]
    }

    pub fn table(&self, idx: usize) -> &[R] {
        &self.tables[idx]
    }

    pub fn table_mut(&mut self, idx: usize) -> &mut [R] {
        &mut self.tables[idx]
    }

    pub fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    pub fn tables(&self) -> &[Vec<R>] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [Vec<R>] {
        &mut self.tables
    }

    pub fn param_count(&self) -> usize {
        self.rows.iter().map(|r| r * self.feature_dim).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_is_small_and_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let set: HashTableSet<f64> =
            HashTableSet::new(&[("a".into(), 1000), ("b".into(), 500)], 2, &mut rng);
        assert_eq!(set.param_count(), 3000);
        let all: Vec<f64> = set.tables().iter().flatten().copied().collect();
        assert!(all.iter().all(|v| v.abs() <= 1e-4));
        assert!(all.iter().any(|v| *v > 0.0) && all.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn disjoint_storage_per_name() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut set: HashTableSet<f64> =
            HashTableSet::new(&[("a".into(), 4), ("b".into(), 4)], 1, &mut rng);
        let before = set.table(1).to_vec();
        set.table_mut(0).fill(9.0);
        assert_eq!(set.table(1), &before[..]);
    }
}
