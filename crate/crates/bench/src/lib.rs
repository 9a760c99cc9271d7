//! Deterministic input builders shared by the benchmark targets.

use classcp_core::{rng_from_seed, unit_f64, DenseMatrix, FactorSet, SparseTensor3};

/// Random sparse binary tensor with roughly `density * p * u * u` entries.
pub fn bench_tensor(p: usize, u: usize, density: f64, seed: u64) -> SparseTensor3 {
    let mut rng = rng_from_seed(seed);
    let mut entries = Vec::new();
    for i in 0..p {
        for j in 0..u {
            for k in 0..u {
                if unit_f64(&mut rng) < density {
                    entries.push((i, j, k));
                }
            }
        }
    }
    if entries.is_empty() {
        entries.push((0, 0, 0));
    }
    SparseTensor3::new(p, u, entries).unwrap()
}

/// Uniform random factor set of the given rank.
pub fn bench_factors(p: usize, u: usize, rank: usize, seed: u64) -> FactorSet {
    let mut rng = rng_from_seed(seed);
    let mut fill = |rows: usize| DenseMatrix::from_fn(rows, rank, |_, _| unit_f64(&mut rng));
    let a = fill(p);
    let b = fill(u);
    let c = fill(u);
    FactorSet::new(a, b, c).unwrap()
}
