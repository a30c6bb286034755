//! Seeded fixtures shared by the benchmarks.

use brainib_core::graph_data::{generate_synthetic, SyntheticSpec};
use brainib_core::{Dataset, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_batch(m: usize, d: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_adjacency(n: usize, p: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Tensor::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

/// The 30-node, 5-planted-node cohort used throughout the test suite.
pub fn planted_cohort(per_class: usize) -> Dataset {
    let spec = SyntheticSpec {
        seed: 7,
        ..SyntheticSpec::new(30, per_class, vec![1, 2, 3, 4, 5])
    };
    generate_synthetic(&spec).expect("valid synthetic spec")
}
