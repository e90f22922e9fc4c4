//! Seeded Gaussian design for the synthetic experiments.
//!
//! Randomness comes from a single `ChaCha8Rng` seeded with `seed_from_u64`,
//! which produces the same stream on every platform. Entries are drawn row by
//! row from `StandardNormal`.

use gcgm_core::DataMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Error;

pub const DEFAULT_N: usize = 100;
pub const DEFAULT_D: usize = 50;

/// `n × d` matrix of i.i.d. standard normals with every label set to `+1`.
pub fn gen_synthetic(seed: u64, n: usize, d: usize) -> Result<DataMatrix, Error> {
    if n == 0 || d == 0 {
        return Err(Error::Usage("synthetic problems need n, d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(DataMatrix::new(n, d, a, vec![1.0; n])?)
}
