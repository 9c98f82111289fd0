use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Inverse CDF of the exponential distribution with scale (mean) `lambda`.
pub fn exponential_quantile(lambda: f64, u: f64) -> f64 {
    -lambda * (1.0 - u).ln()
}

/// `n` draws with mean `lambda`, reproducible per seed.
pub fn sample_exponential(lambda: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("exponential scale {lambda}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            // u in [0, 1); u = 0 would give exactly 0, which is not positive
            let mut u: f64 = rng.gen();
            while u == 0.0 {
                u = rng.gen();
            }
            exponential_quantile(lambda, u)
        })
        .collect())
}
