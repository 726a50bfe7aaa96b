//! Seeded synthetic datasets.
//!
//! Every generator draws from [`rng_from_seed`], a ChaCha8 stream keyed by a
//! 64-bit seed, so output depends only on the arguments.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Range the Gaussian-mixture cluster centers are drawn from, per dimension.
pub const MIXTURE_CENTER_RANGE: (f64, f64) = (-10.0, 10.0);

/// The seedable generator used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points with i.i.d. uniform coordinates in `[lo, hi)`.
pub fn generate_uniform(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("point count and dimensionality must be positive"));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::invalid(format!("empty or non-finite range [{lo}, {hi})")));
    }
    let mut rng = rng_from_seed(seed);
    let dist = Uniform::new(lo, hi);
    let coords = (0..n * d).map(|_| dist.sample(&mut rng)).collect();
    Dataset::new(d, coords)
}

/// `n` points around `k` uniformly placed centers, assigned round-robin
/// (point `i` belongs to cluster `i % k`), with isotropic Gaussian noise of
/// standard deviation `spread`.
pub fn generate_gaussian_mixture(n: usize, d: usize, k: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 || k == 0 {
        return Err(Error::invalid("point count, dimensionality and cluster count must be positive"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} clusters requested for {n} points")));
    }
    if !spread.is_finite() || spread <= 0.0 {
        return Err(Error::invalid(format!("spread must be positive, got {spread}")));
    }
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = MIXTURE_CENTER_RANGE;
    let uniform = Uniform::new(lo, hi);
    let centers: Vec<f64> = (0..k * d).map(|_| uniform.sample(&mut rng)).collect();
    let noise = Normal::new(0.0, spread).map_err(|e| Error::invalid(e.to_string()))?;
    let mut coords = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = &centers[(i % k) * d..(i % k + 1) * d];
        coords.extend(c.iter().map(|&x| x + noise.sample(&mut rng)));
    }
    Dataset::new(d, coords)
}
