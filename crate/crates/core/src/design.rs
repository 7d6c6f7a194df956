//! Linear systematic sampling: with `N = n k`, a start `r` in `1..=k` selects
//! units `r, r+k, ..., r+(n-1)k`. Only `k` distinct samples exist, so the
//! design can be enumerated exhaustively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::population::{interval_k, Population, Unit};

/// One of the `k` possible systematic samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SystematicSample {
    /// 1-based random start.
    pub start: usize,
    pub interval_k: usize,
    pub n: usize,
    /// Selected units in population order.
    pub pairs: Vec<Unit>,
    pub mean_y_star: f64,
    pub mean_x_star: f64,
}

impl SystematicSample {
    /// 1-based population indices of the selected units.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).map(move |j| self.start + j * self.interval_k)
    }
}

/// Draws the systematic sample with the given 1-based `start`.
pub fn draw_sample(pop: &Population, n: usize, start: usize) -> Result<SystematicSample> {
    let k = interval_k(pop.size(), n)?;
    if start == 0 || start > k {
        return Err(Error::StartOutOfRange { start, interval: k });
    }
    let pairs: Vec<Unit> = pop.units()[start - 1..].iter().step_by(k).copied().collect();
    debug_assert_eq!(pairs.len(), n);
    let mean_y_star = pairs.iter().map(|u| u.y).sum::<f64>() / n as f64;
    let mean_x_star = pairs.iter().map(|u| u.x).sum::<f64>() / n as f64;
    Ok(SystematicSample {
        start,
        interval_k: k,
        n,
        pairs,
        mean_y_star,
        mean_x_star,
    })
}

/// All `k` systematic samples, ordered by start.
pub fn enumerate_samples(pop: &Population, n: usize) -> Result<Vec<SystematicSample>> {
    let k = interval_k(pop.size(), n)?;
    (1..=k).map(|start| draw_sample(pop, n, start)).collect()
}

/// Uniform random start in `1..=interval_k`.
///
/// The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`, and
/// the draw is `rand`'s unbiased integer range sampler, so a given
/// `(interval_k, seed)` always yields the same start.
///
/// # Panics
///
/// If `interval_k` is zero.
pub fn random_start(interval_k: usize, seed: u64) -> usize {
    assert!(interval_k >= 1, "interval_k must be positive");
    ChaCha8Rng::seed_from_u64(seed).random_range(1..=interval_k)
}
