//! Differential-privacy primitives: Laplace noise for counts and the
//! exponential mechanism for discrete sampling, over seedable random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Per-mechanism privacy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(PrivacyParams { epsilon })
    }
}

/// Seedable random stream. Identical `(seed, stream)` pairs reproduce the
/// exact draw sequence; distinct streams derived from one seed are independent.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { seed, stream, rng }
    }

    /// New independent stream sharing this source's seed.
    pub fn derive(&self, stream: u64) -> Self {
        RandomSource::new(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn uniform_f64(&mut self) -> f64 {
        self.rng.gen()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// One draw from Laplace(0, 1/epsilon), via inverse CDF of a uniform draw.
pub fn laplace_sample(epsilon: f64, rng: &mut RandomSource) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let scale = 1.0 / epsilon;
    // u uniform in (-0.5, 0.5)
    let u = rng.uniform_open() - 0.5;
    Ok(-scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// Element-wise `counts + i.i.d. Laplace(0, 1/epsilon)`. Outputs may be negative.
pub fn noise_counts(counts: &[u64], epsilon: f64, rng: &mut RandomSource) -> Result<Vec<f64>> {
    counts
        .iter()
        .map(|&c| Ok(c as f64 + laplace_sample(epsilon, rng)?))
        .collect()
}

/// Exponential mechanism over a discrete candidate set with a uniform prior:
/// returns index `i` with probability `exp(eps * score_i) / sum_j exp(eps * score_j)`.
///
/// `epsilon = 0` degenerates to a uniform draw. Weights are max-shifted before
/// exponentiation so large score ranges stay finite.
pub fn exponential_sample(scores: &[f64], epsilon: f64, rng: &mut RandomSource) -> Result<usize> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let weights = exponential_weights(scores, epsilon)?;
    Ok(sample_from_weights(&weights, rng))
}

/// Unnormalized max-shifted weights `exp(eps * (score_i - max))`.
pub fn exponential_weights(scores: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut max = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteScore(i));
        }
        max = max.max(s);
    }
    Ok(scores.iter().map(|&s| (epsilon * (s - max)).exp()).collect())
}

/// Cumulative inverse sampling over non-negative weights with at least one
/// positive entry.
pub fn sample_from_weights(weights: &[f64], rng: &mut RandomSource) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.uniform_f64() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}
