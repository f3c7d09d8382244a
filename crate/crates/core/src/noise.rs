//! Seeded randomness. Every variate used by the mechanisms and the harness is
//! drawn from a [`NoiseStream`].

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for trial `index` of a simulation seeded with `seed`.
///
/// Parallel runners derive one stream per trial from this, so results do not
/// depend on how trials are scheduled.
#[inline]
pub fn split_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Clone, Debug)]
enum Source {
    Seeded(Box<ChaCha12Rng>),
    /// Returns the distribution median for every draw.
    Median,
    /// Cycles through fixed uniforms; test fixtures only.
    Scripted {
        values: Vec<f64>,
        pos: usize,
    },
}

/// Single-owner source of uniform variates on the open interval `(0, 1)`.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    source: Source,
    seed: Option<u64>,
    draws: u64,
}

impl NoiseStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            source: Source::Seeded(Box::new(ChaCha12Rng::seed_from_u64(seed))),
            seed: Some(seed),
            draws: 0,
        }
    }

    /// Stream for trial `index` of a run seeded with `seed`.
    pub fn for_trial(seed: u64, index: u64) -> Self {
        Self::from_seed(split_seed(seed, index))
    }

    /// Degenerate stream whose every uniform is 1/2, so Laplace noise is
    /// exactly zero. Used for deterministic tests; the CLI refuses it in
    /// privacy-bearing commands.
    pub fn zero_noise() -> Self {
        Self {
            source: Source::Median,
            seed: None,
            draws: 0,
        }
    }

    /// Replays `values` cyclically. Each value must lie in `(0, 1)`.
    pub fn scripted(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        for &value in &values {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Domain {
                    name: "scripted uniform",
                    value,
                    range: "(0, 1)",
                });
            }
        }
        Ok(Self {
            source: Source::Scripted { values, pos: 0 },
            seed: None,
            draws: 0,
        })
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_zero_noise(&self) -> bool {
        matches!(self.source, Source::Median)
    }

    /// Number of uniforms drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform variate strictly inside `(0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        self.draws += 1;
        match &mut self.source {
            // 52 random bits centred in their bucket. The sum is exact in
            // 53 bits, so the result is never 0 or 1.
            Source::Seeded(rng) => {
                ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
            }
            Source::Median => 0.5,
            Source::Scripted { values, pos } => {
                let u = values[*pos];
                *pos = (*pos + 1) % values.len();
                u
            }
        }
    }

    /// Unit-rate exponential variate, `-ln U`.
    #[inline]
    pub fn next_exponential(&mut self) -> f64 {
        -libm::log(self.next_uniform())
    }

    /// Laplace variate with scale `lambda`; `lambda == 0` yields exactly 0.
    #[inline]
    pub(crate) fn laplace(&mut self, lambda: f64) -> f64 {
        let u = self.next_uniform();
        laplace_quantile(u, lambda)
    }
}

/// Inverse CDF of `Lap(lambda)` at `u`.
#[inline]
pub fn laplace_quantile(u: f64, lambda: f64) -> f64 {
    let centred = u - 0.5;
    if centred == 0.0 || lambda == 0.0 {
        return 0.0;
    }
    // -sign(u - 1/2) * lambda * ln(1 - 2|u - 1/2|)
    let magnitude = -lambda * libm::log1p(-2.0 * centred.abs());
    if centred > 0.0 {
        magnitude
    } else {
        -magnitude
    }
}
