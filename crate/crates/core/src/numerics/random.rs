//! Seeded randomness.
//!
//! Every stochastic operation takes an explicit [`SeededRng`]. The generator is
//! ChaCha8 (`rand_chacha`), seeded from a 64-bit value. Independent consumers
//! (weight init, shuffling, negative labels, mining draws) each get their own
//! ChaCha stream of the same seed, so adding draws to one never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

pub type SeededRng = ChaCha8Rng;

/// Stream identifiers for [`stream_rng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Init = 1,
    Shuffle = 2,
    NegativeLabels = 3,
    Mining = 4,
}

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: RngStream) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Kaiming-normal weights for a ReLU layer, shape `(fan_out, fan_in)`,
/// standard deviation `sqrt(2 / fan_in)`.
pub fn kaiming_init<T: Real>(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Result<Matrix<T>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Dimension {
            op: "kaiming_init",
            left: (fan_out, fan_in),
            right: (1, 1),
        });
    }
    let std = (2.0 / fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::from_f64_lossy(z * std)
        })
        .collect();
    Matrix::from_vec(fan_out, fan_in, data)
}
