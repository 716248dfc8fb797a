//! Platform-stable seeded randomness and 2D simplex noise.

mod rng;
mod simplex;

pub use rng::{derive_seed, splitmix64, NegativeSigma, SeededRng};
pub use simplex::{InvalidWavelength, SimplexField, MASK_GENERATOR_VARIANT};
