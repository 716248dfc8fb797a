use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("standard deviation must be non-negative and finite, got {0}")]
pub struct NegativeSigma(pub f64);

/// One step of the splitmix64 sequence: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `index`-th child seed of `seed` (splitmix64 stream position `index + 1`).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed;
    let mut out = 0;
    for _ in 0..=index {
        out = splitmix64(&mut state);
    }
    out
}

/// xoshiro256** generator seeded through splitmix64.
///
/// The output stream depends only on the seed and the sequence of calls,
/// so results are bit-identical on every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    state: [u64; 4],
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [splitmix64(&mut sm), splitmix64(&mut sm), splitmix64(&mut sm), splitmix64(&mut sm)];
        SeededRng { state, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Normal sample via the Box–Muller transform of two uniforms (cosine branch).
    pub fn next_gaussian(&mut self, mu: f64, sigma: f64) -> Result<f64, NegativeSigma> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(NegativeSigma(sigma));
        }
        // Both uniforms are always drawn so the stream position does not depend on sigma.
        let u1 = 1.0 - self.next_uniform();
        let u2 = self.next_uniform();
        if sigma == 0.0 {
            return Ok(mu);
        }
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        Ok(mu + sigma * radius * libm::cos(std::f64::consts::TAU * u2))
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 from the reference implementation.
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(derive_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn xoshiro_reference_values() {
        // State {1, 2, 3, 4} gives 11520, 0, 1509978240, 1215971899390074240.
        let mut rng = SeededRng { state: [1, 2, 3, 4], seed: 0 };
        assert_eq!(rng.next_u64(), 11520);
        assert_eq!(rng.next_u64(), 0);
        assert_eq!(rng.next_u64(), 1509978240);
        assert_eq!(rng.next_u64(), 1215971899390074240);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..10_000 {
            let (x, y) = (a.next_uniform(), b.next_uniform());
            assert_eq!(x.to_bits(), y.to_bits());
            assert!((0.0..1.0).contains(&x));
        }
        assert_ne!(SeededRng::new(1).next_u64(), SeededRng::new(2).next_u64());
    }

    #[test]
    fn uniform_mean() {
        let mut rng = SeededRng::new(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.next_uniform()).sum::<f64>() / n as f64;
        // 4 * (1/sqrt(12)) / sqrt(1e6) ~= 0.00115
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn gaussian_zero_sigma_and_errors() {
        let mut rng = SeededRng::new(3);
        assert_eq!(rng.next_gaussian(12.5, 0.0), Ok(12.5));
        assert_eq!(rng.next_gaussian(0.0, -1.0), Err(NegativeSigma(-1.0)));
        assert!(rng.next_gaussian(0.0, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = SeededRng::new(11);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.next_gaussian(0.0, 50.0).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!((var - 2500.0).abs() < 0.02 * 2500.0, "variance {var}");
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut rng = SeededRng::new(5);
        let mut v: Vec<u32> = (0..256).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..256).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    fn next_below_in_range() {
        let mut rng = SeededRng::new(9);
        for bound in [1u64, 2, 3, 7, 255, 1 << 40] {
            for _ in 0..100 {
                assert!(rng.next_below(bound) < bound);
            }
        }
    }
}
