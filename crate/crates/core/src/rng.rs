//! SplitMix64, the reproducible generator behind every rollout.
//!
//! State update and output, all arithmetic modulo 2^64:
//!
//! ```text
//! s  ← s + 0x9E3779B97F4A7C15
//! z  ← (s ⊕ (s >> 30)) · 0xBF58476D1CE4E5B9
//! z  ← (z ⊕ (z >> 27)) · 0x94D049BB133111EB
//! out = z ⊕ (z >> 31)
//! ```
//!
//! Uniform doubles take the top 53 bits: `(out >> 11) · 2^-53 ∈ [0, 1)`.
//! The generator is small enough to port bit-for-bit to any language.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: RngSeed) -> Self {
        Self { state: seed.0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Index drawn from a probability vector by inverse CDF.
    pub fn sample_index(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Round-off can leave acc slightly below 1; fall back to the last
        // action with positive mass.
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_outputs_for_seed_zero() {
        // Published first outputs of SplitMix64 seeded with 0.
        let mut rng = SplitMix64::new(RngSeed(0));
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn uniform_range_and_degenerate_sampling() {
        let mut rng = SplitMix64::new(RngSeed(42));
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
        for _ in 0..100 {
            assert_eq!(rng.sample_index(&[0.0, 1.0, 0.0]), 1);
            assert_eq!(rng.sample_index(&[0.0, 0.0, 1.0]), 2);
        }
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = SplitMix64::new(RngSeed(7));
        let probs = [0.2, 0.5, 0.3];
        let mut counts = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            counts[rng.sample_index(&probs)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let freq = *c as f64 / n as f64;
            // 5 standard errors.
            assert!((freq - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }
}
