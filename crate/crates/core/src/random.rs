//! Seedable random source shared by every stochastic method.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Identifier of the generator algorithm, embedded in run metadata.
pub const GENERATOR_ID: &str = "xoshiro256++/rand_xoshiro-0.7";

/// A reproducible random stream.
///
/// Backed by xoshiro256++, seeded through SplitMix64. Its output is defined
/// on 64-bit integers only, so identical seeds give identical streams on
/// every platform.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: Xoshiro256PlusPlus,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sub-stream for worker or chain `index` (seed XOR index).
    pub fn split(&self, index: u64) -> Self {
        Self::new(self.seed ^ index)
    }
}

impl RngCore for RandomSource {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_million_draws() {
        let mut a = RandomSource::new(12345);
        let mut b = RandomSource::new(12345);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = RandomSource::new(1);
        let mut b = RandomSource::new(2);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn split_is_seed_xor_index() {
        let base = RandomSource::new(0b1010);
        assert_eq!(base.split(3).seed(), 0b1001);
        let mut s = base.split(3);
        let mut direct = RandomSource::new(0b1001);
        assert_eq!(s.random::<f64>(), direct.random::<f64>());
    }

    // Guards the cross-platform claim: a fixed seed must produce this exact prefix.
    const PINNED: [u64; 3] = [5987356902031041503, 7051070477665621255, 6633766593972829180];

    #[test]
    fn stream_is_pinned() {
        let mut a = RandomSource::new(0);
        let prefix: Vec<u64> = (0..3).map(|_| a.next_u64()).collect();
        assert_eq!(prefix, PINNED);
    }
}
