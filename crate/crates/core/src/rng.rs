//! Seeded pseudo-random inputs for the verification suites.
//!
//! A small SplitMix64 generator keeps the suites byte-reproducible across
//! platforms and toolchain versions, which the report manifests rely on.

use crate::coeffs::VerblunskySequence;
use crate::C64;

/// SplitMix64: tiny, fast, and stable. Not cryptographic.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// One coefficient: uniform in modulus squared on `[0, max_mod^2]`,
    /// uniform phase. Stays away from the degenerate boundary `|α| = 1`.
    pub fn next_alpha(&mut self, max_mod: f64) -> C64 {
        let r = max_mod * self.next_f64().sqrt();
        let phase = 2.0 * std::f64::consts::PI * self.next_f64();
        C64::from_polar(r, phase)
    }
}

/// Random periodic sequence of raw period `p` with moduli below `0.9`.
pub fn random_periodic(p: usize, seed: u64) -> VerblunskySequence {
    random_periodic_with_max(p, seed, 0.9)
}

pub fn random_periodic_with_max(p: usize, seed: u64, max_mod: f64) -> VerblunskySequence {
    let mut rng = SplitMix64::new(seed);
    let alphas: Vec<C64> = (0..p).map(|_| rng.next_alpha(max_mod)).collect();
    VerblunskySequence::periodic(alphas).expect("random moduli are inside the disk")
}

/// Random finite sequence of length `k` (boundary slot fixed to -1).
pub fn random_finite(k: usize, seed: u64) -> VerblunskySequence {
    let mut rng = SplitMix64::new(seed);
    let mut alphas: Vec<C64> = (0..k - 1).map(|_| rng.next_alpha(0.9)).collect();
    alphas.push(C64::new(-1.0, 0.0));
    VerblunskySequence::finite(alphas).expect("boundary phase is -1")
}

/// Random truncated half-line sequence with `n_nonzero` leading entries.
pub fn random_infinite(n_nonzero: usize, seed: u64) -> VerblunskySequence {
    let mut rng = SplitMix64::new(seed);
    let alphas: Vec<C64> = (0..n_nonzero).map(|_| rng.next_alpha(0.9)).collect();
    VerblunskySequence::infinite(alphas).expect("random moduli are inside the disk")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_streams() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn alphas_stay_in_disk() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..1000 {
            assert!(rng.next_alpha(0.9).norm() <= 0.9);
        }
    }
}
