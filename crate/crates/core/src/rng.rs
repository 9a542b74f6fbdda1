//! Seeded random stream shared by the generators and the samplers.
//!
//! The generator is xoshiro256++ with its 256-bit state filled from the
//! 64-bit seed by SplitMix64 (`Xoshiro256PlusPlus::seed_from_u64`). All
//! derived draws are defined on raw `u64` outputs so that streams can be
//! reproduced bit-exactly elsewhere:
//!
//! * `below(n)` is `next_u64() % n`;
//! * `unit()` is `(hi * 2^64 + lo) / 2^128` with `hi` drawn before `lo`;
//! * `bernoulli(p)` draws one `u64` and succeeds iff `u / 2^64 < p`.

use num_bigint::BigInt;
use num_traits::{One, Signed};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.next_u64() % n
    }

    /// Uniform rational in `[0, 1)` from 128 random bits.
    pub fn unit(&mut self) -> Rational {
        let hi = self.next_u64() as u128;
        let lo = self.next_u64() as u128;
        let bits = (hi << 64) | lo;
        Rational::new(BigInt::from(bits), BigInt::one() << 128)
    }

    pub fn bernoulli(&mut self, p: &Rational) -> bool {
        if !p.is_positive() {
            // still consume a draw so streams stay aligned
            self.next_u64();
            return false;
        }
        let u = BigInt::from(self.next_u64());
        // u / 2^64 < num / den  <=>  u * den < num * 2^64
        u * p.denom() < p.numer() * (BigInt::one() << 64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    #[test]
    fn known_outputs() {
        let mut s = Stream::new(42);
        let xs: Vec<u64> = (0..3).map(|_| s.next_u64()).collect();
        assert_eq!(xs, [15021278609987233951, 5881210131331364753, 18149643915985481100]);
    }

    #[test]
    fn streams_are_reproducible() {
        let mut a = Stream::new(42);
        let mut b = Stream::new(42);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let mut c = Stream::new(43);
        assert_ne!(xs[0], c.next_u64());
    }

    #[test]
    fn unit_is_in_range() {
        let mut s = Stream::new(7);
        for _ in 0..100 {
            let u = s.unit();
            assert!(u >= int(0) && u < int(1));
        }
    }

    #[test]
    fn bernoulli_extremes() {
        let mut s = Stream::new(1);
        assert!((0..50).all(|_| s.bernoulli(&int(1))));
        assert!((0..50).all(|_| !s.bernoulli(&int(0))));
        let hits = (0..4000).filter(|_| s.bernoulli(&frac(1, 4))).count();
        assert!((850..1150).contains(&hits), "{hits}");
    }
}
