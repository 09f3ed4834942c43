//! Seeded random streams.
//!
//! Every random draw in the engine comes from a ChaCha8 generator keyed by
//! `(root seed, chain, particle, time)`. A stream is a pure function of that
//! key, so results do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// Root of a family of streams. `fork` derives an independent family for a
/// sub-computation (an MH step, a θ-particle, a resampling pass...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    root: u64,
    chain: u64,
}

/// Reserved particle index for streams that belong to no particle.
pub const SHARED: u64 = u64::MAX;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(root: u64) -> Seed {
        Seed { root, chain: 0 }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// A new family identified by `tag` within this one.
    pub fn fork(self, tag: u64) -> Seed {
        Seed {
            root: self.root,
            chain: splitmix(self.chain ^ splitmix(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// The stream for `(particle, time)` in this family.
    pub fn stream(self, particle: u64, time: u64) -> RngStream {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.root.to_le_bytes());
        key[8..16].copy_from_slice(&self.chain.to_le_bytes());
        key[16..24].copy_from_slice(&particle.to_le_bytes());
        key[24..32].copy_from_slice(&time.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_pure_and_distinct() {
        let s = Seed::new(42);
        let mut x = s.stream(3, 7);
        let mut y = s.stream(3, 7);
        assert_eq!(x.next_u64(), y.next_u64());
        let firsts = [
            s.stream(3, 8).next_u64(),
            s.stream(4, 7).next_u64(),
            s.fork(1).stream(3, 7).next_u64(),
            Seed::new(43).stream(3, 7).next_u64(),
            s.stream(3, 7).next_u64(),
        ];
        for i in 0..firsts.len() {
            for j in 0..i {
                assert_ne!(firsts[i], firsts[j]);
            }
        }
        assert_ne!(s.fork(1), s.fork(2));
        assert_ne!(s.fork(1).fork(2), s.fork(2).fork(1));
    }
}
