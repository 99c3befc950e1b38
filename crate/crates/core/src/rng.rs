//! Portable counter-based random streams.
//!
//! Generator: SplitMix64 in counter mode. With `mix` the SplitMix64
//! finalizer and `G = 0x9E3779B97F4A7C15`,
//!
//! ```text
//! key   = mix(master_seed ^ mix(stream_index * G + 0xD1B54A32D192ED03))
//! x[n]  = mix(key + (n + 1) * G)          (wrapping u64 arithmetic)
//! ```
//!
//! so the n-th draw of a stream is a pure function of
//! `(master_seed, stream_index, n)`. Bounded integers use Lemire's
//! multiply-and-reject method, which is unbiased.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    master_seed: u64,
    stream_index: u64,
    key: u64,
    counter: u64,
}

/// Identifies a stream; stored with every generated record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeededRng {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let key = mix64(master_seed ^ mix64(stream_index.wrapping_mul(GOLDEN).wrapping_add(STREAM_SALT)));
        SeededRng {
            master_seed,
            stream_index,
            key,
            counter: 0,
        }
    }

    pub fn seed_info(&self) -> SeedInfo {
        SeedInfo {
            master_seed: self.master_seed,
            stream_index: self.stream_index,
        }
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform integer in `0..bound`. Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi, "empty range");
        lo + self.below((hi - lo) as u64 + 1) as usize
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// `k` distinct indices from `0..n`, uniformly, in draw order.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} distinct from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
