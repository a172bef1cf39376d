//! Deterministic seeded primitives.
//!
//! Everything here is specified bit-exactly so that runs reproduce across
//! platforms and releases: SplitMix64 (Steele, Lea, Flood 2014) for seeded
//! streams, FNV-1a 64-bit for string hashing, and a Fisher-Yates shuffle
//! driven by them.

/// FNV-1a 64-bit offset basis.
pub const FNV_OFFSET: u64 = 0xcbf29ce484222325;
/// FNV-1a 64-bit prime.
pub const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a 64-bit hash over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// SplitMix64 generator. Small state, full 64-bit output, and a fixed
/// published update rule, which is what makes it safe to freeze in file
/// formats and acceptance tests.
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

    /// Uniform draw in `[0, n)` by modulo reduction. The modulo bias is
    /// below 2^-32 for every `n` used here and the rule is trivially
    /// portable, which matters more than the last bit of uniformity.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        self.next_u64() % n
    }

    /// Uniform f64 in [0, 1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}

/// In-place Fisher-Yates shuffle driven by the given generator.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Per-item substream seed: mixes a run seed with an item key so that the
/// draw for one item does not depend on iteration order.
pub fn substream_seed(run_seed: u64, key: &str) -> u64 {
    run_seed ^ fnv1a64(key.as_bytes())
}
