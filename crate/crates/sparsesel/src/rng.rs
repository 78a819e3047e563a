//! Deterministic random numbers and hashing.
//!
//! Everything random in this crate flows through [`SplitMix64`], a tiny
//! counter-based generator with a public algorithm and no platform-dependent
//! state. Integer draws use only integer arithmetic, so sampled index sets
//! are byte-for-byte reproducible across runs and platforms for a given seed.

/// SplitMix64 generator (Steele, Lea, Flood; the `java.util.SplittableRandom`
/// finalizer). Passes BigCrush, needs one u64 of state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derives an independent stream for a named sub-task. Mixing the label
    /// through the output function keeps streams for nearby seeds disjoint.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut base = SplitMix64::new(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        base.next_u64();
        base
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by rejection, so the distribution is exact
    /// and identical on every platform. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is undefined");
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % n;
            }
        }
    }

    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller. One value per call; the cosine branch
    /// only, so the stream position advances by exactly two draws.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// First `take` elements of a seeded permutation of `0..n`, via partial
    /// Fisher-Yates. Returned order is the selection order.
    pub fn sample_indices(&mut self, n: usize, take: usize) -> Vec<usize> {
        assert!(take <= n, "cannot take {take} of {n}");
        let mut idx: Vec<usize> = (0..n).collect();
        for t in 0..take {
            let j = t + self.below((n - t) as u64) as usize;
            idx.swap(t, j);
        }
        idx.truncate(take);
        idx
    }
}

/// FNV-1a 64-bit hash, used for provenance digests in model files.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
