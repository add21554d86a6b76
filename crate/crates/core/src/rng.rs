//! SplitMix64 and the handful of derived draws used for episode sampling and
//! synthetic banks.
//!
//! Every draw is defined in terms of `next_u64` so that any other language can
//! reproduce episodes bit-for-bit:
//!
//! ```text
//! next_u64:   state += 0x9E3779B97F4A7C15; return mix(state)
//! mix(z):     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!             z ^ (z >> 31)                       (wrapping arithmetic)
//! next_f64:   (next_u64 >> 11) * 2^-53            in [0, 1)
//! below(n):   t = (2^64 - n) mod n; draw x until x >= t; return x mod n
//! normal:     u1 = 1 - next_f64; u2 = next_f64
//!             sqrt(-2 ln u1) * cos(2 pi u2)       (one draw per pair)
//! stream(seed, i): SplitMix64 seeded with mix(seed + mix(i + 0x9E3779B97F4A7C15))
//! ```

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent generator for sub-stream `index` of `seed`. Used to give
    /// each episode its own generator so episodes can run in any order.
    pub fn stream(seed: u64, index: u64) -> Self {
        Self::new(mix(seed.wrapping_add(mix(index.wrapping_add(GOLDEN)))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Partial Fisher-Yates: the first `k` entries of `items` become a uniform
    /// sample without replacement, in draw order.
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        for i in 0..k.min(n) {
            let j = i + self.below((n - i) as u64) as usize;
            items.swap(i, j);
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let n = items.len();
        self.partial_shuffle(items, n);
    }
}
