//! Deterministic counter-based random number generation.
//!
//! Every value is a pure function of `(key, counter)`, so sampling can be
//! split into substreams keyed by block or pixel index and the result never
//! depends on traversal order or thread count. The mixer is the SplitMix64
//! finalizer, which gives O(1) random access into each stream.

#[allow(unused_imports)]
use num_traits::Float; // float math without std

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an unrelated seed for a named purpose, so independent
/// components can share one root seed without stream collisions.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    mix(mix(seed.wrapping_add(GOLDEN)) ^ purpose.wrapping_mul(GOLDEN))
}

/// Counter-based generator: a key plus a position in the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream derived from a root seed.
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed.wrapping_add(GOLDEN)),
            counter: 0,
        }
    }

    /// Independent substream of `seed` identified by `stream`.
    ///
    /// Two rounds of mixing keep substreams decorrelated even for
    /// consecutive stream ids.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let k = mix(seed.wrapping_add(GOLDEN)) ^ mix(stream.wrapping_mul(GOLDEN) ^ 0x6A09_E667_F3BC_C909);
        Self {
            key: mix(k),
            counter: 0,
        }
    }

    /// Fresh stream derived from this one, identified by `tag`. Children
    /// with distinct tags are mutually independent and independent of the
    /// parent's own draws.
    pub fn child(&self, tag: u64) -> Self {
        Self::substream(self.key, tag)
    }

    /// Value at an absolute position, independent of the current counter.
    #[inline]
    pub fn at(&self, counter: u64) -> u64 {
        mix(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform [0, 1) value at an absolute position.
    #[inline]
    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform (0, 1) value at an absolute position.
    #[inline]
    pub fn f64_open_at(&self, counter: u64) -> f64 {
        ((self.at(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential(1) value at an absolute position (one draw per counter).
    ///
    /// Streams sampled by absolute position must stick to one access
    /// pattern; do not mix with the paired accessors below.
    #[inline]
    pub fn exp1_at(&self, counter: u64) -> f64 {
        -(1.0 - self.f64_open_at(counter)).ln()
    }

    /// Standard normal pair at an absolute position (consumes counters
    /// 2i and 2i + 1).
    #[inline]
    pub fn normal_pair_at(&self, i: u64) -> (f64, f64) {
        let u1 = self.f64_open_at(2 * i);
        let u2 = self.f64_at(2 * i + 1);
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * core::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in the open interval (0, 1).
    ///
    /// The half-bit offset keeps downstream logs finite: both u and 1 - u
    /// stay strictly positive.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential(1) draw by inverse CDF, -log(1 - u).
    ///
    /// Strictly positive and finite by construction.
    #[inline]
    pub fn next_exp1(&mut self) -> f64 {
        let u = self.next_f64_open();
        -(1.0 - u).ln()
    }

    /// Pair of independent standard normal draws (Box-Muller).
    #[inline]
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * core::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Single standard normal draw. Consumes two uniforms.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.next_normal_pair().0
    }

    /// Uniform draw in [-limit, limit).
    #[inline]
    pub fn next_symmetric(&mut self, limit: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * limit
    }

    /// Uniform index in [0, n).
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for n << 2^64.
        (self.next_u64() % n as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}
