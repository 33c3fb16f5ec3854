//! Deterministic pseudo-random generator used everywhere a seed appears.
//!
//! The exact construction is part of the file-format contract: a hash model
//! is stored as `(dim, bits, seed)` only, and any reader must be able to
//! regenerate the identical hyperplanes. The construction is:
//!
//! 1. The 64-bit seed initializes a splitmix64 sequence; its first four
//!    outputs become the xoshiro256++ state, in order.
//! 2. Uniform doubles are `(word >> 11) as f64 * 2^-53`, one word each.
//! 3. Normal doubles come from the Box-Muller transform on word pairs:
//!    `u1 = ((w1 >> 11) + 1) * 2^-53` (in `(0, 1]`, so the log is finite),
//!    `u2 = (w2 >> 11) * 2^-53`, then
//!    `z0 = sqrt(-2 ln u1) cos(2 pi u2)` and `z1 = sqrt(-2 ln u1) sin(2 pi u2)`.
//!    `z0` is returned first; `z1` is cached and returned before the next
//!    pair is drawn.

const TWO_POW_NEG53: f64 = 1.0 / (1u64 << 53) as f64;

/// splitmix64, used only to expand a seed into xoshiro256++ state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256++ word generator with splitmix64 seeding.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    cached_normal: Option<f64>,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self {
            s,
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG53
    }

    /// Standard normal draw. Consumes two words per Box-Muller pair; the
    /// second value of a pair is cached, so draws alternate between
    /// generating a pair and draining the cache.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG53;
        let u2 = (self.next_u64() >> 11) as f64 * TWO_POW_NEG53;
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * phi.sin());
        r * phi.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_normal();
        }
    }
}
