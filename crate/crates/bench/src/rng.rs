//! SplitMix64 and Box-Muller normals.
//!
//! SplitMix64 is counter based: the `k`-th output is `mix(seed + k * GAMMA)`, so a
//! stream is fully determined by its seed and is trivial to reproduce in another
//! language. Normals are produced in pairs by the Box-Muller transform
//! `sqrt(-2 ln u1) (cos 2 pi u2, sin 2 pi u2)` with `u1` in `(0, 1]`, `u2` in `[0, 1)`.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        (r * t.cos(), r * t.sin())
    }

    /// Standard normal; consumes a Box-Muller pair every second call.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = self.normal_pair();
        self.spare = Some(b);
        a
    }
}

/// Seed of trial `trial` in a sweep seeded with `seed`. Independent of eta and budget.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    mix(seed ^ mix(trial.wrapping_add(1).wrapping_mul(GAMMA)))
}
