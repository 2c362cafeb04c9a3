//! Deterministic random number generation.
//!
//! Everything seeded in this crate flows through two primitives built on the
//! SplitMix64 finalizer: a counter-based generator ([`CounterRng`]) whose
//! output depends only on `(key, index)`, so parallel matrix generation is
//! order-independent, and a sequential stream ([`StreamRng`]) for shuffles
//! and weighted draws.

const PHI64: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into one seed. Position-dependent so that
/// `mix(&[a, b]) != mix(&[b, a])` in general.
pub fn mix(parts: &[u64]) -> u64 {
    let mut s: u64 = 0x243F_6A88_85A3_08D3; // pi fraction, arbitrary fixed init
    for (i, &p) in parts.iter().enumerate() {
        s = mix64(s ^ p.wrapping_add(PHI64.wrapping_mul(i as u64 + 1)));
    }
    mix64(s)
}

#[inline]
fn to_unit_open(x: u64) -> f64 {
    // 53 random bits -> [0, 1)
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based generator: the value at `index` is a pure function of
/// `(key, index)`.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key }
    }

    #[inline]
    pub fn u64_at(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(PHI64.wrapping_mul(index.wrapping_add(1))))
    }

    /// Uniform draw in [0, 1) at `index`.
    #[inline]
    pub fn uniform_at(&self, index: u64) -> f64 {
        to_unit_open(self.u64_at(index))
    }

    /// Standard normal draw at `index`, via Box-Muller on two sub-draws.
    #[inline]
    pub fn normal_at(&self, index: u64) -> f64 {
        let a = self.u64_at(2 * index);
        let b = self.u64_at(2 * index + 1);
        // u1 in (0, 1] so the log is finite
        let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = to_unit_open(b);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Sequential splitmix stream.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        StreamRng { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(PHI64);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        to_unit_open(self.next_u64())
    }

    /// Uniform integer in 0..n (n > 0), via the multiply-shift trick.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_is_order_independent() {
        let rng = CounterRng::new(42);
        let forward: Vec<f64> = (0..100).map(|i| rng.normal_at(i)).collect();
        let backward: Vec<f64> = (0..100).rev().map(|i| rng.normal_at(i)).collect();
        let backward: Vec<f64> = backward.into_iter().rev().collect();
        assert_eq!(forward, backward);
    }

    #[test]
    fn mix_is_position_dependent() {
        assert_ne!(mix(&[1, 2]), mix(&[2, 1]));
        assert_ne!(mix(&[0]), mix(&[0, 0]));
    }

    #[test]
    fn normals_have_sane_moments() {
        let rng = CounterRng::new(7);
        let n = 200_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let x = rng.normal_at(i);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = StreamRng::new(3);
        let mut xs: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(xs, (0..50).collect::<Vec<_>>());
    }
}
