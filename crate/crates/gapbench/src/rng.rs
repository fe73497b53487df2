//! Counter-based pseudo-random generator with keyed substreams.
//!
//! The whole harness draws randomness from SplitMix64 run in counter mode:
//! output `i` of a stream is the SplitMix64 finalizer applied to
//! `key + (i+1) * GOLDEN`. Streams are identified by a key derived from the
//! master seed and an arbitrary list of stream labels, so any component can
//! carve out an independent substream (per split, per trial, per purpose)
//! without sharing mutable state. Identical (seed, labels) always reproduce
//! the identical sequence, independent of scheduling or iteration order.

/// 2^64 / golden ratio, the Weyl increment used by SplitMix64.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream key from a master seed and a list of labels.
pub fn derive_key(master_seed: u64, labels: &[u64]) -> u64 {
    let mut key = mix(master_seed.wrapping_add(GOLDEN));
    for &label in labels {
        key = mix(key ^ mix(label.wrapping_add(GOLDEN)));
    }
    key
}

/// A single deterministic stream. Cloning forks the exact position.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(master_seed: u64, labels: &[u64]) -> Self {
        CounterRng {
            key: derive_key(master_seed, labels),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Uses Lemire's multiply-shift rejection, so
    /// the draw is exactly uniform.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is undefined");
        let n = n as u64;
        loop {
            let x = self.next_u64();
            let m = (x as u128).wrapping_mul(n as u128);
            let low = m as u64;
            if low >= n.wrapping_neg() % n {
                return (m >> 64) as usize;
            }
        }
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Log-uniform in [lo, hi); both bounds must be positive.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo > 0.0 && hi > lo);
        (self.uniform(lo.ln(), hi.ln())).exp()
    }

    /// Choose `k` distinct indices from `0..n`, in draw order
    /// (partial Fisher-Yates over an index table).
    pub fn choose_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot choose {k} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = CounterRng::new(42, &[1, 2]);
        let mut b = CounterRng::new(42, &[1, 2]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_labels_diverge() {
        let mut a = CounterRng::new(42, &[1]);
        let mut b = CounterRng::new(42, &[2]);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut rng = CounterRng::new(7, &[]);
        let mut seen = [false; 5];
        for _ in 0..200 {
            let v = rng.below(5);
            assert!(v < 5);
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn choose_indices_distinct() {
        let mut rng = CounterRng::new(3, &[9]);
        let picked = rng.choose_indices(100, 40);
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 40);
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut rng = CounterRng::new(11, &[4]);
        for _ in 0..1000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }
}
