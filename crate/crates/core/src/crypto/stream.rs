//! Counter-mode hash stream: block `i` is `sha256(seed ‖ tag ‖ i)` with `i`
//! as 8 bytes big-endian. All simulated randomness comes from here.

use super::digest::sha256_parts;

#[derive(Debug, Clone)]
pub struct HashStream {
    seed: Vec<u8>,
    tag: Vec<u8>,
    counter: u64,
    block: [u8; 32],
    used: usize,
}

impl HashStream {
    pub fn new(seed: &[u8], tag: &[u8]) -> Self {
        Self {
            seed: seed.to_vec(),
            tag: tag.to_vec(),
            counter: 0,
            block: [0; 32],
            used: 32,
        }
    }

    pub fn from_u64(seed: u64, tag: &[u8]) -> Self {
        Self::new(&seed.to_be_bytes(), tag)
    }

    fn refill(&mut self) {
        self.block = sha256_parts(&[&self.seed, &self.tag, &self.counter.to_be_bytes()]).0;
        self.counter += 1;
        self.used = 0;
    }

    pub fn next_u64(&mut self) -> u64 {
        if self.used + 8 > 32 {
            self.refill();
        }
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.block[self.used..self.used + 8]);
        self.used += 8;
        u64::from_be_bytes(b)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        unit_from_u64(self.next_u64())
    }

    /// Uniform in `[0, n)` via a widening multiply. `n` must be positive.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Exponential deviate with the given mean.
    pub fn next_exponential(&mut self, mean: f64) -> f64 {
        exponential_from_unit(self.next_unit(), mean)
    }
}

pub fn unit_from_u64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF transform of a `[0, 1)` draw.
pub fn exponential_from_unit(u: f64, mean: f64) -> f64 {
    -mean * (1.0 - u).ln()
}
