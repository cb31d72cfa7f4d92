//! Reproducible per-trace random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! stream index selecting ChaCha's 64-bit stream id. `stream(m, i)` is a
//! pure function of `(m, i)` and distinct indices never share keystream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }
}

pub fn rng_stream(master_seed: u64, stream_index: u64) -> RngStream {
    RngStream::new(master_seed, stream_index)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(seed: u64, idx: u64, n: usize) -> Vec<f64> {
        let mut rng = rng_stream(seed, idx);
        (0..n).map(|_| rng.gen::<f64>()).collect()
    }

    #[test]
    fn same_key_same_sequence() {
        assert_eq!(draws(42, 0, 100), draws(42, 0, 100));
    }

    #[test]
    fn different_index_different_sequence() {
        assert_ne!(draws(42, 0, 100), draws(42, 1, 100));
    }

    #[test]
    fn uniform_mean_is_centered() {
        let xs = draws(42, 7, 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma).powi(2);
            vb += (y - mb).powi(2);
        }
        cov / (va * vb).sqrt()
    }

    #[test]
    fn streams_are_uncorrelated() {
        let streams: Vec<_> = (0..8).map(|i| draws(42, i, 10_000)).collect();
        for i in 0..streams.len() {
            for j in i + 1..streams.len() {
                let rho = correlation(&streams[i], &streams[j]);
                assert!(rho.abs() < 0.05, "streams {i},{j}: rho = {rho}");
            }
        }
    }
}
