//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by
//! `(master seed, chunk index)` and selected by a stream id. Path `l` always
//! uses [`path`]`(l)`, so the path-gain processes, the noise and the inputs are
//! independent and reproducible regardless of how work is split across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const NOISE: u64 = 1;
pub const INPUT: u64 = 2;
/// Second, independent input stream (two-sided estimators).
pub const INPUT_ALT: u64 = 3;
pub const AUX: u64 = 4;
const PATH_BASE: u64 = 1 << 32;

/// Stream id of path `l`.
pub fn path(l: usize) -> u64 {
    PATH_BASE + l as u64
}

pub fn stream(seed: u64, stream: u64, chunk: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&chunk.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian with `E|Z|^2 = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Uniform phase on the unit circle.
pub fn unit_phasor<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Complex64::from_polar(1.0, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, NOISE, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| stream(7, NOISE, 3).random()).collect();
        assert_eq!(a, b);
        let x: u64 = stream(7, NOISE, 3).random();
        assert_ne!(x, stream(7, INPUT, 3).random::<u64>());
        assert_ne!(x, stream(7, NOISE, 4).random::<u64>());
        assert_ne!(x, stream(8, NOISE, 3).random::<u64>());
        assert_ne!(stream(7, path(0), 0).random::<u64>(), stream(7, path(1), 0).random::<u64>());
    }

    #[test]
    fn complex_normal_has_requested_power() {
        let mut rng = stream(1, AUX, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| complex_normal(&mut rng, 3.0).norm_sqr()).sum::<f64>() / n as f64;
        // |Z|^2 is exponential with mean 3, so sd of the mean is 3/sqrt(n)
        assert!((mean - 3.0).abs() < 4.0 * 3.0 / (n as f64).sqrt());
    }
}
