//! Gaussian noise with a prescribed spectrum, by frequency-domain shaping
//! of white noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Samples drawn per RNG stream; each chunk owns the stream `(id << 32) | chunk`.
const CHUNK: usize = 1 << 16;

/// Unit-variance white Gaussian samples from the stream family `stream_id`.
///
/// Output depends only on `(seed, stream_id, len)`, never on thread count.
pub fn white_noise(len: usize, seed: u64, stream_id: u32) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk, buf)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((u64::from(stream_id) << 32) | chunk as u64);
            for x in buf.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
        });
    out
}

/// `len` samples of stationary Gaussian noise whose two-sided density is
/// `psd(f) / sample_rate`, i.e. `psd` is relative to unit-variance white
/// noise.
///
/// White noise is filtered circularly on a power-of-two record at least
/// `discard` samples longer than requested; the leading samples are dropped.
pub fn shaped_noise(
    len: usize,
    sample_rate: f64,
    discard: usize,
    psd: impl Fn(f64) -> f64 + Sync,
    seed: u64,
    stream_id: u32,
) -> Vec<f64> {
    let total = (len + discard).next_power_of_two();
    let white = white_noise(total, seed, stream_id);
    let mut buf: Vec<Complex64> = white.into_iter().map(|x| Complex64::new(x, 0.0)).collect();

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(total).process(&mut buf);

    let df = sample_rate / total as f64;
    buf.par_iter_mut().enumerate().for_each(|(k, b)| {
        let bin = k.min(total - k);
        let gain = psd(bin as f64 * df).max(0.0).sqrt();
        *b *= gain;
    });

    planner.plan_fft_inverse(total).process(&mut buf);
    let norm = 1.0 / total as f64;
    buf[total - len..].iter().map(|c| c.re * norm).collect()
}
