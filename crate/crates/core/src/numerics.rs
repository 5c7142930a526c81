//! Transforms and random-number plumbing.
//!
//! The transform pair used throughout the library puts the `1/N` factor on
//! the *forward* DFT and none on the inverse:
//!
//! ```text
//! F(k) = (1/N) sum_n f(n) e^(-j 2 pi k n / N)
//! f(n) =       sum_k F(k) e^(+j 2 pi k n / N)
//! ```
//!
//! Every module in this crate assumes this scaling; the ICI kernel in
//! [`crate::analysis`] in particular only holds under it. Do not swap in a
//! differently normalized transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, SimError};

/// One complex baseband sample.
pub type ComplexSample = Complex64;

/// A block of time-domain samples.
///
/// `sample_index_origin` is the global index of the first sample, carried so
/// that carrier-frequency-offset rotation stays phase-continuous when a
/// stream is processed symbol by symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<ComplexSample>,
    pub sample_index_origin: u64,
}

impl TimeSignal {
    pub fn new(samples: Vec<ComplexSample>) -> Self {
        TimeSignal {
            samples,
            sample_index_origin: 0,
        }
    }

    pub fn with_origin(samples: Vec<ComplexSample>, sample_index_origin: u64) -> Self {
        TimeSignal {
            samples,
            sample_index_origin,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|x(n)|^2`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// A block of frequency-domain symbols, one per subcarrier bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<ComplexSample>,
}

impl Spectrum {
    pub fn new(bins: Vec<ComplexSample>) -> Self {
        Spectrum { bins }
    }

    pub fn zeros(n: usize) -> Self {
        Spectrum {
            bins: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Forward DFT by direct summation, `F(k) = (1/N) sum_n f(n) e^(-j2pi kn/N)`.
pub fn dft(f: &TimeSignal) -> Result<Spectrum> {
    if f.is_empty() {
        return Err(SimError::invalid("dft: input signal is empty"));
    }
    let n = f.len();
    let scale = 1.0 / n as f64;
    let mut bins = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, s) in f.samples.iter().enumerate() {
            let angle = -2.0 * PI * (k as f64) * (i as f64) / n as f64;
            acc += s * Complex64::from_polar(1.0, angle);
        }
        bins.push(acc * scale);
    }
    Ok(Spectrum::new(bins))
}

/// Inverse DFT by direct summation, `f(n) = sum_k F(k) e^(+j2pi kn/N)`.
/// No `1/N` factor: the pair round-trips because the forward carries it.
pub fn idft(spec: &Spectrum) -> Result<TimeSignal> {
    if spec.is_empty() {
        return Err(SimError::invalid("idft: input spectrum is empty"));
    }
    let n = spec.len();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, b) in spec.bins.iter().enumerate() {
            let angle = 2.0 * PI * (k as f64) * (i as f64) / n as f64;
            acc += b * Complex64::from_polar(1.0, angle);
        }
        samples.push(acc);
    }
    Ok(TimeSignal::new(samples))
}

fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// In-place iterative radix-2 decimation-in-time butterfly.
/// `sign` is -1 for the forward transform, +1 for the inverse.
fn fft_radix2(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    debug_assert!(is_power_of_two(n));
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let shift = (n - 1).leading_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> shift;
        if i < j {
            buf.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let step = sign * 2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = Complex64::from_polar(1.0, step * k as f64);
                let even = buf[start + k];
                let odd = w * buf[start + k + len / 2];
                buf[start + k] = even + odd;
                buf[start + k + len / 2] = even - odd;
            }
        }
        len <<= 1;
    }
}

/// Fast forward transform. Power-of-two lengths run the radix-2 path;
/// anything else falls back to [`dft`]. Same contract and scaling as `dft`.
pub fn fft(f: &TimeSignal) -> Result<Spectrum> {
    if f.is_empty() {
        return Err(SimError::invalid("fft: input signal is empty"));
    }
    let n = f.len();
    if !is_power_of_two(n) {
        return dft(f);
    }
    let mut buf = f.samples.clone();
    fft_radix2(&mut buf, -1.0);
    let scale = 1.0 / n as f64;
    for b in &mut buf {
        *b *= scale;
    }
    Ok(Spectrum::new(buf))
}

/// Fast inverse transform, fallback and scaling matching [`idft`].
pub fn ifft(spec: &Spectrum) -> Result<TimeSignal> {
    if spec.is_empty() {
        return Err(SimError::invalid("ifft: input spectrum is empty"));
    }
    let n = spec.len();
    if !is_power_of_two(n) {
        return idft(spec);
    }
    let mut buf = spec.bins.clone();
    fft_radix2(&mut buf, 1.0);
    Ok(TimeSignal::new(buf))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic random stream, addressed by `(seed, stream_id)`.
///
/// Backed by the ChaCha8 stream cipher keyed from a SplitMix64 expansion of
/// `(seed, stream_id)`, so the same pair yields a byte-identical sequence on
/// every platform. Normal variates come from the Marsaglia polar method.
/// Both choices are part of the reproducibility contract and must not change.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut state = seed ^ 0x4f61_6b52_6964_6765u64.wrapping_mul(stream_id | 1);
        let mut key = [0u8; 32];
        // Fold stream_id into the SplitMix chain twice so (seed, id) and
        // (seed', id') collisions need a full 128-bit match.
        state ^= splitmix64(&mut state).wrapping_add(stream_id);
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        RngStream {
            seed,
            stream_id,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// A fresh stream for a sub-task (trial, impairment slot) of this one.
    pub fn substream(&self, id: u64) -> RngStream {
        let mut state = self.stream_id;
        let mixed = splitmix64(&mut state) ^ id.wrapping_mul(0x2545_f491_4f6c_dd1d);
        RngStream::new(self.seed, mixed ^ id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard-normal variates (Marsaglia polar method).
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                return (u * m, v * m);
            }
        }
    }

    /// Circularly symmetric complex normal with unit total variance
    /// (each component has variance 1/2).
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let (a, b) = self.gaussian_pair();
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }
}
