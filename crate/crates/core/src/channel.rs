//! Channel impairments: multipath FIR, carrier frequency offset, oscillator
//! phase noise and AWGN.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::numerics::{ComplexSample, RngStream, TimeSignal};

/// Static multipath profile at sample resolution. Tap 0 is the direct path;
/// the maximum excess delay in samples is `taps.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    taps: Vec<ComplexSample>,
}

impl ChannelProfile {
    pub fn new(taps: Vec<ComplexSample>) -> Result<Self> {
        if taps.is_empty() || taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(SimError::invalid(
                "ChannelProfile: taps must be non-empty and not all zero",
            ));
        }
        Ok(ChannelProfile { taps })
    }

    pub fn identity() -> Self {
        ChannelProfile {
            taps: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn taps(&self) -> &[ComplexSample] {
        &self.taps
    }

    pub fn max_excess_delay_samples(&self) -> usize {
        self.taps.len() - 1
    }
}

/// Streaming FIR channel. State (the delay line) persists across calls so a
/// symbol-by-symbol stream sees one continuous linear convolution.
/// Single-owner: one instance per stream, never shared.
#[derive(Debug, Clone)]
pub struct Multipath {
    profile: ChannelProfile,
    delay_line: Vec<ComplexSample>,
}

impl Multipath {
    pub fn new(profile: ChannelProfile) -> Self {
        let len = profile.max_excess_delay_samples();
        Multipath {
            profile,
            delay_line: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn reset(&mut self) {
        self.delay_line.fill(Complex64::new(0.0, 0.0));
    }

    /// Convolve the next block with the taps, carrying state across blocks.
    /// Output length equals input length; the tail past the stream end stays
    /// in the delay line.
    pub fn apply(&mut self, x: &TimeSignal) -> TimeSignal {
        let taps = self.profile.taps();
        let mem = self.delay_line.len();
        let mut out = Vec::with_capacity(x.len());
        for (n, &s) in x.samples.iter().enumerate() {
            let mut acc = taps[0] * s;
            for (l, &t) in taps.iter().enumerate().skip(1) {
                let past = if n >= l {
                    x.samples[n - l]
                } else {
                    // delay_line[mem-1] is the most recent past sample
                    self.delay_line[mem - (l - n)]
                };
                acc += t * past;
            }
            out.push(acc);
        }
        if mem > 0 {
            let len = x.len();
            for i in 0..mem {
                let idx = len as isize - mem as isize + i as isize;
                self.delay_line[i] = if idx >= 0 {
                    x.samples[idx as usize]
                } else {
                    self.delay_line[(idx + mem as isize) as usize]
                };
            }
        }
        TimeSignal::with_origin(out, x.sample_index_origin)
    }
}

/// One-shot multipath with zero initial state.
pub fn apply_multipath(x: &TimeSignal, profile: &ChannelProfile) -> TimeSignal {
    Multipath::new(profile.clone()).apply(x)
}

/// Carrier frequency offset: `y(n) = x(n) e^(j 2 pi eps n / N)` with `n` the
/// global sample index (`sample_index_origin` plus the local index), so the
/// rotation is phase-continuous across consecutive blocks.
pub fn apply_cfo(x: &TimeSignal, epsilon: f64, n_fft: usize) -> Result<TimeSignal> {
    if n_fft == 0 {
        return Err(SimError::invalid("apply_cfo: n_fft must be >= 1"));
    }
    let step = 2.0 * PI * epsilon / n_fft as f64;
    let samples = x
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let n_global = x.sample_index_origin as f64 + i as f64;
            s * Complex64::from_polar(1.0, step * n_global)
        })
        .collect();
    Ok(TimeSignal::with_origin(samples, x.sample_index_origin))
}

/// Wiener phase noise: `y(n) = x(n) e^(j phi(n))` with
/// `phi(n) = phi(n-1) + sigma g(n)`, `phi(-1) = 0` and `g` standard normal.
pub fn apply_phase_noise(x: &TimeSignal, sigma: f64, stream: &mut RngStream) -> Result<TimeSignal> {
    if sigma < 0.0 {
        return Err(SimError::invalid(format!(
            "apply_phase_noise: sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let mut phi = 0.0f64;
    let samples = x
        .samples
        .iter()
        .map(|s| {
            let (g, _) = stream.gaussian_pair();
            phi += sigma * g;
            s * Complex64::from_polar(1.0, phi)
        })
        .collect();
    Ok(TimeSignal::with_origin(samples, x.sample_index_origin))
}

/// Additive white Gaussian noise at the requested SNR. The noise power is
/// referenced to the *measured* average power of `x`, so the stated SNR is
/// what actually hits the receiver regardless of upstream scaling.
pub fn apply_awgn(x: &TimeSignal, snr_db: f64, stream: &mut RngStream) -> Result<TimeSignal> {
    let p = x.mean_power();
    if p == 0.0 {
        return Err(SimError::invalid("apply_awgn: input signal has zero power"));
    }
    let n0 = p / 10f64.powf(snr_db / 10.0);
    let sigma = n0.sqrt();
    let samples = x
        .samples
        .iter()
        .map(|s| s + stream.complex_gaussian() * sigma)
        .collect();
    Ok(TimeSignal::with_origin(samples, x.sample_index_origin))
}

/// Everything the channel can do to a transmitted stream, in application
/// order: multipath, CFO, phase noise, AWGN.
#[derive(Debug, Clone)]
pub struct ImpairmentConfig {
    /// Normalized CFO as a fraction of the subcarrier spacing.
    pub epsilon: f64,
    /// Wiener phase-noise increment standard deviation, radians per sample.
    pub phase_noise_sigma: f64,
    /// `None` disables the noise stage.
    pub snr_db: Option<f64>,
    /// `None` means an identity channel.
    pub profile: Option<ChannelProfile>,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        ImpairmentConfig {
            epsilon: 0.0,
            phase_noise_sigma: 0.0,
            snr_db: None,
            profile: None,
        }
    }
}

impl ImpairmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phase_noise_sigma < 0.0 {
            return Err(SimError::invalid("phase_noise_sigma must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dft, idft, Spectrum};

    fn random_signal(n: usize, stream: &mut RngStream) -> TimeSignal {
        TimeSignal::new((0..n).map(|_| stream.complex_gaussian()).collect())
    }

    #[test]
    fn identity_tap_is_identity() {
        let mut stream = RngStream::new(1, 0);
        let x = random_signal(32, &mut stream);
        let y = apply_multipath(&x, &ChannelProfile::identity());
        assert_eq!(y.samples, x.samples);
    }

    #[test]
    fn delay_tap_shifts_by_one() {
        let mut stream = RngStream::new(2, 0);
        let x = random_signal(16, &mut stream);
        let profile =
            ChannelProfile::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let y = apply_multipath(&x, &profile);
        assert_eq!(y.samples[0], Complex64::new(0.0, 0.0));
        assert_eq!(&y.samples[1..], &x.samples[..15]);
    }

    #[test]
    fn all_zero_taps_rejected() {
        assert!(ChannelProfile::new(vec![Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(ChannelProfile::new(vec![]).is_err());
    }

    #[test]
    fn streamed_blocks_match_direct_convolution() {
        let mut stream = RngStream::new(3, 0);
        let taps: Vec<Complex64> = (0..4).map(|_| stream.complex_gaussian()).collect();
        let profile = ChannelProfile::new(taps.clone()).unwrap();
        let sym1 = random_signal(24, &mut stream);
        let sym2 = random_signal(24, &mut stream);

        let mut chan = Multipath::new(profile);
        let mut streamed = chan.apply(&sym1).samples;
        streamed.extend(chan.apply(&sym2).samples);

        // direct O(N*L) linear convolution oracle over the whole stream
        let mut whole = sym1.samples.clone();
        whole.extend_from_slice(&sym2.samples);
        for (n, y) in streamed.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, &t) in taps.iter().enumerate() {
                if n >= l {
                    acc += t * whole[n - l];
                }
            }
            assert!((y - acc).norm() < 1e-12, "sample {n}");
        }
    }

    #[test]
    fn multipath_is_linear_with_reset_state() {
        let mut stream = RngStream::new(4, 0);
        let taps: Vec<Complex64> = (0..3).map(|_| stream.complex_gaussian()).collect();
        let profile = ChannelProfile::new(taps).unwrap();
        let x = random_signal(20, &mut stream);
        let z = random_signal(20, &mut stream);
        let a = Complex64::new(0.3, -1.1);
        let b = Complex64::new(-0.7, 0.2);
        let combo = TimeSignal::new(
            x.samples
                .iter()
                .zip(&z.samples)
                .map(|(xs, zs)| a * xs + b * zs)
                .collect(),
        );
        let yx = apply_multipath(&x, &profile);
        let yz = apply_multipath(&z, &profile);
        let yc = apply_multipath(&combo, &profile);
        for i in 0..20 {
            let expect = a * yx.samples[i] + b * yz.samples[i];
            assert!((yc.samples[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn cfo_zero_is_exact_identity() {
        let mut stream = RngStream::new(5, 0);
        let x = random_signal(16, &mut stream);
        let y = apply_cfo(&x, 0.0, 16).unwrap();
        assert_eq!(y.samples, x.samples);
    }

    #[test]
    fn cfo_preserves_magnitude() {
        let mut stream = RngStream::new(6, 0);
        let x = random_signal(64, &mut stream);
        let y = apply_cfo(&x, 0.37, 64).unwrap();
        for (a, b) in y.samples.iter().zip(&x.samples) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn integer_cfo_circularly_shifts_spectrum() {
        // eps = 1.0 on a symbol starting at global index 0:
        // Y(k) = X(k-1 mod N)
        let mut stream = RngStream::new(7, 0);
        let n = 16;
        let spec = Spectrum::new((0..n).map(|_| stream.complex_gaussian()).collect());
        let x = idft(&spec).unwrap();
        let y = apply_cfo(&x, 1.0, n).unwrap();
        let rx = dft(&y).unwrap();
        for k in 0..n {
            let expect = spec.bins[(k + n - 1) % n];
            assert!((rx.bins[k] - expect).norm() < 1e-10, "bin {k}");
        }
    }

    #[test]
    fn cfo_composes_additively() {
        let mut stream = RngStream::new(8, 0);
        let x = random_signal(48, &mut stream);
        let once = apply_cfo(&apply_cfo(&x, 0.07, 64).unwrap(), 0.12, 64).unwrap();
        let combined = apply_cfo(&x, 0.19, 64).unwrap();
        for (a, b) in once.samples.iter().zip(&combined.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cfo_phase_continuity_across_blocks() {
        let mut stream = RngStream::new(9, 0);
        let whole = random_signal(32, &mut stream);
        let first = TimeSignal::with_origin(whole.samples[..16].to_vec(), 0);
        let second = TimeSignal::with_origin(whole.samples[16..].to_vec(), 16);
        let eps = 0.23;
        let y_whole = apply_cfo(&whole, eps, 16).unwrap();
        let y1 = apply_cfo(&first, eps, 16).unwrap();
        let y2 = apply_cfo(&second, eps, 16).unwrap();
        for i in 0..16 {
            assert!((y1.samples[i] - y_whole.samples[i]).norm() < 1e-14);
            assert!((y2.samples[i] - y_whole.samples[16 + i]).norm() < 1e-14);
        }
    }

    #[test]
    fn phase_noise_zero_sigma_is_identity() {
        let mut stream = RngStream::new(10, 0);
        let x = random_signal(16, &mut stream);
        let y = apply_phase_noise(&x, 0.0, &mut stream).unwrap();
        assert_eq!(y.samples, x.samples);
    }

    #[test]
    fn phase_noise_preserves_magnitude() {
        let mut rng = RngStream::new(11, 0);
        let x = random_signal(256, &mut rng);
        let y = apply_phase_noise(&x, 0.05, &mut rng).unwrap();
        for (a, b) in y.samples.iter().zip(&x.samples) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_noise_rejects_negative_sigma() {
        let mut rng = RngStream::new(12, 0);
        let x = random_signal(4, &mut rng);
        assert!(apply_phase_noise(&x, -0.1, &mut rng).is_err());
    }

    #[test]
    fn phase_noise_increment_statistics() {
        let sigma = 0.01;
        let n = 1_000_000usize;
        let mut rng = RngStream::new(13, 0);
        let x = TimeSignal::new(vec![Complex64::new(1.0, 0.0); n]);
        let y = apply_phase_noise(&x, sigma, &mut rng).unwrap();
        // unwrap increments from consecutive phases
        let mut prev = 0.0f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in &y.samples {
            let phi = s.arg();
            let mut d = phi - prev;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            sum += d;
            sum_sq += d * d;
            prev = phi;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.005 * sigma, "mean {mean}");
        assert!(
            (var - sigma * sigma).abs() < 0.02 * sigma * sigma,
            "var {var}"
        );
    }

    #[test]
    fn awgn_extreme_snr_is_effectively_identity() {
        let mut rng = RngStream::new(14, 0);
        let x = random_signal(256, &mut rng);
        let y = apply_awgn(&x, 200.0, &mut rng).unwrap();
        let scale = x.mean_power().sqrt();
        for (a, b) in y.samples.iter().zip(&x.samples) {
            assert!((a - b).norm() / scale < 1e-8);
        }
    }

    #[test]
    fn awgn_hits_requested_snr() {
        let mut rng = RngStream::new(15, 0);
        let n = 1_000_000usize;
        let x = TimeSignal::new((0..n).map(|_| rng.complex_gaussian()).collect());
        let y = apply_awgn(&x, 10.0, &mut rng).unwrap();
        let noise_power: f64 = y
            .samples
            .iter()
            .zip(&x.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n as f64;
        let measured = 10.0 * (x.mean_power() / noise_power).log10();
        assert!((measured - 10.0).abs() < 0.1, "measured snr {measured}");
    }

    #[test]
    fn awgn_noise_mean_is_near_zero() {
        let mut rng = RngStream::new(16, 0);
        let n = 1_000_000usize;
        let x = TimeSignal::new(vec![Complex64::new(1.0, 0.0); n]);
        let y = apply_awgn(&x, 0.0, &mut rng).unwrap();
        let mean: Complex64 = y
            .samples
            .iter()
            .zip(&x.samples)
            .map(|(a, b)| a - b)
            .sum::<Complex64>()
            / n as f64;
        // per-component sigma is sqrt(N0/2) = sqrt(0.5)
        let bound = 4.0 * (0.5f64).sqrt() / (n as f64).sqrt();
        assert!(mean.re.abs() < bound && mean.im.abs() < bound);
    }

    #[test]
    fn awgn_rejects_zero_power() {
        let mut rng = RngStream::new(17, 0);
        let x = TimeSignal::new(vec![Complex64::new(0.0, 0.0); 8]);
        assert!(apply_awgn(&x, 10.0, &mut rng).is_err());
    }

    #[test]
    fn stochastic_impairments_are_deterministic_per_stream() {
        let x = TimeSignal::new(vec![Complex64::new(1.0, 0.5); 64]);
        let a = apply_awgn(&x, 5.0, &mut RngStream::new(42, 7)).unwrap();
        let b = apply_awgn(&x, 5.0, &mut RngStream::new(42, 7)).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = apply_phase_noise(&x, 0.1, &mut RngStream::new(42, 8)).unwrap();
        let d = apply_phase_noise(&x, 0.1, &mut RngStream::new(42, 8)).unwrap();
        assert_eq!(c.samples, d.samples);
    }
}
