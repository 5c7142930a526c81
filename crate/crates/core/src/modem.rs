//! Bits to waveform and back: constellation mapping, subcarrier allocation,
//! OFDM symbol synthesis, cyclic prefix, edge windowing and transmit
//! filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::numerics::{fft, ifft, ComplexSample, Spectrum, TimeSignal};

/// Supported constellations. All are unit average power and Gray labeled:
/// the square QAM grids use an independent Gray code per axis, so nearest
/// neighbors always differ in exactly one bit.
///
/// Bit order within a symbol is MSB first, I-axis bits before Q-axis bits.
/// The per-axis convention puts bit 0 on the positive side (BPSK: 0 -> +1,
/// 1 -> -1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConstellationScheme {
    #[serde(rename = "bpsk", alias = "BPSK")]
    Bpsk,
    #[serde(rename = "qpsk", alias = "QPSK")]
    Qpsk,
    #[serde(rename = "16qam", alias = "qam16", alias = "16QAM")]
    Qam16,
    #[serde(rename = "64qam", alias = "qam64", alias = "64QAM")]
    Qam64,
}

impl ConstellationScheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ConstellationScheme::Bpsk => 1,
            ConstellationScheme::Qpsk => 2,
            ConstellationScheme::Qam16 => 4,
            ConstellationScheme::Qam64 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstellationScheme::Bpsk => "bpsk",
            ConstellationScheme::Qpsk => "qpsk",
            ConstellationScheme::Qam16 => "16qam",
            ConstellationScheme::Qam64 => "64qam",
        }
    }

    fn bits_per_axis(self) -> usize {
        match self {
            ConstellationScheme::Bpsk => 1,
            ConstellationScheme::Qpsk => 1,
            ConstellationScheme::Qam16 => 2,
            ConstellationScheme::Qam64 => 3,
        }
    }

    /// Unit-average-power normalization: 1, 1/sqrt(2), 1/sqrt(10), 1/sqrt(42).
    fn amplitude_scale(self) -> f64 {
        let m = self.bits_per_axis();
        let levels = 1usize << m;
        // Mean of (2i - (L-1))^2 over one axis, doubled for I+Q.
        let axes = if self == ConstellationScheme::Bpsk {
            1
        } else {
            2
        };
        let mean_sq: f64 = (0..levels)
            .map(|i| {
                let a = 2.0 * i as f64 - (levels as f64 - 1.0);
                a * a
            })
            .sum::<f64>()
            / levels as f64;
        1.0 / (axes as f64 * mean_sq).sqrt()
    }

    /// Amplitude of one axis given its Gray-coded bit group.
    fn axis_level(self, gray: usize) -> f64 {
        let levels = 1usize << self.bits_per_axis();
        // Gray decode, then map index 0 -> most positive level.
        let mut idx = gray;
        let mut mask = gray >> 1;
        while mask != 0 {
            idx ^= mask;
            mask >>= 1;
        }
        (levels as f64 - 1.0) - 2.0 * idx as f64
    }

    /// All constellation points, indexed by bit label (MSB first).
    pub fn points(self) -> Vec<ComplexSample> {
        let b = self.bits_per_symbol();
        let scale = self.amplitude_scale();
        (0..1usize << b)
            .map(|label| {
                if self == ConstellationScheme::Bpsk {
                    Complex64::new(self.axis_level(label) * scale, 0.0)
                } else {
                    let axis_bits = self.bits_per_axis();
                    let i_gray = label >> axis_bits;
                    let q_gray = label & ((1 << axis_bits) - 1);
                    Complex64::new(
                        self.axis_level(i_gray) * scale,
                        self.axis_level(q_gray) * scale,
                    )
                }
            })
            .collect()
    }
}

/// Map a bit stream onto constellation symbols.
pub fn map_bits(bits: &[bool], scheme: ConstellationScheme) -> Result<Vec<ComplexSample>> {
    let bps = scheme.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(SimError::invalid(format!(
            "map_bits: {} bits not divisible by {} bits/symbol",
            bits.len(),
            bps
        )));
    }
    let points = scheme.points();
    Ok(bits
        .chunks_exact(bps)
        .map(|group| {
            let label = group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            points[label]
        })
        .collect())
}

/// Hard-decision demapping to the Euclidean-nearest point. Exact ties go to
/// the lowest bit label (strict `<` while scanning labels in ascending
/// order).
pub fn demap_symbols(symbols: &[ComplexSample], scheme: ConstellationScheme) -> Vec<bool> {
    let points = scheme.points();
    let bps = scheme.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * bps);
    for s in symbols {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, p) in points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        for i in (0..bps).rev() {
            bits.push((best >> i) & 1 == 1);
        }
    }
    bits
}

/// Active/null subcarrier layout.
///
/// Bin convention: bin 0 is DC, bins `1..N/2-1` are positive frequencies and
/// bins `N/2..N-1` negative ones (bin `N/2` sits at -Nyquist). The guard
/// nulls are the bins closest to +/-Nyquist: `{N/2-1, ..., N/2-g}` on the
/// positive side and `{N/2, ..., N/2+g-1}` on the negative side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierPlan {
    pub n_fft: usize,
    pub null_dc: bool,
    pub guard_nulls_per_side: usize,
    active_indices: Vec<usize>,
}

impl SubcarrierPlan {
    pub fn new(n_fft: usize, null_dc: bool, guard_nulls_per_side: usize) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_multiple_of(2) {
            return Err(SimError::invalid(format!(
                "SubcarrierPlan: n_fft must be even and >= 2, got {n_fft}"
            )));
        }
        let nulls = usize::from(null_dc) + 2 * guard_nulls_per_side;
        if nulls >= n_fft {
            return Err(SimError::invalid(format!(
                "SubcarrierPlan: {nulls} null bins leave no active subcarrier out of {n_fft}"
            )));
        }
        let half = n_fft / 2;
        let g = guard_nulls_per_side;
        let is_null = |bin: usize| -> bool {
            if bin == 0 {
                return null_dc;
            }
            if bin < half {
                // positive frequencies; guard band hugs +Nyquist
                bin > half - 1 - g
            } else {
                // negative frequencies; guard band hugs -Nyquist
                bin < half + g
            }
        };
        // Ascending frequency: -N/2 .. -1 then DC .. +(N/2 - 1).
        let active_indices: Vec<usize> = (half..n_fft)
            .chain(0..half)
            .filter(|&bin| !is_null(bin))
            .collect();
        if active_indices.is_empty() {
            return Err(SimError::invalid(
                "SubcarrierPlan: empty active set".to_string(),
            ));
        }
        Ok(SubcarrierPlan {
            n_fft,
            null_dc,
            guard_nulls_per_side,
            active_indices,
        })
    }

    /// All subcarriers active, no nulls.
    pub fn all_active(n_fft: usize) -> Result<Self> {
        SubcarrierPlan::new(n_fft, false, 0)
    }

    pub fn active_count(&self) -> usize {
        self.active_indices.len()
    }

    /// Active bins in ascending-frequency order.
    pub fn active_indices(&self) -> &[usize] {
        &self.active_indices
    }

    /// Signed frequency (in bins) of a bin index under the DC-at-0 convention.
    pub fn bin_frequency(&self, bin: usize) -> isize {
        if bin < self.n_fft / 2 {
            bin as isize
        } else {
            bin as isize - self.n_fft as isize
        }
    }
}

/// Place symbols on the active bins in ascending-frequency order; null bins
/// stay exactly zero.
pub fn allocate(symbols: &[ComplexSample], plan: &SubcarrierPlan) -> Result<Spectrum> {
    if symbols.len() != plan.active_count() {
        return Err(SimError::invalid(format!(
            "allocate: got {} symbols for {} active subcarriers",
            symbols.len(),
            plan.active_count()
        )));
    }
    let mut spec = Spectrum::zeros(plan.n_fft);
    for (&bin, &sym) in plan.active_indices.iter().zip(symbols) {
        spec.bins[bin] = sym;
    }
    Ok(spec)
}

/// Inverse of [`allocate`]; null-bin contents are ignored.
pub fn deallocate(spectrum: &Spectrum, plan: &SubcarrierPlan) -> Result<Vec<ComplexSample>> {
    if spectrum.len() != plan.n_fft {
        return Err(SimError::invalid(format!(
            "deallocate: spectrum length {} != n_fft {}",
            spectrum.len(),
            plan.n_fft
        )));
    }
    Ok(plan
        .active_indices
        .iter()
        .map(|&bin| spectrum.bins[bin])
        .collect())
}

/// OFDM symbol synthesis: the time-domain samples are the unnormalized
/// inverse transform of the subcarrier symbols, nothing else.
pub fn ofdm_modulate(spectrum: &Spectrum) -> Result<TimeSignal> {
    ifft(spectrum)
}

/// Receiver-side transform back to subcarrier symbols (1/N-scaled forward).
pub fn ofdm_demodulate(x: &TimeSignal) -> Result<Spectrum> {
    fft(x)
}

/// Cyclic prefix geometry for symbols of `n_fft` useful samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CyclicPrefixSpec {
    pub n_fft: usize,
    pub guard_len: usize,
}

impl CyclicPrefixSpec {
    pub fn new(n_fft: usize, guard_len: usize) -> Result<Self> {
        if guard_len >= n_fft {
            return Err(SimError::invalid(format!(
                "CyclicPrefixSpec: guard_len {guard_len} must be < n_fft {n_fft}"
            )));
        }
        Ok(CyclicPrefixSpec { n_fft, guard_len })
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.guard_len
    }
}

/// One cyclically extended OFDM symbol. `prefix` is an exact copy of the
/// last `guard_len` useful samples (before any windowing).
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbol {
    pub useful: TimeSignal,
    pub prefix: TimeSignal,
    /// Roll-off region length when an edge window has been applied.
    pub window_rolloff: Option<usize>,
}

impl OfdmSymbol {
    /// Prefix followed by useful samples, as transmitted (unwindowed).
    pub fn concat(&self) -> TimeSignal {
        let mut samples = self.prefix.samples.clone();
        samples.extend_from_slice(&self.useful.samples);
        TimeSignal::with_origin(samples, self.useful.sample_index_origin)
    }
}

pub fn add_cyclic_prefix(x: &TimeSignal, spec: &CyclicPrefixSpec) -> Result<OfdmSymbol> {
    if x.len() != spec.n_fft {
        return Err(SimError::invalid(format!(
            "add_cyclic_prefix: signal length {} != n_fft {}",
            x.len(),
            spec.n_fft
        )));
    }
    let prefix = TimeSignal::new(x.samples[x.len() - spec.guard_len..].to_vec());
    Ok(OfdmSymbol {
        useful: x.clone(),
        prefix,
        window_rolloff: None,
    })
}

/// Drop the guard samples, keeping the last `n_fft` samples of the block.
pub fn remove_cyclic_prefix(samples: &TimeSignal, spec: &CyclicPrefixSpec) -> Result<TimeSignal> {
    if samples.len() != spec.symbol_len() {
        return Err(SimError::invalid(format!(
            "remove_cyclic_prefix: block length {} != n_fft + guard_len = {}",
            samples.len(),
            spec.symbol_len()
        )));
    }
    Ok(TimeSignal::with_origin(
        samples.samples[spec.guard_len..].to_vec(),
        samples.sample_index_origin + spec.guard_len as u64,
    ))
}

/// Raised-cosine edge taper, confined to the guard region.
///
/// The first `rolloff_len` prefix samples ramp up with
/// `w(i) = 0.5 (1 - cos(pi i / rolloff_len))` and a `rolloff_len`-sample
/// postfix, copied cyclically from the head of the useful part, ramps down
/// with the mirrored taper. The N useful samples are untouched, so loopback
/// stays exact. Consecutive symbols overlap-add by `rolloff_len` (see
/// [`concat_windowed`]).
pub fn apply_edge_window(sym: &OfdmSymbol, rolloff_len: usize) -> Result<TimeSignal> {
    let ng = sym.prefix.len();
    if rolloff_len > ng {
        return Err(SimError::invalid(format!(
            "apply_edge_window: rolloff_len {rolloff_len} exceeds guard length {ng}"
        )));
    }
    let mut out = sym.concat().samples;
    if rolloff_len > 0 {
        let l = rolloff_len as f64;
        for (i, sample) in out.iter_mut().enumerate().take(rolloff_len) {
            let w = 0.5 * (1.0 - (PI * i as f64 / l).cos());
            *sample *= w;
        }
        for i in 0..rolloff_len {
            // ramp-down weight is w(rolloff_len - i), the mirror of the ramp-up
            let w = 0.5 * (1.0 + (PI * i as f64 / l).cos());
            out.push(sym.useful.samples[i] * w);
        }
    }
    Ok(TimeSignal::with_origin(out, sym.useful.sample_index_origin))
}

/// Concatenate windowed symbols, overlap-adding `rolloff_len` samples at
/// each boundary. Symbol m starts `m * (n_fft + guard_len)` samples into the
/// stream.
pub fn concat_windowed(
    symbols: &[TimeSignal],
    symbol_len: usize,
    rolloff_len: usize,
) -> TimeSignal {
    if symbols.is_empty() {
        return TimeSignal::new(vec![]);
    }
    let total = symbol_len * symbols.len() + rolloff_len;
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    for (m, sym) in symbols.iter().enumerate() {
        let start = m * symbol_len;
        for (i, s) in sym.samples.iter().enumerate() {
            out[start + i] += s;
        }
    }
    TimeSignal::new(out)
}

/// Hamming-windowed sinc low-pass prototype, normalized to unit DC gain.
/// `cutoff` is in cycles per sample (Nyquist = 0.5).
pub fn fir_lowpass_taps(num_taps: usize, cutoff: f64) -> Result<Vec<f64>> {
    if num_taps.is_multiple_of(2) || num_taps == 0 {
        return Err(SimError::invalid(format!(
            "fir_lowpass_taps: num_taps must be odd, got {num_taps}"
        )));
    }
    if !(cutoff > 0.0 && cutoff <= 0.5) {
        return Err(SimError::invalid(format!(
            "fir_lowpass_taps: cutoff must be in (0, 0.5], got {cutoff}"
        )));
    }
    let mid = (num_taps / 2) as f64;
    let mut taps: Vec<f64> = (0..num_taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let hamming = 0.54 - 0.46 * (2.0 * PI * i as f64 / (num_taps as f64 - 1.0)).cos();
            sinc * hamming
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= dc;
    }
    Ok(taps)
}

/// Linear-phase low-pass transmit filter. Output is the full linear
/// convolution (length `len + num_taps - 1`), delayed by
/// `(num_taps - 1) / 2` samples; callers compensate that known group delay.
pub fn tx_filter(x: &TimeSignal, num_taps: usize, cutoff: f64) -> Result<TimeSignal> {
    let taps = fir_lowpass_taps(num_taps, cutoff)?;
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() + taps.len() - 1];
    for (i, s) in x.samples.iter().enumerate() {
        for (j, &t) in taps.iter().enumerate() {
            out[i + j] += s * t;
        }
    }
    Ok(TimeSignal::with_origin(out, x.sample_index_origin))
}

/// Seam for channel coding/interleaving ahead of the mapper. The toolkit
/// ships only the identity transform.
pub trait BitCoder {
    fn encode(&self, bits: &[bool]) -> Vec<bool>;
    fn decode(&self, bits: &[bool]) -> Vec<bool>;
}

/// Pass-through coder: no redundancy, no interleaving.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCoder;

impl BitCoder for IdentityCoder {
    fn encode(&self, bits: &[bool]) -> Vec<bool> {
        bits.to_vec()
    }

    fn decode(&self, bits: &[bool]) -> Vec<bool> {
        bits.to_vec()
    }
}
