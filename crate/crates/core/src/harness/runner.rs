//! Experiment execution. Every runner is deterministic for a given
//! `(config, seed)`: trials draw from per-trial derived RNG streams and all
//! floating-point reductions happen in trial order, so the emitted CSV is
//! byte-identical regardless of thread count.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{cfo_sinr, estimate_psd, papr_ccdf, sample_magnitude_ccdf, CcdfCurve};
use crate::channel::{apply_awgn, apply_cfo, apply_phase_noise, ChannelProfile, Multipath};
use crate::error::{Result, SimError};
use crate::harness::config::{CcdfStatistic, ExperimentKind, ScenarioConfig};
use crate::modem::{
    add_cyclic_prefix, allocate, apply_edge_window, concat_windowed, deallocate, demap_symbols,
    map_bits, ofdm_demodulate, ofdm_modulate, remove_cyclic_prefix, tx_filter, ConstellationScheme,
    CyclicPrefixSpec, SubcarrierPlan,
};
use crate::numerics::{RngStream, Spectrum, TimeSignal};

/// Result of one experiment run: the CSV table plus enough metadata to
/// reproduce it.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub csv: String,
    pub wall_time_secs: f64,
    pub library_version: &'static str,
    pub seed: u64,
}

impl RunReport {
    /// Write the CSV to `path` and a JSON sidecar to `path.meta.json`.
    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.csv.as_bytes())?;
        let sidecar = serde_json::json!({
            "experiment": self.config.experiment.name(),
            "library_version": self.library_version,
            "seed": self.seed,
            "wall_time_secs": self.wall_time_secs,
            "config": self.config,
        });
        let mut meta_path = path.as_os_str().to_owned();
        meta_path.push(".meta.json");
        std::fs::write(
            std::path::Path::new(&meta_path),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        Ok(())
    }
}

/// Fixed 12-significant-digit scientific formatting; reproducibility of the
/// CSV bytes depends on this never changing.
fn fmt(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.11e}")
}

/// Run an experiment on a dedicated thread pool. `threads = None` uses the
/// rayon default.
pub fn run(config: &ScenarioConfig, threads: Option<usize>) -> Result<RunReport> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(SimError::config("threads", "must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::invalid(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let csv = pool.install(|| match config.experiment {
        ExperimentKind::Psd => run_psd(config),
        ExperimentKind::PaprCcdf => run_papr_ccdf(config),
        ExperimentKind::BerSweep => run_ber_sweep(config),
        ExperimentKind::CfoSweep => run_cfo_sweep(config),
        ExperimentKind::CpSweep => run_cp_sweep(config),
    })?;
    Ok(RunReport {
        config: config.clone(),
        csv,
        wall_time_secs: start.elapsed().as_secs_f64(),
        library_version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
    })
}

fn random_bits(n: usize, stream: &mut RngStream) -> Vec<bool> {
    (0..n).map(|_| stream.next_u64() & 1 == 1).collect()
}

struct TxSymbol {
    bits: Vec<bool>,
    symbols: Vec<Complex64>,
    /// CP-extended block, origin 0.
    block: TimeSignal,
}

fn make_tx_symbol(
    scheme: ConstellationScheme,
    plan: &SubcarrierPlan,
    cp: &CyclicPrefixSpec,
    stream: &mut RngStream,
) -> TxSymbol {
    let bits = random_bits(plan.active_count() * scheme.bits_per_symbol(), stream);
    let symbols = map_bits(&bits, scheme).expect("bit count matches scheme");
    let spec = allocate(&symbols, plan).expect("symbol count matches plan");
    let time = ofdm_modulate(&spec).expect("non-empty spectrum");
    let block = add_cyclic_prefix(&time, cp)
        .expect("lengths validated")
        .concat();
    TxSymbol {
        bits,
        symbols,
        block,
    }
}

/// Unscaled DFT of the zero-padded channel taps. With the 1/N-forward
/// transform pair, circular convolution in time is multiplication by this
/// (not the scaled) frequency response, so the one-tap equalizer divides by
/// it.
fn channel_frequency_response(profile: &ChannelProfile, n_fft: usize) -> Vec<Complex64> {
    (0..n_fft)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, t) in profile.taps().iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * k as f64 * l as f64 / n_fft as f64;
                acc += t * Complex64::from_polar(1.0, ang);
            }
            acc
        })
        .collect()
}

fn equalize(spec: &mut Spectrum, response: &[Complex64]) {
    for (bin, h) in spec.bins.iter_mut().zip(response) {
        *bin /= h;
    }
}

fn run_psd(config: &ScenarioConfig) -> Result<String> {
    let plan = config.plan()?;
    let cp = config.cp_spec()?;
    let scheme = config.scheme();
    let base = RngStream::new(config.seed, 0);
    let rolloff = config.rolloff_len;

    let symbols: Vec<TimeSignal> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| {
            let mut stream = base.substream(i as u64);
            let bits = random_bits(plan.active_count() * scheme.bits_per_symbol(), &mut stream);
            let data = map_bits(&bits, scheme)?;
            let time = ofdm_modulate(&allocate(&data, &plan)?)?;
            let sym = add_cyclic_prefix(&time, &cp)?;
            apply_edge_window(&sym, rolloff)
        })
        .collect::<Result<_>>()?;

    let mut stream = concat_windowed(&symbols, cp.symbol_len(), rolloff);
    if let Some(filter) = &config.tx_filter {
        stream = tx_filter(&stream, filter.num_taps, filter.cutoff)?;
    }
    let psd = estimate_psd(
        &stream,
        config.welch.resolved_segment_len(config.n_fft),
        config.welch.overlap,
        config.welch.window,
    )?;

    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "normalized_frequency_cycles_per_sample,power_db_rel_mean"
    );
    for (f, p) in psd.freq_bins.iter().zip(&psd.power_db) {
        let _ = writeln!(csv, "{},{}", fmt(*f), fmt(*p));
    }
    Ok(csv)
}

fn run_papr_ccdf(config: &ScenarioConfig) -> Result<String> {
    let plan = config.plan()?;
    let thresholds = config
        .thresholds_db
        .as_ref()
        .expect("validated: thresholds present");

    let curves: Vec<CcdfCurve> = config
        .schemes
        .iter()
        .enumerate()
        .map(|(i, &scheme)| {
            let stream = RngStream::new(config.seed, i as u64);
            match config.ccdf_statistic {
                CcdfStatistic::SymbolPapr => {
                    papr_ccdf(scheme, &plan, config.n_trials, thresholds, &stream)
                }
                CcdfStatistic::SampleMagnitude => {
                    sample_magnitude_ccdf(scheme, &plan, config.n_trials, thresholds, &stream)
                }
            }
        })
        .collect::<Result<_>>()?;

    let stat = match config.ccdf_statistic {
        CcdfStatistic::SymbolPapr => "symbol_papr",
        CcdfStatistic::SampleMagnitude => "sample_magnitude",
    };
    let mut csv = String::new();
    let _ = write!(csv, "threshold_db");
    for scheme in &config.schemes {
        let _ = write!(csv, ",exceed_prob_{stat}_{}", scheme.name());
    }
    csv.push('\n');
    for (row, &t) in curves[0].thresholds_db.iter().enumerate() {
        let _ = write!(csv, "{}", fmt(t));
        for curve in &curves {
            let _ = write!(csv, ",{}", fmt(curve.exceed_prob[row]));
        }
        csv.push('\n');
    }
    Ok(csv)
}

/// Time-domain SNR needed to hit a target Eb/N0, accounting for bits per
/// symbol, the active-subcarrier fraction and the cyclic-prefix overhead:
/// `snr = ebn0 * bits_per_symbol * active_count / (n_fft + cp_len)`.
fn ebn0_to_snr_db(ebn0_db: f64, config: &ScenarioConfig, plan: &SubcarrierPlan) -> f64 {
    let factor = config.scheme().bits_per_symbol() as f64 * plan.active_count() as f64
        / (config.n_fft + config.cp_len) as f64;
    ebn0_db + 10.0 * factor.log10()
}

/// One transmit/impair/receive pass for a single symbol-isolated trial.
/// Returns (tx bits, tx symbols, rx symbols after optional equalization).
fn run_trial(
    config: &ScenarioConfig,
    plan: &SubcarrierPlan,
    cp: &CyclicPrefixSpec,
    response: Option<&[Complex64]>,
    snr_db: Option<f64>,
    epsilon: f64,
    stream: &RngStream,
) -> Result<(Vec<bool>, Vec<Complex64>, Vec<Complex64>)> {
    let mut data_stream = stream.substream(0);
    let tx = make_tx_symbol(config.scheme(), plan, cp, &mut data_stream);
    let mut signal = tx.block;
    if let Some(profile) = config.impairments.profile()? {
        signal = Multipath::new(profile).apply(&signal);
    }
    if epsilon != 0.0 {
        signal = apply_cfo(&signal, epsilon, config.n_fft)?;
    }
    if config.impairments.phase_noise_sigma > 0.0 {
        let mut pn_stream = stream.substream(2);
        signal = apply_phase_noise(
            &signal,
            config.impairments.phase_noise_sigma,
            &mut pn_stream,
        )?;
    }
    if let Some(snr) = snr_db {
        let mut noise_stream = stream.substream(1);
        signal = apply_awgn(&signal, snr, &mut noise_stream)?;
    }
    let useful = remove_cyclic_prefix(&signal, cp)?;
    let mut spec = ofdm_demodulate(&useful)?;
    if let Some(h) = response {
        equalize(&mut spec, h);
    }
    let rx_symbols = deallocate(&spec, plan)?;
    Ok((tx.bits, tx.symbols, rx_symbols))
}

fn run_ber_sweep(config: &ScenarioConfig) -> Result<String> {
    let plan = config.plan()?;
    let cp = config.cp_spec()?;
    let sweep = config.sweep.as_ref().expect("validated: sweep present");
    let profile = config.impairments.profile()?;
    let response = profile
        .as_ref()
        .map(|p| channel_frequency_response(p, config.n_fft));
    let bits_per_trial = plan.active_count() * config.scheme().bits_per_symbol();

    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# snr_db = ebn0_db + 10*log10(bits_per_symbol * active_count / (n_fft + cp_len))"
    );
    let _ = writeln!(csv, "ebn0_db,ber,bit_count");
    for (point, &ebn0) in sweep.iter().enumerate() {
        // the swept Eb/N0 supplies the noise level unless noise is forced off
        let snr_db = if config.impairments.noise_forced_off() {
            None
        } else {
            Some(ebn0_to_snr_db(ebn0, config, &plan))
        };
        let base = RngStream::new(config.seed, point as u64);
        let errors: Vec<usize> = (0..config.n_trials)
            .into_par_iter()
            .map(|t| {
                let stream = base.substream(t as u64);
                let (bits, _, rx_symbols) = run_trial(
                    config,
                    &plan,
                    &cp,
                    response.as_deref(),
                    snr_db,
                    config.impairments.epsilon,
                    &stream,
                )?;
                let rx_bits = demap_symbols(&rx_symbols, config.scheme());
                Ok(bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count())
            })
            .collect::<Result<_>>()?;
        let total_errors: usize = errors.iter().sum();
        let total_bits = config.n_trials * bits_per_trial;
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt(ebn0),
            fmt(total_errors as f64 / total_bits as f64),
            total_bits
        );
    }
    Ok(csv)
}

fn run_cfo_sweep(config: &ScenarioConfig) -> Result<String> {
    let plan = config.plan()?;
    let cp = config.cp_spec()?;
    let sweep = config.sweep.as_ref().expect("validated: sweep present");
    let bits_per_trial = plan.active_count() * config.scheme().bits_per_symbol();

    let mut csv = String::new();
    let _ = writeln!(csv, "epsilon,predicted_sinr_db,measured_sinr_db,evm,ber");
    for (point, &epsilon) in sweep.iter().enumerate() {
        let base = RngStream::new(config.seed, point as u64);
        // Per-trial partial sums; reduced sequentially in trial order below.
        type Partial = (Complex64, f64, f64, usize);
        let partials: Vec<Partial> = (0..config.n_trials)
            .into_par_iter()
            .map(|t| {
                let stream = base.substream(t as u64);
                // noise-free pass for the SINR measurement
                let (bits, tx_symbols, rx_symbols) =
                    run_trial(config, &plan, &cp, None, None, epsilon, &stream)?;
                let mut cross = Complex64::new(0.0, 0.0);
                let mut tx_power = 0.0;
                let mut rx_power = 0.0;
                for (rx, tx) in rx_symbols.iter().zip(&tx_symbols) {
                    cross += rx * tx.conj();
                    tx_power += tx.norm_sqr();
                    rx_power += rx.norm_sqr();
                }
                // noisy pass for the BER column (same data bits)
                let errors = if let Some(snr) = config.impairments.fixed_snr_db() {
                    let (_, _, noisy_rx) =
                        run_trial(config, &plan, &cp, None, Some(snr), epsilon, &stream)?;
                    let rx_bits = demap_symbols(&noisy_rx, config.scheme());
                    bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count()
                } else {
                    let rx_bits = demap_symbols(&rx_symbols, config.scheme());
                    bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count()
                };
                Ok((cross, tx_power, rx_power, errors))
            })
            .collect::<Result<_>>()?;

        let mut cross = Complex64::new(0.0, 0.0);
        let mut tx_power = 0.0;
        let mut rx_power = 0.0;
        let mut errors = 0usize;
        for (c, tp, rp, e) in partials {
            cross += c;
            tx_power += tp;
            rx_power += rp;
            errors += e;
        }
        // Least-squares common gain (the S(eps) attenuation/rotation); what
        // remains after removing it is the interference power.
        let gain = cross / tx_power;
        let signal_power = gain.norm_sqr() * tx_power;
        let interference = (rx_power - signal_power).max(0.0);
        let measured_sinr_db = if interference == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (signal_power / interference).log10()
        };
        let evm = (interference / tx_power).sqrt();
        let predicted = cfo_sinr(epsilon, config.n_fft)?;
        let predicted_db = if predicted.is_infinite() {
            f64::INFINITY
        } else {
            10.0 * predicted.log10()
        };
        let total_bits = config.n_trials * bits_per_trial;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt(epsilon),
            fmt(predicted_db),
            fmt(measured_sinr_db),
            fmt(evm),
            fmt(errors as f64 / total_bits as f64)
        );
    }
    Ok(csv)
}

fn run_cp_sweep(config: &ScenarioConfig) -> Result<String> {
    let plan = config.plan()?;
    let sweep = config.sweep.as_ref().expect("validated: sweep present");
    let profile = config
        .impairments
        .profile()?
        .expect("validated: taps present");
    let response = channel_frequency_response(&profile, config.n_fft);
    let scheme = config.scheme();

    let mut csv = String::new();
    let _ = writeln!(csv, "guard_len,evm,ber");
    for (point, &guard) in sweep.iter().enumerate() {
        let cp = CyclicPrefixSpec::new(config.n_fft, guard as usize)
            .map_err(|e| SimError::config("sweep", e.to_string()))?;
        let base = RngStream::new(config.seed, point as u64);

        // transmit side is per-trial independent and parallel
        let tx: Vec<TxSymbol> = (0..config.n_trials)
            .into_par_iter()
            .map(|t| {
                let mut stream = base.substream(t as u64).substream(0);
                make_tx_symbol(scheme, &plan, &cp, &mut stream)
            })
            .collect();

        // the channel is a single stateful convolution over the whole
        // back-to-back stream: ISI really crosses symbol boundaries
        let mut channel = Multipath::new(profile.clone());
        let mut rx_blocks: Vec<TimeSignal> = tx.iter().map(|t| channel.apply(&t.block)).collect();
        if let Some(snr) = config.impairments.fixed_snr_db() {
            let mut all: Vec<Complex64> = Vec::new();
            for b in &rx_blocks {
                all.extend_from_slice(&b.samples);
            }
            let mut noise_stream = base.substream(config.n_trials as u64 + 1);
            let noisy = apply_awgn(&TimeSignal::new(all), snr, &mut noise_stream)?;
            let block_len = cp.symbol_len();
            rx_blocks = noisy
                .samples
                .chunks_exact(block_len)
                .map(|c| TimeSignal::new(c.to_vec()))
                .collect();
        }

        let per_symbol: Vec<(Vec<Complex64>, usize)> = rx_blocks
            .par_iter()
            .zip(&tx)
            .map(|(block, tx_sym)| {
                let useful = remove_cyclic_prefix(block, &cp)?;
                let mut spec = ofdm_demodulate(&useful)?;
                equalize(&mut spec, &response);
                let rx_symbols = deallocate(&spec, &plan)?;
                let rx_bits = demap_symbols(&rx_symbols, scheme);
                let errors = tx_sym
                    .bits
                    .iter()
                    .zip(&rx_bits)
                    .filter(|(a, b)| a != b)
                    .count();
                Ok((rx_symbols, errors))
            })
            .collect::<Result<_>>()?;

        let mut err_power = 0.0;
        let mut ref_power = 0.0;
        let mut errors = 0usize;
        for ((rx_symbols, e), tx_sym) in per_symbol.iter().zip(&tx) {
            for (rx, tx_pt) in rx_symbols.iter().zip(&tx_sym.symbols) {
                err_power += (rx - tx_pt).norm_sqr();
                ref_power += tx_pt.norm_sqr();
            }
            errors += e;
        }
        let evm = (err_power / ref_power).sqrt();
        let total_bits = config.n_trials * plan.active_count() * scheme.bits_per_symbol();
        let _ = writeln!(
            csv,
            "{},{},{}",
            guard as usize,
            fmt(evm),
            fmt(errors as f64 / total_bits as f64)
        );
    }
    Ok(csv)
}
