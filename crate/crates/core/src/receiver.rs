//! Backscatter receiver: tap power extraction, per-key band-pass filtering,
//! FSK demodulation, Barker synchronization, and packet accept/reject.
//!
//! The receiver treats the tap series as uniformly sampled at the nominal
//! rate; the sampling irregularity lives only in the generation side. Sync
//! offsets are searched at single-sample resolution since the device and the
//! receiver share no clock.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::TapSeries;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::waveforms::{sinc, sync_header};

/// Default band-pass width around each key, Hz.
pub const DEFAULT_BPF_BANDWIDTH: f64 = 200.0;
/// Default FIR length (odd).
pub const DEFAULT_FIR_TAPS: usize = 257;
/// Default correlation threshold for the 21-bit sync header.
pub const DEFAULT_SYNC_THRESHOLD: i32 = 14;
/// Maximum tolerated header errors: 7 of 21 is the one-third rule.
pub const MAX_HEADER_ERRORS: usize = 7;

/// FSK decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    /// Compare band powers around the two keys.
    Energy,
    /// Compare powers of the complex symbol means after downconversion.
    Coherent,
}

impl std::str::FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Detector::Energy),
            "coherent" => Ok(Detector::Coherent),
            other => Err(Error::InvalidArgument(format!(
                "unknown detector `{other}` (expected `energy` or `coherent`)"
            ))),
        }
    }
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Detector::Energy => write!(f, "energy"),
            Detector::Coherent => write!(f, "coherent"),
        }
    }
}

/// Band-pass filter specification; the window is fixed to Hamming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Center frequency, Hz.
    pub center: f64,
    /// Two-sided passband width, Hz.
    pub bandwidth: f64,
    /// FIR length; must be odd and at least 31.
    pub taps: usize,
}

impl FilterSpec {
    /// Spec with the default bandwidth and length around `center`.
    pub fn around(center: f64) -> FilterSpec {
        FilterSpec {
            center,
            bandwidth: DEFAULT_BPF_BANDWIDTH,
            taps: DEFAULT_FIR_TAPS,
        }
    }
}

/// Tap power series: `y_i = |h_i|^2` reindexed onto the nominal uniform grid.
pub fn tap_power(series: &TapSeries) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty tap series".into()));
    }
    Ok(series.values.iter().map(|v| v.norm_sqr()).collect())
}

/// Linear-phase windowed-sinc band-pass design.
///
/// Difference of two Hamming-windowed low-pass kernels with -6 dB edges at
/// `center +- bandwidth/2`, rescaled to unit gain at the center frequency.
pub fn design_bandpass(spec: &FilterSpec, f_s: f64) -> Result<Vec<f64>> {
    if spec.taps % 2 == 0 || spec.taps < 31 {
        return Err(Error::InvalidArgument(format!(
            "taps must be odd and >= 31, got {}",
            spec.taps
        )));
    }
    if !(spec.bandwidth > 0.0) || spec.center - spec.bandwidth / 2.0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "band edges must be positive, got center {} bandwidth {}",
            spec.center, spec.bandwidth
        )));
    }
    if spec.center + spec.bandwidth / 2.0 >= f_s / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "upper band edge {} reaches Nyquist {}",
            spec.center + spec.bandwidth / 2.0,
            f_s / 2.0
        )));
    }

    let half = (spec.taps - 1) as f64 / 2.0;
    let f_lo = (spec.center - spec.bandwidth / 2.0) / f_s;
    let f_hi = (spec.center + spec.bandwidth / 2.0) / f_s;
    let mut coeffs: Vec<f64> = (0..spec.taps)
        .map(|n| {
            let m = n as f64 - half;
            let lp_hi = 2.0 * f_hi * sinc(2.0 * f_hi * m);
            let lp_lo = 2.0 * f_lo * sinc(2.0 * f_lo * m);
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / (spec.taps - 1) as f64).cos();
            (lp_hi - lp_lo) * window
        })
        .collect();

    // Normalize to exactly unit gain at the center frequency.
    let gain = frequency_response(&coeffs, spec.center, f_s).norm();
    for c in &mut coeffs {
        *c /= gain;
    }
    Ok(coeffs)
}

/// Direct DTFT of an FIR at frequency `f`.
pub fn frequency_response(coeffs: &[f64], f: f64, f_s: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, c) in coeffs.iter().enumerate() {
        acc += c * Complex64::from_polar(1.0, -2.0 * PI * f * n as f64 / f_s);
    }
    acc
}

/// A filtered series aligned to the input timebase.
#[derive(Debug, Clone)]
pub struct FilteredSeries {
    /// One output sample per input sample (zero-padded edges).
    pub samples: Vec<f64>,
    /// Samples at each end still inside the filter transient.
    pub warm_up: usize,
}

/// Convolve with delay compensation: output sample `i` is time-aligned with
/// input sample `i`; `warm_up` samples at each end are edge transients.
pub fn filter_series(y: &[f64], fir: &[f64]) -> Result<FilteredSeries> {
    if y.len() <= fir.len() {
        return Err(Error::InvalidArgument(format!(
            "series length {} must exceed filter length {}",
            y.len(),
            fir.len()
        )));
    }
    let taps = fir.len();
    let half = (taps - 1) / 2;
    let n = y.len();
    let mut out = vec![0.0; n];
    // Linear-phase coefficients are symmetric, so the delay-compensated
    // convolution is a forward dot product starting at i - half.
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let k0 = lo + half - i;
        let acc: f64 = fir[k0..k0 + (hi - lo)]
            .iter()
            .zip(&y[lo..hi])
            .map(|(a, b)| a * b)
            .sum();
        *slot = acc;
    }
    Ok(FilteredSeries {
        samples: out,
        warm_up: half,
    })
}

fn soft_log_ratio(p1: f64, p0: f64) -> f64 {
    (p1.max(f64::MIN_POSITIVE)).ln() - (p0.max(f64::MIN_POSITIVE)).ln()
}

/// Energy decision over one symbol: compare mean powers of the two branch
/// windows. Returns the bit and the log power ratio; ties go to bit 0.
pub fn demod_energy(window_f0: &[f64], window_f1: &[f64]) -> Result<(u8, f64)> {
    if window_f0.is_empty() || window_f1.is_empty() || window_f0.len() != window_f1.len() {
        return Err(Error::InvalidArgument(
            "demod windows must be non-empty and of equal length".into(),
        ));
    }
    let mean = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    let p0 = mean(window_f0);
    let p1 = mean(window_f1);
    Ok((u8::from(p1 > p0), soft_log_ratio(p1, p0)))
}

/// Coherent decision over one symbol: downconvert each branch by its key,
/// compare `|mean|^2`. Returns the bit and the log power ratio; ties to 0.
pub fn demod_coherent(
    window_f0: &[f64],
    window_f1: &[f64],
    keys: &crate::waveforms::KeyPair,
    f_s: f64,
) -> Result<(u8, f64)> {
    if window_f0.is_empty() || window_f1.is_empty() || window_f0.len() != window_f1.len() {
        return Err(Error::InvalidArgument(
            "demod windows must be non-empty and of equal length".into(),
        ));
    }
    let baseband_power = |w: &[f64], f: f64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in w.iter().enumerate() {
            acc += v * Complex64::from_polar(1.0, -2.0 * PI * f * i as f64 / f_s);
        }
        (acc / w.len() as f64).norm_sqr()
    };
    let p0 = baseband_power(window_f0, keys.f0());
    let p1 = baseband_power(window_f1, keys.f1());
    Ok((u8::from(p1 > p0), soft_log_ratio(p1, p0)))
}

/// A sync hypothesis: offset into the decision stream and its correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncCandidate {
    /// Offset in decision-stream positions.
    pub offset: usize,
    /// Correlation against the +-1 mapped header, in [-21, 21].
    pub correlation: i32,
}

/// Slide the 21-bit header correlator over `decisions` with the given
/// stride between consecutive header bits, returning every offset whose
/// correlation reaches `threshold`, sorted by descending correlation.
///
/// Decisions and header bits are mapped to +-1; a stride of one scans a
/// plain bit stream, while the frame decoder uses one symbol length of
/// per-sample decisions as the stride.
pub fn synchronize(decisions: &[u8], stride: usize, threshold: i32) -> Result<Vec<SyncCandidate>> {
    let header = sync_header();
    let span = (header.len() - 1) * stride;
    if stride == 0 || decisions.len() <= span {
        return Err(Error::InvalidArgument(format!(
            "decision stream of {} too short for header span {}",
            decisions.len(),
            span + 1
        )));
    }
    let signs: Vec<i32> = header.iter().map(|&b| 2 * b as i32 - 1).collect();
    let mut candidates = Vec::new();
    for offset in 0..decisions.len() - span {
        let mut corr = 0i32;
        for (m, s) in signs.iter().enumerate() {
            let d = 2 * decisions[offset + m * stride] as i32 - 1;
            corr += s * d;
        }
        if corr >= threshold {
            candidates.push(SyncCandidate {
                offset,
                correlation: corr,
            });
        }
    }
    candidates.sort_by(|a, b| b.correlation.cmp(&a.correlation).then(a.offset.cmp(&b.offset)));
    Ok(candidates)
}

/// Outcome of decoding one frame from a tap series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Sample offset of the frame start; `None` when synchronization failed.
    pub sync_offset: Option<usize>,
    /// Hamming distance between the decoded and expected header, out of 21.
    pub header_errors: usize,
    /// Decoded payload bits (empty on sync failure).
    pub payload_bits: Vec<u8>,
    /// Packet acceptance: header errors within one third and payload complete.
    pub accepted: bool,
    /// Per-payload-bit soft scores (log power ratios).
    pub soft_metrics: Vec<f64>,
}

impl DecodeResult {
    fn sync_failure() -> DecodeResult {
        DecodeResult {
            sync_offset: None,
            header_errors: sync_header().len(),
            payload_bits: Vec::new(),
            accepted: false,
            soft_metrics: Vec::new(),
        }
    }
}

/// Shared front-end state: filtered branches reduced to prefix sums, so any
/// symbol-window statistic is O(1) regardless of the sync offset.
pub(crate) struct FrontEnd {
    /// Prefix sums of squared branch samples (energy statistic).
    energy0: Vec<f64>,
    energy1: Vec<f64>,
    /// Prefix sums of downconverted branch samples (coherent statistic).
    rot0: Vec<Complex64>,
    rot1: Vec<Complex64>,
    /// Mean-removed raw power, for template alignment.
    centered: Vec<f64>,
    usable: std::ops::Range<usize>,
    sps: usize,
    len: usize,
}

impl FrontEnd {
    pub(crate) fn new(power: &[f64], config: &SystemConfig) -> Result<FrontEnd> {
        let rate = config.nominal_rate();
        let sps_exact = config.t_bc * rate;
        if (sps_exact - sps_exact.round()).abs() > 1e-6 || sps_exact.round() < 1.0 {
            return Err(Error::Configuration(format!(
                "t_bc must be an integer number of samples, got {sps_exact}"
            )));
        }
        let sps = sps_exact.round() as usize;

        // High-pass stage: remove the series mean so a strong static direct
        // path cannot leak through the finite FIR stopband at DC.
        let mean = power.iter().sum::<f64>() / power.len() as f64;
        let centered: Vec<f64> = power.iter().map(|v| v - mean).collect();

        let fir0 = design_bandpass(&FilterSpec::around(config.keys.f0()), rate)?;
        let fir1 = design_bandpass(&FilterSpec::around(config.keys.f1()), rate)?;
        let branch0 = filter_series(&centered, &fir0)?;
        let branch1 = filter_series(&centered, &fir1)?;
        let warm = branch0.warm_up;
        let len = power.len();

        let prefix_energy = |samples: &[f64]| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(samples.len() + 1);
            out.push(0.0);
            for v in samples {
                acc += v * v;
                out.push(acc);
            }
            out
        };
        // Downconvert by each key at the absolute sample index; a constant
        // phase against the window-relative convention cancels in |mean|.
        let prefix_rotated = |samples: &[f64], f: f64| {
            let step = Complex64::from_polar(1.0, -2.0 * PI * f / rate);
            let mut phase = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut out = Vec::with_capacity(samples.len() + 1);
            out.push(acc);
            for (i, v) in samples.iter().enumerate() {
                acc += v * phase;
                phase *= step;
                if (i + 1) % 4096 == 0 {
                    // Contain drift of the recurrence.
                    phase = Complex64::from_polar(1.0, -2.0 * PI * f * (i + 1) as f64 / rate);
                }
                out.push(acc);
            }
            out
        };

        Ok(FrontEnd {
            energy0: prefix_energy(&branch0.samples),
            energy1: prefix_energy(&branch1.samples),
            rot0: prefix_rotated(&branch0.samples, config.keys.f0()),
            rot1: prefix_rotated(&branch1.samples, config.keys.f1()),
            centered,
            usable: warm..len.saturating_sub(warm),
            sps,
            len,
        })
    }

    /// Correlate the mean-removed raw power against a template starting at
    /// `offset`. The band-pass transients bias window-power scores by a few
    /// samples, so fine alignment works on the unfiltered series.
    pub(crate) fn template_score(&self, offset: usize, template: &[f64]) -> f64 {
        let end = (offset + template.len()).min(self.len);
        let dot: f64 = self.centered[offset..end]
            .iter()
            .zip(template)
            .map(|(a, b)| a * b)
            .sum();
        dot.abs()
    }

    pub(crate) fn sps(&self) -> usize {
        self.sps
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Branch powers `(p0, p1)` for the symbol window starting at `start`.
    pub(crate) fn powers_at(&self, start: usize, detector: Detector) -> (f64, f64) {
        let a = start.max(self.usable.start);
        let b = (start + self.sps).min(self.usable.end);
        if a >= b {
            return (0.0, 0.0);
        }
        let n = (b - a) as f64;
        match detector {
            Detector::Energy => (
                (self.energy0[b] - self.energy0[a]) / n,
                (self.energy1[b] - self.energy1[a]) / n,
            ),
            Detector::Coherent => (
                ((self.rot0[b] - self.rot0[a]) / n).norm_sqr(),
                ((self.rot1[b] - self.rot1[a]) / n).norm_sqr(),
            ),
        }
    }

    /// Demodulate the symbol whose window starts at sample `start`.
    pub(crate) fn bit_at(&self, start: usize, detector: Detector) -> (u8, f64) {
        let (p0, p1) = self.powers_at(start, detector);
        (u8::from(p1 > p0), soft_log_ratio(p1, p0))
    }
}

/// Decode the first frame found in `series`.
///
/// The pipeline is tap power, per-key band-pass filtering, per-symbol
/// demodulation at every candidate sample offset within one frame period,
/// Barker-header correlation, best-offset frame extraction, and the
/// one-third header-error acceptance rule.
pub fn decode(series: &TapSeries, config: &SystemConfig, detector: Detector) -> Result<DecodeResult> {
    let power = tap_power(series)?;
    let front = FrontEnd::new(&power, config)?;
    let frame_period = frame_period_samples(config);
    Ok(decode_window(&front, config, detector, 0, frame_period))
}

/// Decode every frame in `series`, advancing past each synchronized frame.
pub fn decode_stream(
    series: &TapSeries,
    config: &SystemConfig,
    detector: Detector,
) -> Result<Vec<DecodeResult>> {
    let power = tap_power(series)?;
    let front = FrontEnd::new(&power, config)?;
    let frame_period = frame_period_samples(config);
    let frame_span = frame_symbols(config) * front.sps();
    let mut results = Vec::new();
    let mut pos = 0usize;
    while pos + (sync_header().len() - 1) * front.sps() < front.len() {
        let result = decode_window(&front, config, detector, pos, frame_period);
        let Some(offset) = result.sync_offset else { break };
        pos = offset + frame_span.max(1);
        results.push(result);
    }
    Ok(results)
}

/// Symbols per frame (header plus payload).
fn frame_symbols(config: &SystemConfig) -> usize {
    sync_header().len() + config.payload_len
}

/// Mean-removed header waveform sampled on the nominal uniform grid.
fn header_template(config: &SystemConfig, sps: usize) -> Vec<f64> {
    let header = sync_header();
    let rate = config.nominal_rate();
    let mut template: Vec<f64> = (0..header.len() * sps)
        .map(|i| {
            let m = i / sps;
            let local = (i - m * sps) as f64 / rate;
            crate::waveforms::bd_symbol(header[m], &config.keys, config.t_bc, local) as f64
        })
        .collect();
    let mean = template.iter().sum::<f64>() / template.len() as f64;
    for v in &mut template {
        *v -= mean;
    }
    template
}

/// One frame period (symbols plus sleep) in nominal samples.
pub(crate) fn frame_period_samples(config: &SystemConfig) -> usize {
    let t = frame_symbols(config) as f64 * config.t_bc + config.sleep_duration;
    (t * config.nominal_rate()).round() as usize
}

fn decode_window(
    front: &FrontEnd,
    config: &SystemConfig,
    detector: Detector,
    from: usize,
    period: usize,
) -> DecodeResult {
    let sps = front.sps();
    let header = sync_header();
    let header_span = (header.len() - 1) * sps;
    let search_end = (from + period).min(front.len().saturating_sub(header_span));
    if from >= search_end {
        return DecodeResult::sync_failure();
    }

    // Hard decision for a symbol starting at every sample offset.
    let bits: Vec<u8> = (from..search_end + header_span)
        .map(|s| front.bit_at(s, detector).0)
        .collect();
    let candidates = match synchronize(
        &bits[..(search_end - from) + header_span],
        sps,
        DEFAULT_SYNC_THRESHOLD,
    ) {
        Ok(c) => c,
        Err(_) => return DecodeResult::sync_failure(),
    };
    if candidates.is_empty() {
        return DecodeResult::sync_failure();
    }

    // Among equal correlations, refine to the offset whose raw power series
    // best matches the known header waveform sampled on the nominal grid;
    // this pins the sample-exact alignment inside a plateau of perfect hard
    // correlations.
    let top = candidates[0].correlation;
    let template = header_template(config, sps);
    let mut best = candidates[0].offset;
    let mut best_score = f64::NEG_INFINITY;
    for cand in candidates.iter().take_while(|c| c.correlation == top) {
        let score = front.template_score(from + cand.offset, &template);
        if score > best_score {
            best_score = score;
            best = cand.offset;
        }
    }
    let offset = from + best;

    let header_errors = header
        .iter()
        .enumerate()
        .filter(|(m, &b)| front.bit_at(offset + m * sps, detector).0 != b)
        .count();

    let mut payload_bits = Vec::with_capacity(config.payload_len);
    let mut soft_metrics = Vec::with_capacity(config.payload_len);
    let mut complete = true;
    for p in 0..config.payload_len {
        let start = offset + (header.len() + p) * sps;
        if start + sps > front.len() {
            complete = false;
            break;
        }
        let (bit, soft) = front.bit_at(start, detector);
        payload_bits.push(bit);
        soft_metrics.push(soft);
    }

    DecodeResult {
        sync_offset: Some(offset),
        header_errors,
        accepted: header_errors <= MAX_HEADER_ERRORS && complete,
        payload_bits,
        soft_metrics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{observe_modulation, Fidelity, PathGains};
    use crate::waveforms::{encode_frame, frame_waveform, KeyPair};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn keys() -> KeyPair {
        KeyPair::new(300.0, 650.0).unwrap()
    }

    #[test]
    fn tap_power_examples() {
        let series = TapSeries {
            instants: vec![0.0, 1.0],
            values: vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)],
            nominal_rate: 4000.0,
        };
        let y = tap_power(&series).unwrap();
        assert_eq!(y, vec![25.0, 0.0]);

        let empty = TapSeries {
            instants: vec![],
            values: vec![],
            nominal_rate: 4000.0,
        };
        assert!(tap_power(&empty).is_err());
    }

    #[test]
    fn bandpass_gain_at_center_and_dc() {
        let spec = FilterSpec::around(300.0);
        let fir = design_bandpass(&spec, 4000.0).unwrap();
        assert_eq!(fir.len(), DEFAULT_FIR_TAPS);

        let center_gain_db = 20.0 * frequency_response(&fir, 300.0, 4000.0).norm().log10();
        assert!(center_gain_db.abs() <= 0.5, "center gain {center_gain_db} dB");

        let dc_gain_db = 20.0 * frequency_response(&fir, 0.0, 4000.0).norm().log10();
        assert!(dc_gain_db < -40.0, "DC gain {dc_gain_db} dB");

        // -6 dB points near the band edges.
        for edge in [200.0, 400.0] {
            let g = 20.0 * frequency_response(&fir, edge, 4000.0).norm().log10();
            assert!((g + 6.0).abs() < 1.5, "edge {edge} gain {g} dB");
        }
    }

    #[test]
    fn bandpass_coefficients_are_symmetric() {
        let fir = design_bandpass(&FilterSpec::around(650.0), 4000.0).unwrap();
        let n = fir.len();
        for i in 0..n / 2 {
            assert!((fir[i] - fir[n - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn bandpass_rejects_bad_specs() {
        assert!(design_bandpass(
            &FilterSpec {
                center: 300.0,
                bandwidth: 200.0,
                taps: 256
            },
            4000.0
        )
        .is_err());
        assert!(design_bandpass(
            &FilterSpec {
                center: 50.0,
                bandwidth: 200.0,
                taps: 257
            },
            4000.0
        )
        .is_err());
        // Upper edge beyond Nyquist.
        assert!(design_bandpass(
            &FilterSpec {
                center: 1950.0,
                bandwidth: 200.0,
                taps: 257
            },
            4000.0
        )
        .is_err());
    }

    #[test]
    fn filter_impulse_reproduces_coefficients() {
        let fir = design_bandpass(&FilterSpec::around(300.0), 4000.0).unwrap();
        let half = (fir.len() - 1) / 2;
        let mut y = vec![0.0; 2048];
        let at = 1000usize;
        y[at] = 1.0;
        let out = filter_series(&y, &fir).unwrap();
        assert_eq!(out.warm_up, half);
        for (k, c) in fir.iter().enumerate() {
            let idx = at + k - half;
            assert!((out.samples[idx] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_preserves_center_tone_and_kills_dc() {
        let fir = design_bandpass(&FilterSpec::around(300.0), 4000.0).unwrap();
        let n = 4096;
        let tone: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 300.0 * i as f64 / 4000.0).cos())
            .collect();
        let out = filter_series(&tone, &fir).unwrap();
        let mid = &out.samples[out.warm_up..n - out.warm_up];
        let amp = mid.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let gain_db = 20.0 * amp.log10();
        assert!(gain_db.abs() < 0.5, "tone gain {gain_db} dB");

        let dc = vec![1.0; n];
        let out = filter_series(&dc, &fir).unwrap();
        let peak = out.samples[out.warm_up..n - out.warm_up]
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(peak < 1e-2, "DC residue {peak}");
    }

    #[test]
    fn demod_energy_examples() {
        let tone: Vec<f64> = (0..160)
            .map(|i| (2.0 * PI * 300.0 * i as f64 / 4000.0).cos())
            .collect();
        let silent = vec![0.0; 160];
        let (bit, soft) = demod_energy(&tone, &silent).unwrap();
        assert_eq!(bit, 0);
        assert!(soft < 0.0);

        let (bit, soft_swapped) = demod_energy(&silent, &tone).unwrap();
        assert_eq!(bit, 1);
        assert!((soft + soft_swapped).abs() < 1e-12, "antisymmetric soft");

        assert!(demod_energy(&[], &[]).is_err());
    }

    #[test]
    fn demod_coherent_tone_power() {
        // A unit cosine at the key leaves |mean|^2 ~= 1/4 after downconversion.
        let tone: Vec<f64> = (0..160)
            .map(|i| (2.0 * PI * 300.0 * i as f64 / 4000.0).cos())
            .collect();
        let silent = vec![0.0; 160];
        let k = keys();
        let (bit, _) = demod_coherent(&tone, &silent, &k, 4000.0).unwrap();
        assert_eq!(bit, 0);

        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in tone.iter().enumerate() {
            acc += v * Complex64::from_polar(1.0, -2.0 * PI * 300.0 * i as f64 / 4000.0);
        }
        let p = (acc / tone.len() as f64).norm_sqr();
        assert!((p - 0.25).abs() < 1e-9, "baseband power {p}");

        // Both windows zero: tie resolves to bit 0.
        let (bit, _) = demod_coherent(&silent, &silent, &k, 4000.0).unwrap();
        assert_eq!(bit, 0);

        // Swap symmetry.
        let (bit, _) = demod_coherent(&silent, &tone, &k, 4000.0).unwrap();
        assert_eq!(bit, 1);
    }

    #[test]
    fn synchronize_perfect_and_constant_streams() {
        let header = sync_header();
        let mut stream = vec![0u8; 40];
        stream[7..28].copy_from_slice(&header);
        let candidates = synchronize(&stream, 1, DEFAULT_SYNC_THRESHOLD).unwrap();
        assert_eq!(candidates[0].offset, 7);
        assert_eq!(candidates[0].correlation, 21);

        // A constant stream never reaches threshold: |7 - 14| = 7 < 14.
        let zeros = vec![0u8; 200];
        assert!(synchronize(&zeros, 1, DEFAULT_SYNC_THRESHOLD).unwrap().is_empty());
        let ones = vec![1u8; 200];
        assert!(synchronize(&ones, 1, DEFAULT_SYNC_THRESHOLD).unwrap().is_empty());
    }

    #[test]
    fn synchronize_false_lock_rate_on_noise() {
        // Binomial tail: P(corr >= 14) = P(at most 3 disagreements)
        // = (1 + 21 + 210 + 1330) / 2^21 ~= 7.45e-4, well under 1%.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000 + 20;
        let stream: Vec<u8> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..2u8)).collect();
        let candidates = synchronize(&stream, 1, DEFAULT_SYNC_THRESHOLD).unwrap();
        let rate = candidates.len() as f64 / 100_000.0;
        assert!(rate < 0.01, "false-lock rate {rate}");
        // And it should be loosely consistent with the binomial tail.
        assert!(rate < 3e-3, "false-lock rate {rate} far above binomial tail");
    }

    fn noiseless_series(payload: &[u8], lead: f64) -> (TapSeries, SystemConfig) {
        let mut cfg = SystemConfig::default();
        cfg.payload_len = payload.len();
        let frame = encode_frame(payload, &cfg);
        let wave = frame_waveform(&frame, &cfg.keys);
        let gains = PathGains::Static {
            h_d: Complex64::new(3.9e-4, 0.0),
            h_s: Complex64::new(1.8e-6, 0.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let total = lead + frame.airtime() + cfg.sleep_duration;
        let n_slots = (total / cfg.t_slot).ceil() as usize;
        let series = observe_modulation(
            &gains,
            |t| wave.level_at(t - lead),
            n_slots,
            &cfg,
            &mut rng,
            Fidelity::TapLevel,
        );
        (series, cfg)
    }

    #[test]
    fn decode_recovers_payload_noiselessly() {
        let payload = [1, 1, 0, 0, 1, 0, 1, 0];
        let lead = 0.1;
        let (series, cfg) = noiseless_series(&payload, lead);
        for detector in [Detector::Energy, Detector::Coherent] {
            let result = decode(&series, &cfg, detector).unwrap();
            assert!(result.accepted, "{detector} rejected the frame");
            assert_eq!(result.header_errors, 0, "{detector}");
            assert_eq!(result.payload_bits, payload, "{detector}");
            let expected_offset = (lead * cfg.nominal_rate()).round() as usize;
            assert_eq!(result.sync_offset, Some(expected_offset), "{detector}");
        }
    }

    #[test]
    fn detectors_agree_at_zero_noise() {
        let payload = [0, 1, 1, 0, 1, 0, 0, 1];
        let (series, cfg) = noiseless_series(&payload, 0.07);
        let a = decode(&series, &cfg, Detector::Energy).unwrap();
        let b = decode(&series, &cfg, Detector::Coherent).unwrap();
        assert_eq!(a.payload_bits, b.payload_bits);
        assert_eq!(a.sync_offset, b.sync_offset);
    }

    #[test]
    fn decode_is_scale_invariant() {
        let payload = [1, 0, 0, 1, 1, 1, 0, 0];
        let (series, cfg) = noiseless_series(&payload, 0.1);
        let c = Complex64::new(-1.3, 2.2);
        let scaled = TapSeries {
            instants: series.instants.clone(),
            values: series.values.iter().map(|v| v * c).collect(),
            nominal_rate: series.nominal_rate,
        };
        for detector in [Detector::Energy, Detector::Coherent] {
            let base = decode(&series, &cfg, detector).unwrap();
            let big = decode(&scaled, &cfg, detector).unwrap();
            assert_eq!(base.payload_bits, big.payload_bits);
            assert_eq!(base.sync_offset, big.sync_offset);
        }
    }

    #[test]
    fn decode_rejects_stronger_direct_path_unchanged() {
        // Adding a large real constant to the tap (a x100 stronger static
        // direct path) must not change any hard decision at zero noise.
        let payload = [1, 1, 0, 1, 0, 0, 1, 0];
        let (series, cfg) = noiseless_series(&payload, 0.1);
        let c = Complex64::new(3.9e-2, 0.0);
        let shifted = TapSeries {
            instants: series.instants.clone(),
            values: series.values.iter().map(|v| v + c).collect(),
            nominal_rate: series.nominal_rate,
        };
        for detector in [Detector::Energy, Detector::Coherent] {
            let base = decode(&series, &cfg, detector).unwrap();
            let big = decode(&shifted, &cfg, detector).unwrap();
            assert_eq!(base.payload_bits, big.payload_bits, "{detector}");
            assert_eq!(base.sync_offset, big.sync_offset, "{detector}");
        }
    }

    #[test]
    fn decode_rejects_pure_noise() {
        let mut cfg = SystemConfig::default();
        cfg.payload_len = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gains = PathGains::Static {
            h_d: Complex64::new(0.0, 0.0),
            h_s: Complex64::new(0.0, 0.0),
        };
        cfg.sigma_n2 = 1.0;
        let series = observe_modulation(&gains, |_| 0, 3000, &cfg, &mut rng, Fidelity::TapLevel);
        let result = decode(&series, &cfg, Detector::Energy).unwrap();
        assert!(!result.accepted);
    }

    #[test]
    fn corrupted_header_is_rejected() {
        // Flip 8 of 21 header symbols by rebuilding the frame bits directly.
        let mut cfg = SystemConfig::default();
        cfg.payload_len = 4;
        let mut frame = encode_frame(&[1, 0, 1, 0], &cfg);
        for m in [0usize, 2, 4, 6, 8, 10, 12, 14] {
            frame.sync_header[m] = 1 - frame.sync_header[m];
        }
        let wave = frame_waveform(&frame, &cfg.keys);
        let gains = PathGains::Static {
            h_d: Complex64::new(3.9e-4, 0.0),
            h_s: Complex64::new(1.8e-6, 0.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lead = 0.1;
        let total = lead + frame.airtime() + cfg.sleep_duration;
        let n_slots = (total / cfg.t_slot).ceil() as usize;
        let series = observe_modulation(
            &gains,
            |t| wave.level_at(t - lead),
            n_slots,
            &cfg,
            &mut rng,
            Fidelity::TapLevel,
        );
        let result = decode(&series, &cfg, Detector::Energy).unwrap();
        // Either sync fails outright or the header-error rule rejects it.
        assert!(!result.accepted);
        if result.sync_offset.is_some() {
            assert!(result.header_errors > MAX_HEADER_ERRORS);
        }
    }

    #[test]
    fn swapped_keys_complement_decisions() {
        // Relabeling keys and complementing the transmitted bits yields
        // complemented demod decisions.
        let tone300: Vec<f64> = (0..160)
            .map(|i| (2.0 * PI * 300.0 * i as f64 / 4000.0).cos())
            .collect();
        let tone650: Vec<f64> = (0..160)
            .map(|i| (2.0 * PI * 650.0 * i as f64 / 4000.0).cos())
            .collect();
        let k = keys();
        let swapped = KeyPair::new(300.0, 650.0).unwrap();

        let (bit, _) = demod_energy(&tone300, &tone650).unwrap();
        let (bit_sw, _) = demod_energy(&tone650, &tone300).unwrap();
        assert_eq!(bit, 1 - bit_sw);

        let (bit, _) = demod_coherent(&tone300, &tone650, &k, 4000.0).unwrap();
        let (bit_sw, _) = demod_coherent(&tone650, &tone300, &swapped, 4000.0).unwrap();
        assert_eq!(bit, 1 - bit_sw);
    }
}
