//! Python bindings exposing the simulator's main types and operations.
//!
//! The module mirrors the Rust API closely: configs travel as JSON
//! strings (the same documents the CLI accepts), spectra and cepstra as
//! lists of tuples, and complex values as `(re, im)` pairs.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ambc_core::cepstrum;
use ambc_core::channel;
use ambc_core::config::SystemConfig;
use ambc_core::error::Error;
use ambc_core::harness;
use ambc_core::receiver::{self, Detector};
use ambc_core::sampling;
use ambc_core::waveforms::{self, KeyPair};

fn to_py_err(err: Error) -> PyErr {
    match &err {
        Error::Io { .. } | Error::Parse { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_config(json: Option<&str>) -> PyResult<SystemConfig> {
    let Some(text) = json else {
        return Ok(SystemConfig::default());
    };
    let cfg: SystemConfig = serde_json::from_str(text)
        .map_err(|e| PyValueError::new_err(format!("bad config: {e}")))?;
    cfg.validate().map_err(to_py_err)?;
    Ok(cfg)
}

fn parse_detector(name: &str) -> PyResult<Detector> {
    name.parse().map_err(to_py_err)
}

/// Default system configuration as a JSON document.
#[pyfunction]
fn default_config_json() -> String {
    serde_json::to_string_pretty(&SystemConfig::default()).expect("serializable")
}

/// The fixed 21-bit synchronization header.
#[pyfunction]
fn sync_header() -> Vec<u8> {
    waveforms::sync_header()
}

/// 50%-duty square-wave level at time `t` for the given key frequency.
#[pyfunction]
fn square_wave(f_key: f64, t: f64) -> PyResult<u8> {
    waveforms::square_wave(f_key, t).map_err(to_py_err)
}

/// Header and payload bits of a frame around `payload`.
#[pyfunction]
#[pyo3(signature = (payload, config_json=None))]
fn encode_frame_bits(payload: Vec<u8>, config_json: Option<&str>) -> PyResult<Vec<u8>> {
    let cfg = parse_config(config_json)?;
    Ok(waveforms::encode_frame(&payload, &cfg).bits())
}

/// Free-space path loss `(4 pi d / lambda)^2`.
#[pyfunction]
fn fspl(d: f64, lambda: f64) -> PyResult<f64> {
    channel::fspl(d, lambda).map_err(to_py_err)
}

/// Reflection coefficient of load `z_x` against antenna `z_a`, as `(re, im)`.
#[pyfunction]
fn reflection_coefficient(z_x: (f64, f64), z_a: (f64, f64)) -> PyResult<(f64, f64)> {
    let g = channel::reflection_coefficient(
        Complex64::new(z_x.0, z_x.1),
        Complex64::new(z_a.0, z_a.1),
    )
    .map_err(to_py_err)?;
    Ok((g.re, g.im))
}

/// Channel sampling instants for `n_slots` slots.
#[pyfunction]
#[pyo3(signature = (n_slots, config_json=None))]
fn sample_instants(n_slots: usize, config_json: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg = parse_config(config_json)?;
    Ok(channel::sample_instants(n_slots, &cfg))
}

/// Sampling-train Fourier coefficient `s_l` as `(re, im)`.
#[pyfunction]
fn sampling_coeff(l: i64, delta_t: f64, t_slot: f64) -> (f64, f64) {
    let s = sampling::sampling_coeff(l, delta_t, t_slot);
    (s.re, s.im)
}

/// Irregularity weight `epsilon_l` as `(re, im)`.
#[pyfunction]
fn epsilon(l: i64, delta_t: f64, t_slot: f64) -> (f64, f64) {
    let e = sampling::epsilon(l, delta_t, t_slot);
    (e.re, e.im)
}

/// Predicted alias lines of a key: `(freq_hz, weight_re, weight_im, origin)`.
#[pyfunction]
#[pyo3(signature = (f_key, l_harm_max=None, l_rep_max=None, config_json=None))]
fn predict_aliases(
    f_key: f64,
    l_harm_max: Option<i64>,
    l_rep_max: Option<i64>,
    config_json: Option<&str>,
) -> PyResult<Vec<(f64, f64, f64, String)>> {
    let cfg = parse_config(config_json)?;
    let table = sampling::predict_aliases(
        f_key,
        &cfg,
        l_harm_max.unwrap_or(sampling::DEFAULT_L_HARM_MAX),
        l_rep_max.unwrap_or(sampling::DEFAULT_L_REP_MAX),
    )
    .map_err(to_py_err)?;
    Ok(table
        .entries
        .iter()
        .map(|l| (l.freq_hz, l.weight.re, l.weight.im, l.origin.as_str().to_string()))
        .collect())
}

/// Validate a key pair; returns the human-readable report and a pass flag.
#[pyfunction]
#[pyo3(signature = (f0, f1, guard_bw=100.0, config_json=None))]
fn validate_keys(
    f0: f64,
    f1: f64,
    guard_bw: f64,
    config_json: Option<&str>,
) -> PyResult<(bool, String)> {
    let cfg = parse_config(config_json)?;
    let keys = KeyPair::new(f0, f1).map_err(to_py_err)?;
    let report = sampling::validate_keys(&keys, &cfg, guard_bw).map_err(to_py_err)?;
    Ok((report.passed(), report.to_string()))
}

/// Run one frame trial; returns `(bits_sent, bit_errors, accepted)`.
#[pyfunction]
fn run_trial(config_json: &str, detector: &str, seed: u64) -> PyResult<(usize, usize, bool)> {
    let cfg = parse_config(Some(config_json))?;
    let det = parse_detector(detector)?;
    let out = harness::run_trial(&cfg, det, seed).map_err(to_py_err)?;
    Ok((out.bits_sent, out.bit_errors, out.accepted))
}

/// Run a BER sweep from a JSON spec; returns the table as CSV text.
#[pyfunction]
fn run_ber_sweep(spec_json: &str) -> PyResult<String> {
    let spec = harness::SweepSpec::from_json(spec_json).map_err(to_py_err)?;
    let table = harness::run_ber_sweep(&spec).map_err(to_py_err)?;
    Ok(table.to_csv_string())
}

/// Decode every frame in a tap-series CSV file; returns JSON text.
#[pyfunction]
#[pyo3(signature = (path, detector, config_json=None))]
fn decode_trace(path: &str, detector: &str, config_json: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config_json)?;
    let det = parse_detector(detector)?;
    let results =
        harness::decode_trace(std::path::Path::new(path), &cfg, det).map_err(to_py_err)?;
    serde_json::to_string(&results).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Decode a tap series passed as `(instants, values)` with values `(re, im)`.
#[pyfunction]
#[pyo3(signature = (instants, values, detector, config_json=None))]
fn decode_series(
    instants: Vec<f64>,
    values: Vec<(f64, f64)>,
    detector: &str,
    config_json: Option<&str>,
) -> PyResult<String> {
    let cfg = parse_config(config_json)?;
    let det = parse_detector(detector)?;
    let series = channel::TapSeries {
        instants,
        values: values.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
        nominal_rate: cfg.nominal_rate(),
    };
    let result = receiver::decode(&series, &cfg, det).map_err(to_py_err)?;
    serde_json::to_string(&result).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Five-term log-noise variance series at linear SNR `gamma`.
#[pyfunction]
fn lognoise_variance(gamma: f64) -> PyResult<f64> {
    cepstrum::lognoise_variance(gamma).map_err(to_py_err)
}

/// Synthesize a multi-device frame and run the cepstral pipeline.
///
/// `devices` is a list of `(amplitude_ratio, delay_offset_s, phase_offset)`
/// triples. Returns `(cepstrum_bins, beta0, beta1, rho)` where bins are
/// `(re, im)` pairs and `rho` is `None` for a noiseless frame.
#[pyfunction]
#[pyo3(signature = (devices, n, delta_f, sigma_z2, seed=0))]
fn cepstrum_pipeline(
    devices: Vec<(f64, f64, f64)>,
    n: usize,
    delta_f: f64,
    sigma_z2: f64,
    seed: u64,
) -> PyResult<(Vec<(f64, f64)>, f64, f64, Option<f64>)> {
    let truth = cepstrum::DeviceGroundTruth {
        direct: cepstrum::DirectPath {
            amplitude: 1.0,
            delay: 0.0,
            phase: 0.0,
        },
        devices: devices
            .iter()
            .map(|&(a, d, p)| cepstrum::BackscatterDevice {
                amplitude: a,
                delay_offset: d,
                phase_offset: p,
                active: true,
            })
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame =
        cepstrum::synthesize_channel(&truth, n, delta_f, sigma_z2, &mut rng).map_err(to_py_err)?;
    let processed = cepstrum::process_frame(&frame).map_err(to_py_err)?;
    let bins = processed.y.iter().map(|v| (v.re, v.im)).collect();
    let rho = processed.effective_snr.is_finite().then_some(processed.effective_snr);
    Ok((bins, processed.trend.0, processed.trend.1, rho))
}

#[pymodule]
fn ambc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config_json, m)?)?;
    m.add_function(wrap_pyfunction!(sync_header, m)?)?;
    m.add_function(wrap_pyfunction!(square_wave, m)?)?;
    m.add_function(wrap_pyfunction!(encode_frame_bits, m)?)?;
    m.add_function(wrap_pyfunction!(fspl, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(sample_instants, m)?)?;
    m.add_function(wrap_pyfunction!(sampling_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(predict_aliases, m)?)?;
    m.add_function(wrap_pyfunction!(validate_keys, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_ber_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(decode_trace, m)?)?;
    m.add_function(wrap_pyfunction!(decode_series, m)?)?;
    m.add_function(wrap_pyfunction!(lognoise_variance, m)?)?;
    m.add_function(wrap_pyfunction!(cepstrum_pipeline, m)?)?;
    Ok(())
}
