//! Backscatter waveform generation: square-wave FSK symbols, framed packets
//! with Barker synchronization headers, and the analytic symbol spectrum.
//!
//! The device encodes a bit by switching its load at one of two nominal
//! rates (the frequency keys). A symbol is a rectangular-windowed slice of
//! the corresponding 50%-duty square wave; a frame is a fixed 21-bit sync
//! header followed by the payload, then a sleep interval with the device
//! held off.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Length-7 Barker code used to build the synchronization header.
pub const BARKER7: [u8; 7] = [0, 0, 0, 0, 1, 1, 0];

/// Normalized sinc: sin(pi x) / (pi x), with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// The two FSK switching rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyPair {
    f0: f64,
    f1: f64,
}

impl KeyPair {
    /// Build a key pair, enforcing `0 < f0 < f1`.
    ///
    /// Band membership and the integer-ratio condition are warning-level
    /// checks, reported by [`KeyPair::integer_ratio`] and the key validator
    /// rather than rejected here.
    pub fn new(f0: f64, f1: f64) -> Result<Self> {
        if !f0.is_finite() || !f1.is_finite() || !(0.0 < f0 && f0 < f1) {
            return Err(Error::InvalidArgument(format!(
                "keys must satisfy 0 < f0 < f1, got ({f0}, {f1})"
            )));
        }
        Ok(KeyPair { f0, f1 })
    }

    /// Key for bit 0, Hz.
    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Key for bit 1, Hz.
    pub fn f1(&self) -> f64 {
        self.f1
    }

    /// Key for the given bit value.
    pub fn for_bit(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.f0
        } else {
            self.f1
        }
    }

    /// If `f1/f0` is an integer (within a small relative tolerance),
    /// return that integer. Integer ratios alias badly after sampling.
    pub fn integer_ratio(&self) -> Option<u64> {
        let ratio = self.f1 / self.f0;
        let nearest = ratio.round();
        if nearest >= 1.0 && (ratio - nearest).abs() <= 1e-9 * ratio {
            Some(nearest as u64)
        } else {
            None
        }
    }

    /// Keys lying outside `band`, if any.
    pub fn out_of_band(&self, band: (f64, f64)) -> Vec<f64> {
        [self.f0, self.f1]
            .into_iter()
            .filter(|f| *f < band.0 || *f > band.1)
            .collect()
    }
}

/// 50%-duty square wave with a rising edge at t = 0.
///
/// Returns 1 iff the fractional part of `t * f_key` is below one half,
/// so the wave is periodic with period `1 / f_key` for all real `t`.
pub fn square_wave(f_key: f64, t: f64) -> Result<u8> {
    if !t.is_finite() || !f_key.is_finite() || f_key <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "square_wave requires finite t and f_key > 0, got ({f_key}, {t})"
        )));
    }
    Ok(square_wave_unchecked(f_key, t))
}

#[inline]
fn square_wave_unchecked(f_key: f64, t: f64) -> u8 {
    let phase = (t * f_key).rem_euclid(1.0);
    u8::from(phase < 0.5)
}

/// One rect-windowed FSK symbol: the key-`bit` square wave on `[0, t_bc)`, zero outside.
pub fn bd_symbol(bit: u8, keys: &KeyPair, t_bc: f64, t: f64) -> u8 {
    if t < 0.0 || t >= t_bc {
        0
    } else {
        square_wave_unchecked(keys.for_bit(bit), t)
    }
}

/// A backscatter frame: fixed synchronization header, payload, timings.
#[derive(Debug, Clone, PartialEq)]
pub struct BdFrame {
    /// Two Barker-7 sequences followed by an inverted one, 21 bits.
    pub sync_header: Vec<u8>,
    /// Payload bits.
    pub payload: Vec<u8>,
    /// Symbol duration T_BC in seconds.
    pub symbol_duration: f64,
    /// Device-off interval appended after the payload, seconds.
    pub sleep_duration: f64,
}

/// The fixed 21-bit header: Barker(7) ++ Barker(7) ++ NOT Barker(7).
pub fn sync_header() -> Vec<u8> {
    let mut header = Vec::with_capacity(21);
    header.extend_from_slice(&BARKER7);
    header.extend_from_slice(&BARKER7);
    header.extend(BARKER7.iter().map(|b| 1 - b));
    header
}

impl BdFrame {
    /// All transmitted bits, header first.
    pub fn bits(&self) -> Vec<u8> {
        let mut bits = self.sync_header.clone();
        bits.extend_from_slice(&self.payload);
        bits
    }

    /// Number of transmitted symbols (header plus payload).
    pub fn num_symbols(&self) -> usize {
        self.sync_header.len() + self.payload.len()
    }

    /// Total airtime: symbols plus the trailing sleep interval, seconds.
    pub fn airtime(&self) -> f64 {
        self.num_symbols() as f64 * self.symbol_duration + self.sleep_duration
    }
}

/// Assemble a frame around `payload`, copying the timings from `config`.
pub fn encode_frame(payload: &[u8], config: &SystemConfig) -> BdFrame {
    BdFrame {
        sync_header: sync_header(),
        payload: payload.to_vec(),
        symbol_duration: config.t_bc,
        sleep_duration: config.sleep_duration,
    }
}

/// Evaluator mapping frame-relative time to the device state in `{0, 1}`.
///
/// Symbol `m` occupies `[m * t_bc, (m+1) * t_bc)`; each symbol's square wave
/// restarts at phase zero on its boundary. The level is identically zero
/// before the frame and during the sleep interval.
#[derive(Debug, Clone)]
pub struct BdWaveform {
    /// The frame realized by this waveform.
    pub frame: BdFrame,
    /// Frequency keys in use.
    pub keys: KeyPair,
    bits: Vec<u8>,
}

impl BdWaveform {
    /// Device state at time `t` (seconds, relative to frame start).
    pub fn level_at(&self, t: f64) -> u8 {
        if t < 0.0 {
            return 0;
        }
        let m = (t / self.frame.symbol_duration).floor();
        let idx = m as usize;
        if m < 0.0 || idx >= self.bits.len() {
            // Sleep interval, or past the frame entirely.
            return 0;
        }
        let local = t - m * self.frame.symbol_duration;
        bd_symbol(self.bits[idx], &self.keys, self.frame.symbol_duration, local)
    }
}

/// Realize a frame as a time-domain waveform with the given keys.
pub fn frame_waveform(frame: &BdFrame, keys: &KeyPair) -> BdWaveform {
    BdWaveform {
        bits: frame.bits(),
        frame: frame.clone(),
        keys: *keys,
    }
}

/// Truncated Fourier transform of one FSK symbol at frequency `f`.
///
/// The symbol is the key-`bit` square wave windowed to `t_bc`; the series
/// runs over harmonics `|l| <= l_max` with weights `sinc(l/2)`, each smeared
/// by the window's `sinc((f - l/T_k) * t_bc)`. Truncation error decays as
/// `1 / l_max`. The series is real-valued; it is returned as a complex
/// amplitude for uniformity with the rest of the spectral API.
pub fn symbol_spectrum(f: f64, bit: u8, keys: &KeyPair, t_bc: f64, l_max: i64) -> Complex64 {
    let f_key = keys.for_bit(bit);
    let t_k = 1.0 / f_key;
    let mut acc = 0.0;
    for l in -l_max..=l_max {
        let harmonic = sinc(l as f64 / 2.0);
        if harmonic == 0.0 {
            continue;
        }
        acc += harmonic * sinc((f - l as f64 / t_k) * t_bc);
    }
    Complex64::new(t_bc / 2.0 * acc, 0.0)
}

/// Default truncation order for [`symbol_spectrum`].
pub const DEFAULT_SPECTRUM_L_MAX: i64 = 51;
