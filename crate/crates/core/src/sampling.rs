//! Spectral analysis of the irregular per-slot channel sampling.
//!
//! Each slot contributes two channel samples, the second one offset by
//! `delta_t` from the uniform half-slot grid. The sampling train is periodic
//! with the slot, so its Fourier-series coefficients `s_l` fully describe the
//! replica structure of any sampled signal: replicas on the 4 kHz grid keep
//! near-full weight while the irregularity adds extra lines weighted by
//! `epsilon_l`. [`predict_aliases`] turns that into a one-sided line table
//! for an on-off square wave at a given key, and [`validate_keys`] checks a
//! key pair against the resulting interference pattern.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::waveforms::KeyPair;

/// Fourier-series coefficient of the two-pulse-per-slot sampling train.
///
/// `s_l = (1/t_slot) * (1 + (-1)^l * exp(-i 2 pi (delta_t/t_slot) l))`
pub fn sampling_coeff(l: i64, delta_t: f64, t_slot: f64) -> Complex64 {
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    let angle = -2.0 * PI * (delta_t / t_slot) * l as f64;
    (Complex64::new(1.0, 0.0) + sign * Complex64::from_polar(1.0, angle)) / t_slot
}

/// Irregularity weight `epsilon_l = (-1)^l * (exp(-i 2 pi (delta_t/t_slot) l) - 1)`.
///
/// Satisfies `s_l = (2/t_slot) * [l even] + epsilon_l / t_slot` exactly, and
/// vanishes for all `l` when `delta_t = 0`.
pub fn epsilon(l: i64, delta_t: f64, t_slot: f64) -> Complex64 {
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    let angle = -2.0 * PI * (delta_t / t_slot) * l as f64;
    sign * (Complex64::from_polar(1.0, angle) - Complex64::new(1.0, 0.0))
}

/// Provenance of a predicted spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineOrigin {
    /// Harmonic of the key itself (no replica shift).
    Harmonic,
    /// Replica on the uniform-rate grid (even shift index).
    RegularReplica,
    /// Extra replica caused by the sampling irregularity (odd shift index).
    IrregularReplica,
}

impl LineOrigin {
    /// Stable lower-case name used in CSV exports.
    pub fn as_str(&self) -> &'static str {
        match self {
            LineOrigin::Harmonic => "harmonic",
            LineOrigin::RegularReplica => "regular-replica",
            LineOrigin::IrregularReplica => "irregular-replica",
        }
    }
}

/// One predicted spectral line of the sampled key waveform.
#[derive(Debug, Clone, Copy)]
pub struct AliasLine {
    /// Line frequency in Hz, within `[0, nominal_rate / 2]`.
    pub freq_hz: f64,
    /// Complex weight (one-sided line mass).
    pub weight: Complex64,
    /// Which mechanism produced the dominant contribution.
    pub origin: LineOrigin,
}

/// Predicted one-sided line spectrum of a sampled on-off key waveform.
#[derive(Debug, Clone)]
pub struct AliasTable {
    /// Lines sorted by frequency.
    pub entries: Vec<AliasLine>,
}

impl AliasTable {
    /// Entries sorted by decreasing weight magnitude.
    pub fn by_magnitude(&self) -> Vec<&AliasLine> {
        let mut refs: Vec<&AliasLine> = self.entries.iter().collect();
        refs.sort_by(|a, b| b.weight.norm().total_cmp(&a.weight.norm()));
        refs
    }

    /// The entry closest to `freq_hz`, if the table is non-empty.
    pub fn nearest(&self, freq_hz: f64) -> Option<&AliasLine> {
        self.entries
            .iter()
            .min_by(|a, b| (a.freq_hz - freq_hz).abs().total_cmp(&(b.freq_hz - freq_hz).abs()))
    }

    /// CSV rendering: `freq_hz,weight_re,weight_im,origin`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("freq_hz,weight_re,weight_im,origin\n");
        for line in &self.entries {
            out.push_str(&format!(
                "{:.6},{:.17e},{:.17e},{}\n",
                line.freq_hz,
                line.weight.re,
                line.weight.im,
                line.origin.as_str()
            ));
        }
        out
    }

    /// Write the CSV rendering to `path`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Default harmonic truncation for [`predict_aliases`].
pub const DEFAULT_L_HARM_MAX: i64 = 19;
/// Default replica truncation for [`predict_aliases`].
pub const DEFAULT_L_REP_MAX: i64 = 5;

/// Lines whose weight magnitude falls below this are dropped.
const WEIGHT_FLOOR: f64 = 1e-12;
/// Lines closer than this are summed coherently.
const MERGE_TOL_HZ: f64 = 1e-6;

/// Predict the spectral lines of an on-off square wave at `f_key` observed
/// through the irregular sampling process.
///
/// Harmonics run over `h = 0` (the DC content of the on-off wave) and odd
/// `|h| <= l_harm_max` with the two-sided wave coefficients; replica shifts
/// run over `|r| <= l_rep_max` slot harmonics weighted by the sampling
/// coefficients `s_r`. Only lines landing inside `[0, nominal_rate/2]` are
/// kept: each conjugate pair of the real line set is reported once through
/// its non-negative member, and content beyond the band is outside the
/// receiver's view. Coincident lines are summed coherently.
///
/// The wave is taken with its rising edge at t = 0; use
/// [`predict_aliases_delayed`] when the wave carries a known time offset
/// against the sampling grid.
pub fn predict_aliases(
    f_key: f64,
    config: &SystemConfig,
    l_harm_max: i64,
    l_rep_max: i64,
) -> Result<AliasTable> {
    predict_aliases_delayed(f_key, config, l_harm_max, l_rep_max, 0.0)
}

/// [`predict_aliases`] for a wave delayed by `wave_delay` seconds,
/// i.e. `x(t - wave_delay)` sampled on the standard grid. The delay rotates
/// each harmonic's coefficient and therefore changes the coherent sums at
/// coincident line frequencies; line positions are unaffected.
pub fn predict_aliases_delayed(
    f_key: f64,
    config: &SystemConfig,
    l_harm_max: i64,
    l_rep_max: i64,
    wave_delay: f64,
) -> Result<AliasTable> {
    if !(f_key > 0.0) || !f_key.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "f_key must be positive and finite, got {f_key}"
        )));
    }
    let t_slot = config.t_slot;
    let delta_t = config.delta_t;
    let slot_rate = 1.0 / t_slot;
    let band_top = config.nominal_rate() / 2.0;

    // Two-sided coefficients of the 50%-duty on-off wave: 1/2 at DC,
    // -i/(pi h) at odd harmonics, zero at even ones. A delayed wave
    // rotates harmonic h by exp(-i 2 pi h f_key delay).
    let wave_coeff = |h: i64| -> Option<Complex64> {
        let base = if h == 0 {
            Complex64::new(0.5, 0.0)
        } else if h % 2 != 0 {
            Complex64::new(0.0, -1.0 / (PI * h as f64))
        } else {
            return None;
        };
        Some(base * Complex64::from_polar(1.0, -2.0 * PI * h as f64 * f_key * wave_delay))
    };

    let mut lines: Vec<AliasLine> = Vec::new();
    for h in -l_harm_max..=l_harm_max {
        let Some(coeff) = wave_coeff(h) else { continue };
        for r in -l_rep_max..=l_rep_max {
            let freq = h as f64 * f_key + r as f64 * slot_rate;
            if freq < -MERGE_TOL_HZ || freq > band_top + MERGE_TOL_HZ {
                continue;
            }
            let weight = coeff * sampling_coeff(r, delta_t, t_slot) * t_slot;
            if weight.norm() < WEIGHT_FLOOR {
                continue;
            }
            let origin = if r == 0 {
                LineOrigin::Harmonic
            } else if r % 2 == 0 {
                LineOrigin::RegularReplica
            } else {
                LineOrigin::IrregularReplica
            };
            lines.push(AliasLine {
                freq_hz: freq.clamp(0.0, band_top),
                weight,
                origin,
            });
        }
    }

    // Coherent merge of coincident lines; the origin tag follows the
    // largest contributor.
    lines.sort_by(|a, b| {
        a.freq_hz
            .total_cmp(&b.freq_hz)
            .then(b.weight.norm().total_cmp(&a.weight.norm()))
    });
    let mut merged: Vec<AliasLine> = Vec::with_capacity(lines.len());
    for line in lines {
        match merged.last_mut() {
            Some(last) if (last.freq_hz - line.freq_hz).abs() <= MERGE_TOL_HZ => {
                last.weight += line.weight;
            }
            _ => merged.push(line),
        }
    }
    merged.retain(|l| l.weight.norm() >= WEIGHT_FLOOR);

    Ok(AliasTable { entries: merged })
}

/// Default relative-magnitude threshold above which an alias line is
/// considered a collision hazard.
pub const DEFAULT_ALIAS_REL_THRESHOLD: f64 = 0.08;

/// An alias line of one key falling close to the other key.
#[derive(Debug, Clone, Copy)]
pub struct KeyCollision {
    /// The key whose alias is at fault, Hz.
    pub from_key: f64,
    /// The key being interfered with, Hz.
    pub victim_key: f64,
    /// Frequency of the offending line, Hz.
    pub alias_freq_hz: f64,
    /// Magnitude relative to the offending key's fundamental line.
    pub relative_magnitude: f64,
}

/// Result of checking a key pair against band, ratio, and alias rules.
#[derive(Debug, Clone)]
pub struct KeyReport {
    /// Keys outside the admissible band.
    pub out_of_band: Vec<f64>,
    /// `Some(k)` when `f1 = k * f0` for integer `k`.
    pub integer_ratio: Option<u64>,
    /// Alias lines of one key landing within the guard band of the other.
    pub collisions: Vec<KeyCollision>,
    /// Relative-magnitude threshold used for the collision check.
    pub threshold: f64,
}

impl KeyReport {
    /// True when no check fired.
    pub fn passed(&self) -> bool {
        self.out_of_band.is_empty() && self.integer_ratio.is_none() && self.collisions.is_empty()
    }
}

impl std::fmt::Display for KeyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return writeln!(f, "key pair passes all checks");
        }
        for key in &self.out_of_band {
            writeln!(f, "out-of-band key: {key} Hz")?;
        }
        if let Some(k) = self.integer_ratio {
            writeln!(f, "integer-ratio keys: f1 = {k} * f0")?;
        }
        for c in &self.collisions {
            writeln!(
                f,
                "alias of {} Hz at {:.1} Hz ({:.1}% of its fundamental) hits the {} Hz key",
                c.from_key,
                c.alias_freq_hz,
                100.0 * c.relative_magnitude,
                c.victim_key
            )?;
        }
        Ok(())
    }
}

/// Check a key pair: band membership, integer ratio, and predicted alias
/// lines of either key falling within `guard_bw` of the other at a relative
/// magnitude above [`DEFAULT_ALIAS_REL_THRESHOLD`].
pub fn validate_keys(keys: &KeyPair, config: &SystemConfig, guard_bw: f64) -> Result<KeyReport> {
    if !(guard_bw > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "guard_bw must be positive, got {guard_bw}"
        )));
    }
    let threshold = DEFAULT_ALIAS_REL_THRESHOLD;
    let mut collisions = Vec::new();
    for (own, other) in [(keys.f0(), keys.f1()), (keys.f1(), keys.f0())] {
        let table = predict_aliases(own, config, DEFAULT_L_HARM_MAX, DEFAULT_L_REP_MAX)?;
        let fundamental = table
            .entries
            .iter()
            .find(|l| (l.freq_hz - own).abs() <= MERGE_TOL_HZ)
            .map(|l| l.weight.norm())
            .unwrap_or(1.0);
        for line in &table.entries {
            if (line.freq_hz - own).abs() <= MERGE_TOL_HZ {
                continue;
            }
            let rel = line.weight.norm() / fundamental;
            if rel >= threshold && (line.freq_hz - other).abs() <= guard_bw {
                collisions.push(KeyCollision {
                    from_key: own,
                    victim_key: other,
                    alias_freq_hz: line.freq_hz,
                    relative_magnitude: rel,
                });
            }
        }
    }
    Ok(KeyReport {
        out_of_band: keys.out_of_band(config.key_band),
        integer_ratio: keys.integer_ratio(),
        collisions,
        threshold,
    })
}
