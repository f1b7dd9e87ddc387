//! System configuration: physical and protocol constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveforms::KeyPair;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fading model applied to the two propagation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    /// Fixed gains with the configured second moments.
    Static,
    /// Independent circularly-symmetric complex Gaussian draw per coherence block.
    RayleighBlock,
}

/// All physical and protocol constants of the simulated link.
///
/// Serialized form mirrors the field names below, so a JSON config document
/// is a flat object such as `{"f_c": 486e6, "w": 7.68e6, ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Downlink carrier frequency in Hz.
    pub f_c: f64,
    /// Modeled bandwidth in Hz.
    pub w: f64,
    /// Number of modeled subcarriers; the subcarrier spacing is `w / n_sc`.
    pub n_sc: usize,
    /// LTE slot length in seconds (two pilot-bearing symbols per slot).
    pub t_slot: f64,
    /// Offset of the second per-slot channel sample from the uniform grid, seconds.
    pub delta_t: f64,
    /// Backscatter symbol duration in seconds.
    pub t_bc: f64,
    /// FSK frequency keys.
    pub keys: KeyPair,
    /// Admissible band for the frequency keys in Hz.
    #[serde(default = "default_key_band")]
    pub key_band: (f64, f64),
    /// Distance from transmitter to receiver, meters.
    pub d_tx_rx: f64,
    /// Distance from transmitter to backscatter device, meters.
    pub d_tx_bd: f64,
    /// Distance from backscatter device to receiver, meters.
    pub d_bd_rx: f64,
    /// Linear reflection magnitude of the device in the `on` state.
    pub r_on: f64,
    /// Additive noise variance per pilot observation (linear).
    pub sigma_n2: f64,
    /// Fading model for the two composite paths.
    pub fading_mode: FadingMode,
    /// Coherence block length for `rayleigh-block` fading, seconds.
    /// `None` means one independent draw per simulated frame.
    #[serde(default)]
    pub fading_block_len: Option<f64>,
    /// Sleep interval appended after each frame, seconds.
    #[serde(default = "default_sleep")]
    pub sleep_duration: f64,
    /// Payload bits per frame.
    #[serde(default = "default_payload_len")]
    pub payload_len: usize,
    /// Base seed for random processes.
    pub rng_seed: u64,
}

fn default_payload_len() -> usize {
    8
}

fn default_key_band() -> (f64, f64) {
    (200.0, 1000.0)
}

fn default_sleep() -> f64 {
    0.1
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            f_c: 486e6,
            w: 7.68e6,
            // 21 resource blocks of 12 subcarriers.
            n_sc: 252,
            t_slot: 0.5e-3,
            delta_t: 35.6e-6,
            t_bc: 0.04,
            keys: KeyPair::new(300.0, 650.0).expect("default keys are valid"),
            key_band: default_key_band(),
            d_tx_rx: 125.0,
            d_tx_bd: 130.0,
            d_bd_rx: 10.0,
            // 6 dB reflection-power attenuation in the on state.
            r_on: 10f64.powf(-6.0 / 20.0),
            sigma_n2: 0.0,
            fading_mode: FadingMode::Static,
            fading_block_len: None,
            sleep_duration: default_sleep(),
            payload_len: default_payload_len(),
            rng_seed: 0,
        }
    }
}

impl SystemConfig {
    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Subcarrier spacing in Hz.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.w / self.n_sc as f64
    }

    /// Pilots per pilot-bearing OFDM symbol (every 6th subcarrier).
    pub fn pilots_per_symbol(&self) -> usize {
        self.n_sc / 6
    }

    /// Nominal channel sampling rate, 2 samples per slot.
    pub fn nominal_rate(&self) -> f64 {
        2.0 / self.t_slot
    }

    /// Backscatter symbol length in nominal channel samples.
    pub fn samples_per_symbol(&self) -> usize {
        (self.t_bc * self.nominal_rate()).round() as usize
    }

    /// Tap-level noise variance after combining the pilot observations.
    pub fn tap_noise_variance(&self) -> f64 {
        self.sigma_n2 / self.pilots_per_symbol() as f64
    }

    /// Check the structural invariants, returning a configuration error on violation.
    pub fn validate(&self) -> Result<()> {
        if !(self.f_c > 0.0) || !(self.w > 0.0) {
            return Err(Error::Configuration(
                "carrier frequency and bandwidth must be positive".into(),
            ));
        }
        if self.n_sc < 6 || self.n_sc % 6 != 0 {
            return Err(Error::Configuration(format!(
                "n_sc must be a positive multiple of 6, got {}",
                self.n_sc
            )));
        }
        if !(self.t_slot > 0.0) || !(self.t_bc > 0.0) {
            return Err(Error::Configuration(
                "slot and symbol durations must be positive".into(),
            ));
        }
        if !(self.delta_t >= 0.0 && self.delta_t < self.t_slot / 2.0) {
            return Err(Error::Configuration(format!(
                "delta_t must lie in [0, t_slot/2), got {}",
                self.delta_t
            )));
        }
        if !(self.d_tx_rx > 0.0 && self.d_tx_bd > 0.0 && self.d_bd_rx > 0.0) {
            return Err(Error::Configuration("all distances must be positive".into()));
        }
        if !(self.r_on > 0.0 && self.r_on <= 1.0) {
            return Err(Error::Configuration(format!(
                "r_on must lie in (0, 1], got {}",
                self.r_on
            )));
        }
        if !(self.sigma_n2 >= 0.0) {
            return Err(Error::Configuration("sigma_n2 must be non-negative".into()));
        }
        if !(self.sleep_duration >= 0.0) {
            return Err(Error::Configuration("sleep_duration must be non-negative".into()));
        }
        if let Some(len) = self.fading_block_len {
            if !(len > 0.0) {
                return Err(Error::Configuration("fading_block_len must be positive".into()));
            }
        }
        Ok(())
    }
}
