//! Link-level simulator and signal-processing library for ambient FSK
//! backscatter communication over LTE cell-specific reference signals.
//!
//! A passive backscatter device switches its antenna load at one of two
//! square-wave rates to encode bits onto the reflections of an ambient LTE
//! downlink. The receiver is an ordinary LTE channel estimator: the two
//! pilot-bearing OFDM symbols per 0.5 ms slot yield first-tap channel
//! estimates on a slightly irregular 4 kHz grid, and everything the
//! backscatter link needs lives in the power of that single tap.
//!
//! The crate covers the full chain plus its analysis tools:
//!
//! - [`waveforms`]: square-wave FSK symbols, Barker-headed frames, and the
//!   analytic symbol spectrum.
//! - [`channel`]: two-path propagation with free-space losses, Rayleigh or
//!   static fading, CRS pilot observation, and least-squares estimation
//!   down to the first-tap series.
//! - [`sampling`]: Fourier analysis of the irregular sampling train, alias
//!   line prediction, and frequency-key validation.
//! - [`receiver`]: tap power, per-key band-pass filtering, energy and
//!   coherent FSK detection, Barker synchronization, and packet accept or
//!   reject decisions.
//! - [`cepstrum`]: complex-cepstrum separation of multiple devices from
//!   frequency-domain channel estimates, with its SNR calculus.
//! - [`harness`]: Monte Carlo BER sweeps, trace decoding, and stable
//!   result emission.

pub mod cepstrum;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod receiver;
pub mod sampling;
pub mod waveforms;
