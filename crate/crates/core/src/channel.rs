//! Two-path propagation model and CRS-based channel estimation.
//!
//! The received channel is the superposition of a direct composite and a
//! device-scattered composite gated by the backscatter waveform. Pilot
//! observations on the two pilot-bearing OFDM symbols per slot give one
//! least-squares channel estimate each, and the first tap of the estimate
//! is the only quantity the receiver consumes. Both composites are modeled
//! frequency-flat within the band, so the first tap captures everything.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{FadingMode, SystemConfig};
use crate::error::{Error, Result};
use crate::waveforms::BdWaveform;

/// Free-space path loss in linear scale: `(4 pi D / lambda)^2`.
pub fn fspl(d: f64, lambda: f64) -> Result<f64> {
    if !(d > 0.0) || !(lambda > 0.0) || !d.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "fspl requires positive finite distance and wavelength, got ({d}, {lambda})"
        )));
    }
    let ratio = 4.0 * std::f64::consts::PI * d / lambda;
    Ok(ratio * ratio)
}

/// Reflection coefficient of a load `z_x` against antenna impedance `z_a`:
/// `(z_x - conj(z_a)) / (z_x + conj(z_a))`.
pub fn reflection_coefficient(z_x: Complex64, z_a: Complex64) -> Result<Complex64> {
    let denom = z_x + z_a.conj();
    if denom.norm() < 1e-12 * (z_x.norm() + z_a.norm()).max(1.0) {
        return Err(Error::SingularImpedance);
    }
    Ok((z_x - z_a.conj()) / denom)
}

/// Complex gain processes of the direct and scattered composites.
///
/// Evaluation is a pure function of time, so trials may share a value
/// across threads freely.
#[derive(Debug, Clone)]
pub enum PathGains {
    /// Fixed gains carrying exactly the second moments of the path losses.
    Static {
        /// Direct composite gain.
        h_d: Complex64,
        /// Scattered composite gain.
        h_s: Complex64,
    },
    /// One independent circularly-symmetric draw per coherence block.
    RayleighBlock {
        /// Seed from which per-block draws are derived.
        seed: u64,
        /// Coherence block length in seconds.
        block_len: f64,
        /// sqrt(E|h_d|^2).
        sigma_d: f64,
        /// sqrt(E|h_s|^2).
        sigma_s: f64,
    },
}

/// splitmix64 step, used to derive per-block seeds.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2f64.sqrt()
}

impl PathGains {
    /// Gains `(h_d, h_s)` at time `t`.
    pub fn at(&self, t: f64) -> (Complex64, Complex64) {
        match self {
            PathGains::Static { h_d, h_s } => (*h_d, *h_s),
            PathGains::RayleighBlock {
                seed,
                block_len,
                sigma_d,
                sigma_s,
            } => {
                let block = (t / block_len).floor() as i64;
                let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ (block as u64)));
                let h_d = complex_gaussian(&mut rng) * *sigma_d;
                let h_s = complex_gaussian(&mut rng) * *sigma_s;
                (h_d, h_s)
            }
        }
    }

    /// Second moments `(E|h_d|^2, E|h_s|^2)`.
    pub fn second_moments(&self) -> (f64, f64) {
        match self {
            PathGains::Static { h_d, h_s } => (h_d.norm_sqr(), h_s.norm_sqr()),
            PathGains::RayleighBlock { sigma_d, sigma_s, .. } => {
                (sigma_d * sigma_d, sigma_s * sigma_s)
            }
        }
    }

    /// `E[conj(h_d) h_s]`; zero for independent Rayleigh composites.
    pub fn cross_moment(&self) -> Complex64 {
        match self {
            PathGains::Static { h_d, h_s } => h_d.conj() * h_s,
            PathGains::RayleighBlock { .. } => Complex64::new(0.0, 0.0),
        }
    }
}

/// Build the path-gain processes for `config`.
///
/// The direct composite has mean square `1 / L(d_tx_rx)`; the scattered one
/// `1 / (L(d_tx_bd) L(d_bd_rx))`, the product of the two hops. In
/// `rayleigh-block` mode the coherence block defaults to `frame_airtime`
/// unless the config pins a length, and the block seed is drawn from `rng`.
pub fn make_path_gains(
    config: &SystemConfig,
    frame_airtime: f64,
    rng: &mut impl Rng,
) -> Result<PathGains> {
    let lambda = config.wavelength();
    let loss_d = fspl(config.d_tx_rx, lambda)?;
    let loss_s = fspl(config.d_tx_bd, lambda)? * fspl(config.d_bd_rx, lambda)?;
    let sigma_d = (1.0 / loss_d).sqrt();
    let sigma_s = (1.0 / loss_s).sqrt();
    match config.fading_mode {
        FadingMode::Static => Ok(PathGains::Static {
            h_d: Complex64::new(sigma_d, 0.0),
            h_s: Complex64::new(sigma_s, 0.0),
        }),
        FadingMode::RayleighBlock => {
            let block_len = config.fading_block_len.unwrap_or(frame_airtime);
            if !(block_len > 0.0) {
                return Err(Error::Configuration(
                    "fading block length must be positive".into(),
                ));
            }
            Ok(PathGains::RayleighBlock {
                seed: rng.gen(),
                block_len,
                sigma_d,
                sigma_s,
            })
        }
    }
}

/// Channel sampling instants for `n_slots` slots: `{k t_slot, k t_slot + t_slot/2 + delta_t}`.
pub fn sample_instants(n_slots: usize, config: &SystemConfig) -> Vec<f64> {
    let mut instants = Vec::with_capacity(2 * n_slots);
    for k in 0..n_slots {
        let base = k as f64 * config.t_slot;
        instants.push(base);
        instants.push(base + config.t_slot / 2.0 + config.delta_t);
    }
    instants
}

/// Port-0 CRS pilot positions for the two pilot-bearing OFDM symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrsPilotMask {
    /// Pilot subcarriers in symbol 0: every 6th starting at 0.
    pub symbol0: Vec<usize>,
    /// Pilot subcarriers in symbol 4: offset by 3 from the symbol-0 set.
    pub symbol4: Vec<usize>,
}

impl CrsPilotMask {
    /// Pilot set used by channel sample `index` within a slot pair:
    /// even indices observe symbol 0, odd ones symbol 4.
    pub fn for_sample(&self, index: usize) -> &[usize] {
        if index % 2 == 0 {
            &self.symbol0
        } else {
            &self.symbol4
        }
    }
}

/// Port-0 pilot mask: pilots every 6th subcarrier, staggered by 3 between
/// symbols 0 and 4.
pub fn crs_pilot_mask(config: &SystemConfig) -> CrsPilotMask {
    CrsPilotMask {
        symbol0: (0..config.n_sc).step_by(6).collect(),
        symbol4: (3..config.n_sc).step_by(6).collect(),
    }
}

/// Timestamped first-tap channel estimates on the irregular CRS grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSeries {
    /// Strictly increasing sample instants, seconds.
    pub instants: Vec<f64>,
    /// Complex tap estimate per instant.
    pub values: Vec<Complex64>,
    /// Nominal (uniform-pretence) sampling rate, `2 / t_slot`.
    pub nominal_rate: f64,
}

impl TapSeries {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the series holds no samples.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV rendering with header `t_seconds,re,im`, one row per instant.
    /// Values are printed with 17 significant digits so a read-back
    /// reproduces them bit-exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t_seconds,re,im\n");
        for (t, v) in self.instants.iter().zip(&self.values) {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", t, v.re, v.im));
        }
        out
    }

    /// Write the CSV rendering to `path`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Parse the CSV rendering produced by [`TapSeries::to_csv_string`].
    pub fn from_csv_str(text: &str, nominal_rate: f64) -> Result<TapSeries> {
        let mut instants = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 {
                if line.trim() != "t_seconds,re,im" {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("expected header `t_seconds,re,im`, got `{line}`"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected 3 comma-separated fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("bad float `{s}`: {e}"),
                })
            };
            let t = parse(fields[0])?;
            let re = parse(fields[1])?;
            let im = parse(fields[2])?;
            if !t.is_finite() || !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "non-finite value".into(),
                });
            }
            if let Some(last) = instants.last() {
                if t <= *last {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("instants must be strictly increasing, got {t} after {last}"),
                    });
                }
            }
            instants.push(t);
            values.push(Complex64::new(re, im));
        }
        Ok(TapSeries {
            instants,
            values,
            nominal_rate,
        })
    }

    /// Read a series from a CSV file.
    pub fn read_csv(path: &std::path::Path, nominal_rate: f64) -> Result<TapSeries> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text, nominal_rate)
    }
}

/// How faithfully the pilot observation is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    /// Full pilot grid: LS estimates per pilot subcarrier, then the first
    /// tap of the IDFT across the pilot set.
    GridLevel,
    /// Direct tap synthesis with equivalent noise `sigma_n^2 / n_pilots`.
    TapLevel,
}

/// Known unit-magnitude pilot symbol for (sample index, subcarrier).
///
/// The sequence is fixed by construction so estimates are reproducible
/// independent of the trial rng.
fn pilot_symbol(sample_idx: usize, subcarrier: usize) -> Complex64 {
    let h = mix64((sample_idx as u64) << 32 ^ subcarrier as u64 ^ 0x5DEECE66D);
    let quadrant = (h >> 61) & 0x3;
    Complex64::from_polar(
        1.0,
        std::f64::consts::FRAC_PI_4 + std::f64::consts::FRAC_PI_2 * quadrant as f64,
    )
}

/// Observe the channel through the modulation `x` for `n_slots` slots and
/// emit the first-tap estimate series.
///
/// `x` is the device state as a function of time. At each sampling instant
/// the flat channel is `h_d(t) + x(t) r_on h_s(t)`; grid-level fidelity
/// forms per-pilot LS estimates and extracts tap zero, tap-level fidelity
/// adds the equivalent tap noise directly.
pub fn observe_modulation(
    gains: &PathGains,
    x: impl Fn(f64) -> u8,
    n_slots: usize,
    config: &SystemConfig,
    rng: &mut impl Rng,
    fidelity: Fidelity,
) -> TapSeries {
    let instants = sample_instants(n_slots, config);
    let mask = crs_pilot_mask(config);
    let n_pilots = config.pilots_per_symbol();
    let noiseless = config.sigma_n2 == 0.0;
    let tap_sigma = (config.sigma_n2 / n_pilots as f64 / 2.0).sqrt();
    let pilot_sigma = (config.sigma_n2 / 2.0).sqrt();

    let values: Vec<Complex64> = instants
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (h_d, h_s) = gains.at(t);
            let h_true = h_d + x(t) as f64 * config.r_on * h_s;
            match fidelity {
                Fidelity::TapLevel => {
                    if noiseless {
                        h_true
                    } else {
                        let z = Complex64::new(
                            rng.sample::<f64, _>(StandardNormal),
                            rng.sample::<f64, _>(StandardNormal),
                        ) * tap_sigma;
                        h_true + z
                    }
                }
                Fidelity::GridLevel => {
                    // LS per pilot, then tap 0 of the IDFT across the pilot
                    // set, which for a flat channel is the pilot average.
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &sc in mask.for_sample(j) {
                        let p = pilot_symbol(j, sc);
                        let y = if noiseless {
                            h_true * p
                        } else {
                            let z = Complex64::new(
                                rng.sample::<f64, _>(StandardNormal),
                                rng.sample::<f64, _>(StandardNormal),
                            ) * pilot_sigma;
                            h_true * p + z
                        };
                        acc += y / p;
                    }
                    acc / n_pilots as f64
                }
            }
        })
        .collect();

    TapSeries {
        instants,
        values,
        nominal_rate: config.nominal_rate(),
    }
}

/// Observe a backscatter frame, covering its full airtime.
///
/// Fails with a configuration error when the waveform's timings or keys do
/// not match `config`.
pub fn observe_and_estimate(
    gains: &PathGains,
    waveform: &BdWaveform,
    config: &SystemConfig,
    rng: &mut impl Rng,
    fidelity: Fidelity,
) -> Result<TapSeries> {
    if (waveform.frame.symbol_duration - config.t_bc).abs() > 1e-12 {
        return Err(Error::Configuration(format!(
            "waveform symbol duration {} does not match config t_bc {}",
            waveform.frame.symbol_duration, config.t_bc
        )));
    }
    if waveform.keys != config.keys {
        return Err(Error::Configuration(
            "waveform keys do not match config keys".into(),
        ));
    }
    let n_slots = (waveform.frame.airtime() / config.t_slot).ceil() as usize;
    Ok(observe_modulation(
        gains,
        |t| waveform.level_at(t),
        n_slots,
        config,
        rng,
        fidelity,
    ))
}

/// The two SNR definitions and the inter-path power gap.
#[derive(Debug, Clone, Copy)]
pub struct SnrReport {
    /// Total received pilot power over noise power, dB.
    pub snr1_db: f64,
    /// Backscatter-path power over noise power, dB; absent when the
    /// scattered term carries no power.
    pub snr2_db: Option<f64>,
    /// `10 log10` of direct-to-scattered received power ratio, dB.
    pub delta_l_db: f64,
}

/// Mean received pilot power `E|h_d + x r_on h_s|^2` with a 50% duty factor
/// on the device state.
pub fn mean_signal_power(config: &SystemConfig, gains: &PathGains) -> f64 {
    let (m_d, m_s) = gains.second_moments();
    let duty = 0.5;
    m_d + config.r_on * config.r_on * m_s * duty
        + 2.0 * config.r_on * gains.cross_moment().re * duty
}

/// Mean backscatter-path power `E|x r_on h_s|^2` with 50% duty.
pub fn mean_backscatter_power(config: &SystemConfig, gains: &PathGains) -> f64 {
    let (_, m_s) = gains.second_moments();
    0.5 * config.r_on * config.r_on * m_s
}

/// Compute SNR1 (total pilot power), SNR2 (backscatter power), and the
/// power gap between the two paths, all in dB.
pub fn snr_definitions(config: &SystemConfig, gains: &PathGains) -> SnrReport {
    let (m_d, m_s) = gains.second_moments();
    let p1 = mean_signal_power(config, gains);
    let p2 = mean_backscatter_power(config, gains);
    let snr1_db = 10.0 * (p1 / config.sigma_n2).log10();
    let snr2_db = if p2 > 0.0 {
        Some(10.0 * (p2 / config.sigma_n2).log10())
    } else {
        None
    };
    let delta_l_db =
        10.0 * m_d.log10() - 10.0 * m_s.log10() - 20.0 * config.r_on.log10();
    SnrReport {
        snr1_db,
        snr2_db,
        delta_l_db,
    }
}
