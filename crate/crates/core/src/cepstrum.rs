//! Complex-cepstrum separation of multiple backscatter devices from
//! frequency-domain channel estimates.
//!
//! Each device multiplies the direct response by `1 + (a_k/a_0) e^{-i(w_n
//! dtau_k + dphi_k)} x_k`, so in the complex log the devices appear as
//! additive complex exponentials over the subcarrier index. After removing
//! the direct path's bias (mean of the real part) and linear phase trend
//! (least squares on the imaginary part), the inverse DFT concentrates
//! device `k` at quefrency bin `q_k = N df dtau_k`. The log-noise variance
//! series gives the effective SNR of the processed frame.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Direct-path component of the factored channel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DirectPath {
    /// Amplitude `a_0`.
    pub amplitude: f64,
    /// Absolute delay `tau_0`, seconds.
    pub delay: f64,
    /// Phase `phi_0`, radians.
    pub phase: f64,
}

/// One backscatter device in the factored channel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BackscatterDevice {
    /// Amplitude `a_k`; must be below the direct amplitude.
    pub amplitude: f64,
    /// Delay offset against the direct path, seconds.
    pub delay_offset: f64,
    /// Phase offset against the direct path, radians.
    pub phase_offset: f64,
    /// Device state `x_k` for this frame.
    pub active: bool,
}

/// Ground-truth channel description for synthesis and oracle checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceGroundTruth {
    /// The direct path.
    pub direct: DirectPath,
    /// Backscatter devices, `k = 1..=K`.
    pub devices: Vec<BackscatterDevice>,
}

impl DeviceGroundTruth {
    /// Quefrency bin of device `k` for an `n`-point frame at spacing `delta_f`:
    /// `n * delta_f * delay_offset`. Integer bins give leakage-free peaks.
    pub fn bin(&self, k: usize, n: usize, delta_f: f64) -> f64 {
        n as f64 * delta_f * self.devices[k].delay_offset
    }

    /// Check amplitude ordering: `a_0 > a_k > 0` for every device.
    pub fn validate(&self) -> Result<()> {
        if !(self.direct.amplitude > 0.0) {
            return Err(Error::InvalidArgument(
                "direct amplitude must be positive".into(),
            ));
        }
        for (k, d) in self.devices.iter().enumerate() {
            if !(d.amplitude > 0.0 && d.amplitude < self.direct.amplitude) {
                return Err(Error::InvalidArgument(format!(
                    "device {} amplitude {} must lie in (0, a_0)",
                    k + 1,
                    d.amplitude
                )));
            }
        }
        Ok(())
    }
}

/// Frequency-domain channel estimate for one frame.
#[derive(Debug, Clone)]
pub struct FreqChannelFrame {
    /// Channel value per subcarrier, `n = 0..N-1`.
    pub h: Vec<Complex64>,
    /// Subcarrier spacing, Hz.
    pub delta_f: f64,
    /// Additive noise variance (linear).
    pub sigma_z2: f64,
}

impl FreqChannelFrame {
    /// Number of subcarriers.
    pub fn len(&self) -> usize {
        self.h.len()
    }

    /// True when the frame holds no subcarriers.
    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// CSV rendering: `n,re,im`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,re,im\n");
        for (n, v) in self.h.iter().enumerate() {
            out.push_str(&format!("{},{:.17e},{:.17e}\n", n, v.re, v.im));
        }
        out
    }
}

/// Synthesize the factored multi-device frequency response plus noise.
///
/// `H[n] = a_0 e^{-i(w_n tau_0 + phi_0)} (1 + sum_k (a_k/a_0)
/// e^{-i(w_n dtau_k + dphi_k)} x_k) + z[n]` with `w_n = 2 pi n delta_f`.
pub fn synthesize_channel(
    truth: &DeviceGroundTruth,
    n: usize,
    delta_f: f64,
    sigma_z2: f64,
    rng: &mut impl Rng,
) -> Result<FreqChannelFrame> {
    truth.validate()?;
    if n < 2 || !(delta_f > 0.0) || !(sigma_z2 >= 0.0) {
        return Err(Error::InvalidArgument(
            "need n >= 2, positive delta_f, non-negative sigma_z2".into(),
        ));
    }
    let noise_sigma = (sigma_z2 / 2.0).sqrt();
    let h = (0..n)
        .map(|idx| {
            let w_n = 2.0 * PI * idx as f64 * delta_f;
            let mut ripple = Complex64::new(1.0, 0.0);
            for d in &truth.devices {
                if d.active {
                    ripple += d.amplitude / truth.direct.amplitude
                        * Complex64::from_polar(1.0, -(w_n * d.delay_offset + d.phase_offset));
                }
            }
            let direct = truth.direct.amplitude
                * Complex64::from_polar(1.0, -(w_n * truth.direct.delay + truth.direct.phase));
            let mut value = direct * ripple;
            if sigma_z2 > 0.0 {
                value += Complex64::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ) * noise_sigma;
            }
            value
        })
        .collect();
    Ok(FreqChannelFrame {
        h,
        delta_f,
        sigma_z2,
    })
}

/// Complex logarithm of the frame: real part `ln|H|` and imaginary part
/// unwrapped along the subcarrier axis so consecutive phase differences lie
/// in `(-pi, pi]`.
pub fn complex_log(frame: &FreqChannelFrame) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut l_i = Vec::with_capacity(frame.len());
    let mut l_q = Vec::with_capacity(frame.len());
    let mut prev = 0.0f64;
    let mut offset = 0.0f64;
    for (n, v) in frame.h.iter().enumerate() {
        if v.norm() == 0.0 {
            return Err(Error::SingularInput(format!(
                "zero channel entry at subcarrier {n}"
            )));
        }
        l_i.push(v.norm().ln());
        let raw = v.arg();
        if n > 0 {
            let mut diff = raw + offset - prev;
            while diff > PI {
                offset -= 2.0 * PI;
                diff -= 2.0 * PI;
            }
            while diff <= -PI {
                offset += 2.0 * PI;
                diff += 2.0 * PI;
            }
        }
        let unwrapped = raw + offset;
        prev = unwrapped;
        l_q.push(unwrapped);
    }
    Ok((l_i, l_q))
}

/// Five-term series for the log-noise second moment `E|ln(1 + z/H)|^2` at
/// linear SNR `gamma`: `1/g + 1/(2 g^2) + 2/(3 g^3) + 3/(2 g^4) + 24/(5 g^5)`.
///
/// Valid in the high-SNR regime; `gamma <= 1` is rejected.
pub fn lognoise_variance(gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::OutOfRegime(format!(
            "log-noise series needs gamma > 1, got {gamma}"
        )));
    }
    let g = 1.0 / gamma;
    Ok(g + g * g / 2.0 + 2.0 / 3.0 * g.powi(3) + 1.5 * g.powi(4) + 24.0 / 5.0 * g.powi(5))
}

/// Remove the arithmetic mean (the direct path's log-amplitude bias).
pub fn remove_mean(l_i: &[f64]) -> Vec<f64> {
    let mean = l_i.iter().sum::<f64>() / l_i.len() as f64;
    l_i.iter().map(|v| v - mean).collect()
}

/// Ordinary least-squares removal of the linear phase trend
/// `beta_0 + beta_1 n`. Returns the residual and the fitted coefficients.
pub fn detrend_linear(l_q: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = l_q.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = l_q.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, y) in l_q.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    let beta1 = sxy / sxx;
    let beta0 = mean_y - beta1 * mean_x;
    let residual = l_q
        .iter()
        .enumerate()
        .map(|(i, y)| y - beta0 - beta1 * i as f64)
        .collect();
    (residual, beta0, beta1)
}

/// Inverse DFT of `Y_I + i Y_Q` with `1/N` normalization:
/// `y[q] = (1/N) sum_n Y[n] e^{i 2 pi q n / N}`.
pub fn complex_cepstrum(y_i: &[f64], y_q: &[f64]) -> Result<Vec<Complex64>> {
    if y_i.len() != y_q.len() || y_i.is_empty() {
        return Err(Error::InvalidArgument(
            "component arrays must be non-empty and of equal length".into(),
        ));
    }
    let n = y_i.len();
    let mut buf: Vec<Complex64> = y_i
        .iter()
        .zip(y_q)
        .map(|(re, im)| Complex64::new(*re, *im))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    for v in &mut buf {
        *v /= n as f64;
    }
    Ok(buf)
}

/// Inverse DFT of the real part alone: the power-cepstrum-style baseline
/// used for the complex-vs-real SNR comparison.
pub fn real_cepstrum_baseline(y_i: &[f64]) -> Result<Vec<Complex64>> {
    let zeros = vec![0.0; y_i.len()];
    complex_cepstrum(y_i, &zeros)
}

/// Effective SNR: inverse of the mean log-noise variance across subcarriers.
pub fn effective_snr(sigma_xi2: &[f64]) -> Result<f64> {
    if sigma_xi2.is_empty() || sigma_xi2.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(
            "log-noise variance map must be non-empty and positive".into(),
        ));
    }
    let mean = sigma_xi2.iter().sum::<f64>() / sigma_xi2.len() as f64;
    Ok(1.0 / mean)
}

/// Per-device estimate extracted from the cepstrum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeviceEstimate {
    /// Quefrency bin examined.
    pub bin: usize,
    /// Complex amplitude estimate `y[q_k]` (amplitude ratio and phase).
    pub amplitude_re: f64,
    /// Imaginary part of the amplitude estimate.
    pub amplitude_im: f64,
    /// Post-processing SNR `Gamma_k = N |y[q_k]|^2 rho`.
    pub gamma: f64,
}

/// Device detection report: per-bin estimates plus the cepstral noise floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    /// One estimate per candidate bin, in input order.
    pub devices: Vec<DeviceEstimate>,
    /// Cepstral noise variance per bin, `1/(N rho)`.
    pub noise_var: f64,
}

/// Read device amplitudes at the candidate bins and convert them to
/// post-processing SNRs against the cepstral noise floor `1/(N rho)`.
pub fn detect_devices(
    y: &[Complex64],
    candidate_bins: &[usize],
    rho: f64,
    n: usize,
) -> Result<DetectionReport> {
    if !(rho > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(
            "detection needs positive rho and frame size".into(),
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for &q in candidate_bins {
        if q == 0 || q >= y.len() {
            return Err(Error::InvalidArgument(format!(
                "candidate bin {q} outside [1, {})",
                y.len()
            )));
        }
        if !seen.insert(q) {
            return Err(Error::InvalidArgument(format!("duplicate candidate bin {q}")));
        }
    }
    let devices = candidate_bins
        .iter()
        .map(|&q| {
            let amp = y[q];
            DeviceEstimate {
                bin: q,
                amplitude_re: amp.re,
                amplitude_im: amp.im,
                gamma: n as f64 * amp.norm_sqr() * rho,
            }
        })
        .collect();
    Ok(DetectionReport {
        devices,
        noise_var: 1.0 / (n as f64 * rho),
    })
}

/// Cepstral coefficients of one frame with trend and SNR metadata.
#[derive(Debug, Clone)]
pub struct CepstrumFrame {
    /// Quefrency coefficients, `q = 0..N-1`.
    pub y: Vec<Complex64>,
    /// Fitted linear phase trend `(beta_0, beta_1)`.
    pub trend: (f64, f64),
    /// Effective SNR of the frame (infinite for a noiseless frame).
    pub effective_snr: f64,
}

impl CepstrumFrame {
    /// CSV rendering: `q,re,im`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("q,re,im\n");
        for (q, v) in self.y.iter().enumerate() {
            out.push_str(&format!("{},{:.17e},{:.17e}\n", q, v.re, v.im));
        }
        out
    }

    /// JSON sidecar with the trend coefficients and effective SNR.
    pub fn sidecar_json(&self) -> String {
        serde_json::json!({
            "beta0": self.trend.0,
            "beta1": self.trend.1,
            "rho": if self.effective_snr.is_finite() { Some(self.effective_snr) } else { None },
        })
        .to_string()
    }
}

/// Full pipeline on one frame: complex log, mean removal, detrending,
/// inverse DFT, and the effective SNR from the measured per-subcarrier SNR.
pub fn process_frame(frame: &FreqChannelFrame) -> Result<CepstrumFrame> {
    let (l_i, l_q) = complex_log(frame)?;
    let y_i = remove_mean(&l_i);
    let (y_q, beta0, beta1) = detrend_linear(&l_q);
    let y = complex_cepstrum(&y_i, &y_q)?;
    let effective = if frame.sigma_z2 > 0.0 {
        let sigma_map: Result<Vec<f64>> = frame
            .h
            .iter()
            .map(|v| lognoise_variance(v.norm_sqr() / frame.sigma_z2))
            .collect();
        effective_snr(&sigma_map?)?
    } else {
        f64::INFINITY
    };
    Ok(CepstrumFrame {
        y,
        trend: (beta0, beta1),
        effective_snr: effective,
    })
}
