//! Command-line front end for the ambient backscatter simulator.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on I/O and
//! parse errors. Verbosity is controlled through the `RUST_LOG`
//! environment variable only.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use ambc_core::cepstrum::{
    process_frame, synthesize_channel, BackscatterDevice, DeviceGroundTruth, DirectPath,
};
use ambc_core::config::SystemConfig;
use ambc_core::error::Error;
use ambc_core::harness::{
    decode_trace, emit_ber_table, run_ber_sweep_detailed, EmitFormat, SweepSpec,
};
use ambc_core::receiver::Detector;
use ambc_core::sampling::{predict_aliases, validate_keys, DEFAULT_L_HARM_MAX, DEFAULT_L_REP_MAX};
use ambc_core::waveforms::KeyPair;

#[derive(Parser)]
#[command(name = "ambc", about = "Ambient FSK backscatter link simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo BER sweep from a JSON spec.
    BerSweep {
        /// Sweep specification (JSON: SweepSpec with nested config).
        #[arg(long)]
        config: PathBuf,
        /// Output table path.
        #[arg(long)]
        out: PathBuf,
        /// Output format.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Predict the alias-line table of a frequency key.
    Spectrum {
        /// Key frequency in Hz.
        #[arg(long)]
        key: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional system config (JSON); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Synthesize a multi-device frame and emit its cepstrum.
    CepstrumDemo {
        /// Number of backscatter devices.
        #[arg(long)]
        devices: usize,
        /// Subcarriers per frame.
        #[arg(long)]
        n: usize,
        /// Per-subcarrier SNR in dB.
        #[arg(long)]
        snr_db: f64,
        /// Output CSV path; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode every frame in a recorded tap-series CSV.
    Decode {
        /// Tap-series CSV (`t_seconds,re,im`).
        #[arg(long)]
        trace: PathBuf,
        /// Detector: `energy` or `coherent`.
        #[arg(long)]
        detector: String,
        /// Optional system config (JSON); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a key pair against band, ratio, and alias-collision rules.
    ValidateKeys {
        /// Key for bit 0, Hz.
        #[arg(long)]
        f0: f64,
        /// Key for bit 1, Hz.
        #[arg(long)]
        f1: f64,
        /// Guard bandwidth around each key, Hz.
        #[arg(long, default_value_t = 100.0)]
        guard_bw: f64,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse { .. } => 3,
        _ => 2,
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<SystemConfig, Error> {
    let Some(path) = path else {
        return Ok(SystemConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let cfg: SystemConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Configuration(format!("bad config {}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BerSweep { config, out, format } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::io(config.display().to_string(), e))?;
            let spec = SweepSpec::from_json(&text)?;
            let format: EmitFormat = format.parse()?;
            let (table, erasures) = run_ber_sweep_detailed(&spec)?;
            emit_ber_table(&table, &out, format)?;
            for e in &erasures {
                if e.erased_trials > 0 {
                    eprintln!(
                        "note: {} dB {}: {} of {} packets erased",
                        e.snr_db, e.detector, e.erased_trials, e.trials
                    );
                }
            }
            println!("wrote {} rows to {}", table.rows.len(), out.display());
        }
        Command::Spectrum { key, out, config } => {
            let cfg = load_config(&config)?;
            let table = predict_aliases(key, &cfg, DEFAULT_L_HARM_MAX, DEFAULT_L_REP_MAX)?;
            table.write_csv(&out)?;
            println!("wrote {} lines to {}", table.entries.len(), out.display());
        }
        Command::CepstrumDemo { devices, n, snr_db, out } => {
            if n < 2 {
                return Err(Error::Configuration("n must be at least 2".into()));
            }
            // Well-spaced integer bins with decaying amplitude ratios.
            let truth = DeviceGroundTruth {
                direct: DirectPath {
                    amplitude: 1.0,
                    delay: 1.0e-6,
                    phase: 0.25,
                },
                devices: (0..devices)
                    .map(|k| BackscatterDevice {
                        amplitude: 0.1 / (1.0 + k as f64),
                        delay_offset: (3 + 4 * k) as f64 / (n as f64 * 15e3),
                        phase_offset: 0.7 * k as f64,
                        active: true,
                    })
                    .collect(),
            };
            let sigma_z2 = 10f64.powf(-snr_db / 10.0);
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
            let frame = synthesize_channel(&truth, n, 15e3, sigma_z2, &mut rng)?;
            let cepstrum = process_frame(&frame)?;
            std::fs::write(&out, cepstrum.to_csv_string())
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            let sidecar = out.with_extension("json");
            std::fs::write(&sidecar, cepstrum.sidecar_json())
                .map_err(|e| Error::io(sidecar.display().to_string(), e))?;
            println!(
                "wrote {} bins to {} (sidecar {})",
                n,
                out.display(),
                sidecar.display()
            );
        }
        Command::Decode { trace, detector, config } => {
            let cfg = load_config(&config)?;
            let detector: Detector = detector.parse()?;
            let results = decode_trace(&trace, &cfg, detector)?;
            println!("{}", serde_json::to_string_pretty(&results).expect("serializable"));
        }
        Command::ValidateKeys { f0, f1, guard_bw } => {
            let keys = KeyPair::new(f0, f1)?;
            let cfg = SystemConfig::default();
            let report = validate_keys(&keys, &cfg, guard_bw)?;
            print!("{report}");
            if !report.passed() {
                return Err(Error::Configuration("key pair failed validation".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
