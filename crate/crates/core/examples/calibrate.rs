// scratch: locate the BER waterfall on the SNR1 axis for candidate geometries
use ambc_core::config::{FadingMode, SystemConfig};
use ambc_core::harness::{run_ber_sweep_detailed, SnrAxis, SweepSpec};
use ambc_core::receiver::Detector;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d_bd_rx: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.3);
    let trials: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(300);
    let mode = args.get(3).map(|s| s.as_str()).unwrap_or("static");

    let mut cfg = SystemConfig::default();
    cfg.d_bd_rx = d_bd_rx;
    cfg.fading_mode = if mode == "rayleigh" { FadingMode::RayleighBlock } else { FadingMode::Static };
    cfg.payload_len = 8;

    let spec = SweepSpec {
        snr_axis: SnrAxis::Snr1,
        snr_points_db: vec![-3.0, -1.0, 1.0, 3.0, 5.0, 7.0, 9.0],
        trials_high_ber: trials,
        trials_low_ber: trials,
        ber_switch_threshold: 0.01,
        detectors: vec![Detector::Energy, Detector::Coherent],
        config: cfg,
        master_seed: 2024,
    };
    let t0 = Instant::now();
    let (table, erasures) = run_ber_sweep_detailed(&spec).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("d_bd_rx={d_bd_rx} mode={mode} trials={trials} elapsed={dt:.1}s ({:.1} ms/trial)", 1000.0*dt/(14.0*trials as f64));
    for (row, er) in table.rows.iter().zip(&erasures) {
        println!("snr {:+5.1}  {:8}  ber {:.3e}  ({} / {} bits)  erased {}/{}",
            row.snr_db, row.detector.to_string(), row.ber, row.bit_errors, row.bits_sent, er.erased_trials, er.trials);
    }
}
