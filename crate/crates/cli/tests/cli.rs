//! End-to-end checks of the `ambc` binary: subcommands, file formats, and
//! exit codes.

use std::process::Command;

fn ambc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ambc"))
}

#[test]
fn validate_keys_exit_codes() {
    let ok = ambc()
        .args(["validate-keys", "--f0", "300", "--f1", "650"])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("passes"));

    let bad = ambc()
        .args(["validate-keys", "--f0", "300", "--f1", "900"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("integer-ratio"));
}

#[test]
fn spectrum_writes_alias_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aliases.csv");
    let run = ambc()
        .args(["spectrum", "--key", "300", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("freq_hz,weight_re,weight_im,origin\n"));
    assert!(text.contains("2000.000000"));
    assert!(text.contains("irregular-replica"));
}

#[test]
fn cepstrum_demo_writes_frame_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cepstrum.csv");
    let run = ambc()
        .args(["cepstrum-demo", "--devices", "2", "--n", "64", "--snr-db", "25", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("q,re,im\n"));
    assert_eq!(text.lines().count(), 65);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cepstrum.json")).unwrap())
            .unwrap();
    assert!(sidecar["rho"].is_number());
}

#[test]
fn ber_sweep_runs_from_json_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("sweep.json");
    let spec = serde_json::json!({
        "snr_axis": "snr1",
        "snr_points_db": [2.0],
        "trials_high_ber": 20,
        "trials_low_ber": 20,
        "ber_switch_threshold": 0.01,
        "detectors": ["coherent"],
        "master_seed": 7,
        "config": {
            "f_c": 486e6,
            "w": 7.68e6,
            "n_sc": 252,
            "t_slot": 0.5e-3,
            "delta_t": 35.6e-6,
            "t_bc": 0.04,
            "keys": {"f0": 300.0, "f1": 650.0},
            "d_tx_rx": 125.0,
            "d_tx_bd": 130.0,
            "d_bd_rx": 0.3,
            "r_on": 0.5011872336272722,
            "sigma_n2": 0.0,
            "fading_mode": "static",
            "payload_len": 4,
            "rng_seed": 0
        }
    });
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    let out = dir.path().join("ber.csv");
    let run = ambc()
        .args(["ber-sweep", "--config"])
        .arg(&spec_path)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("snr_db,detector,bits_sent,bit_errors,ber,ci_lo,ci_hi\n"));
    assert_eq!(text.lines().count(), 2);

    // Same spec, JSON output.
    let out_json = dir.path().join("ber.json");
    let run = ambc()
        .args(["ber-sweep", "--config"])
        .arg(&spec_path)
        .args(["--out"])
        .arg(&out_json)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(run.status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);

    // Missing spec file: I/O exit code.
    let missing = ambc()
        .args(["ber-sweep", "--config", "/nonexistent.json", "--out", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));

    // Malformed spec: config exit code.
    let bad_spec = dir.path().join("bad.json");
    std::fs::write(&bad_spec, "{\"snr_axis\": \"snr1\"}").unwrap();
    let bad = ambc()
        .args(["ber-sweep", "--config"])
        .arg(&bad_spec)
        .args(["--out", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn decode_reads_trace_and_reports_json() {
    use ambc_core::channel::{make_path_gains, observe_modulation, Fidelity};
    use ambc_core::config::SystemConfig;
    use ambc_core::waveforms::{encode_frame, frame_waveform};
    use rand::SeedableRng;

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SystemConfig::default();
    cfg.payload_len = 8;
    let payload = [1, 0, 1, 1, 0, 0, 1, 0];
    let frame = encode_frame(&payload, &cfg);
    let wave = frame_waveform(&frame, &cfg.keys);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let gains = make_path_gains(&cfg, frame.airtime(), &mut rng).unwrap();
    let lead = cfg.sleep_duration;
    let n_slots = ((lead + frame.airtime() + 0.1) / cfg.t_slot).ceil() as usize;
    let series = observe_modulation(
        &gains,
        |t| wave.level_at(t - lead),
        n_slots,
        &cfg,
        &mut rng,
        Fidelity::TapLevel,
    );
    let trace = dir.path().join("trace.csv");
    series.write_csv(&trace).unwrap();

    let run = ambc()
        .args(["decode", "--trace"])
        .arg(&trace)
        .args(["--detector", "coherent"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let results: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&run.stdout)).unwrap();
    let first = &results.as_array().unwrap()[0];
    assert_eq!(first["accepted"], serde_json::Value::Bool(true));
    assert_eq!(
        first["payload_bits"].as_array().unwrap().len(),
        payload.len()
    );

    // Unknown detector name: config exit code.
    let bad = ambc()
        .args(["decode", "--trace"])
        .arg(&trace)
        .args(["--detector", "zigzag"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    // Malformed trace: I/O exit code.
    let bad_trace = dir.path().join("bad.csv");
    std::fs::write(&bad_trace, "t_seconds,re,im\n0.0,oops,0.0\n").unwrap();
    let run = ambc()
        .args(["decode", "--trace"])
        .arg(&bad_trace)
        .args(["--detector", "energy"])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(3));
}
