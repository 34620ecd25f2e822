use optofdm::harness::config::ExperimentConfig;
use optofdm::harness::sweep::sweep_rop;
use optofdm::harness::{run_link, run_point, Transmission};
use optofdm::ofdm::Format;
use optofdm::rx::EqualizerKind;

fn ideal(extra: &str) -> ExperimentConfig {
    let text = format!(
        "dml.bandwidth_hz = 0.0\ndml.compression_per_ma = 0.0\ndml.alpha_chirp = 0.0\n\
         rx.adc_bits = 0\nfiber.length_km = 0.0\n{extra}"
    );
    ExperimentConfig::parse(&text, &[]).unwrap()
}

#[test]
fn noiseless_loopback_every_format_and_equalizer() {
    for format in ["dco", "laco"] {
        for eq in ["one_tap", "volterra+one_tap"] {
            let cfg = ideal(&format!(
                "format = \"{format}\"\nequalizer = \"{eq}\"\nrx.thermal_noise_rms_a = 0.0\ndml.bias_ma = 30.0\n"
            ));
            let m = run_link(&cfg).unwrap();
            assert_eq!(m.bit_errors, 0, "{format} {eq}");
            assert!(m.bits_counted >= 100_000);
        }
    }
}

#[test]
fn same_seed_same_record() {
    let cfg = ExperimentConfig::parse("format = \"laco\"\nequalizer = \"volterra+one_tap\"\nframes.payload = 40\n", &[])
        .unwrap();
    assert_eq!(run_link(&cfg).unwrap(), run_link(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_link(&cfg).unwrap(), run_link(&other).unwrap());
}

#[test]
fn zero_length_fiber_ignores_fiber_constants() {
    let a = ExperimentConfig::parse("fiber.length_km = 0.0\nframes.payload = 40\n", &[]).unwrap();
    let mut b = a.clone();
    b.fiber.dispersion_ps_nm_km = 40.0;
    b.fiber.loss_db_km = 3.0;
    assert_eq!(run_link(&a).unwrap(), run_link(&b).unwrap());
}

#[test]
fn laco_beats_dco_on_an_ideal_laser() {
    // each format at the lowest bias that keeps its drive above threshold
    let cfg = ideal("rx.rop_dbm = -8.0\n");
    let q = |format, bias| {
        let tx = Transmission::new(&cfg, format, 3).unwrap();
        run_point(&cfg, &tx, bias, cfg.rx.rop_dbm, EqualizerKind::OneTap).unwrap().metrics.q_evm_db
    };
    let threshold = cfg.dml.threshold_ma;
    let dco = q(Format::Dco, threshold + cfg.tx.drive_pp_ma / 2.0);
    let laco = q(Format::Laco, threshold);
    assert!(laco > dco, "LACO {laco:.2} dB, DCO {dco:.2} dB");
}

#[test]
fn q_never_rises_as_rop_falls() {
    let mut cfg = ExperimentConfig::default();
    cfg.sweep.equalizers = vec![EqualizerKind::OneTap];
    let rows = sweep_rop(&cfg).unwrap();
    for pair in rows.windows(2).filter(|w| w[0].format == w[1].format) {
        assert!(
            pair[1].q_evm_db <= pair[0].q_evm_db + 0.3,
            "{} {} dBm -> {} dBm: {:.2} -> {:.2}",
            pair[0].format,
            pair[0].rop_dbm,
            pair[1].rop_dbm,
            pair[0].q_evm_db,
            pair[1].q_evm_db
        );
    }
}
