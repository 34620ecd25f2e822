use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 2] = ["--override", "frames.payload=20"];

fn optofdm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optofdm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run-link", "--override", "bogus.key=1"][..],
        &["run-link", "--override", "no_equals_sign"],
        &["run-link", "--config", "missing.toml"],
        &["run-link", "--override", "tx.drive_pp_ma=-1"],
        &["spectrum", "missing.owav"],
        &["run-link", "--format", "ofdm"],
    ] {
        let o = optofdm(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = optofdm(dir.path(), &["run-link", "--override", "rx.rop_dbm=-45", SMALL[0], SMALL[1]]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sync"));
}

#[test]
fn tx_gen_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |seed: &str, out: &str| {
        let o = optofdm(dir.path(), &["tx-gen", "--seed", seed, "--out", out, SMALL[0], SMALL[1]]);
        assert!(o.status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let (a, b, c) = (gen("5", "a.owav"), gen("5", "b.owav"), gen("6", "c.owav"));
    assert_eq!(&a[..4], b"OWAV");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn run_link_prints_parseable_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = optofdm(
        dir.path(),
        &["run-link", "--format", "laco", "--override", "equalizer=\"volterra+one_tap\"", SMALL[0], SMALL[1]],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table: toml::Table = stdout(&o).parse().unwrap();
    assert_eq!(table["bits_counted"].as_integer(), Some(2240));
    assert!(table["q_evm_db"].as_float().unwrap() > 10.0);
    assert_eq!(table["equalizer"]["w1"].as_array().unwrap().len(), 10);
}

#[test]
fn capture_equalize_spectrum_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = optofdm(dir.path(), &["run-link", "--capture", "rx.owav", SMALL[0], SMALL[1]]);
    assert!(o.status.success());

    let o = optofdm(dir.path(), &["equalize", "rx.owav", "--out", "eq.owav", "--report", "eq.txt", SMALL[0], SMALL[1]]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: toml::Table = std::fs::read_to_string(dir.path().join("eq.txt")).unwrap().parse().unwrap();
    assert_eq!(report["w2"].as_array().unwrap().len(), 55);
    assert!(report["final_mse"].as_float().unwrap() < report["initial_mse"].as_float().unwrap());

    let o = optofdm(dir.path(), &["spectrum", "eq.owav", "--nfft", "256"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frequency_hz,power_db"));
    assert_eq!(lines.count(), 129);
}

#[test]
fn sweep_csv_regenerates_from_itself() {
    let dir = tempfile::tempdir().unwrap();
    let grid = [
        "--override",
        "sweep.rop_list_dbm=[0.0, -6.0]",
        "--override",
        "sweep.equalizers=[\"one_tap\"]",
        SMALL[0],
        SMALL[1],
    ];
    let mut args = vec!["sweep-rop", "--seed", "9", "--out", "first.csv"];
    args.extend(grid);
    assert!(optofdm(dir.path(), &args).status.success());
    let o = optofdm(dir.path(), &["sweep-rop", "--config", "first.csv", "--out", "second.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(dir.path().join("first.csv")).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("second.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "format,rop_dbm,bias_ma,equalizer,q_evm_db,q_ber_db,ber,evm,bits,seed");
    assert_eq!(rows.len(), 1 + 2 * 2);
}

#[test]
fn optimize_bias_reports_a_bias_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = optofdm(dir.path(), &["optimize-bias", "--rop", "-4", SMALL[0], SMALL[1]]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table: toml::Table = stdout(&o).parse().unwrap();
    let bias = table["bias_ma"].as_float().unwrap();
    assert!((12.4..=32.4).contains(&bias), "{bias}");
    assert_eq!(table["rop_dbm"].as_float(), Some(-4.0));
}

#[test]
fn compare_formats_table_has_both_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let o = optofdm(
        dir.path(),
        &[
            "compare-formats",
            "--override",
            "sweep.rop_list_dbm=[-10.0]",
            "--override",
            "sweep.equalizers=[\"one_tap\"]",
            SMALL[0],
            SMALL[1],
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lengths: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(lengths, ["0", "30"]);
}
