use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use optofdm::harness::io::{metrics_text, report_text, spectrum_csv};
use optofdm::harness::sweep::{comparison_table, write_csv};
use optofdm::harness::{
    capture, compare_formats, demodulate, fit_equalizer, optimize_bias, sweep_rop, ExperimentConfig,
    Transmission, WaveFile,
};
use optofdm::metrics::power_spectrum;
use optofdm::ofdm::Format;
use optofdm::Result;

#[derive(Parser)]
#[command(name = "optofdm", version, about = "Optical OFDM link simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Config file, or a sweep CSV carrying its config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent, except for waveforms
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// `key=value` config override, repeatable
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dco,
    Laco,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dco => Format::Dco,
            FormatArg::Laco => Format::Laco,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the transmit drive waveform (volts) as an OWAV file
    TxGen,
    /// Run one link point and print its metrics
    RunLink {
        /// Also save the received photocurrent as an OWAV file
        #[arg(long)]
        capture: Option<PathBuf>,
    },
    /// Sweep ROP (and bias) and write the CSV
    SweepRop,
    /// Golden-section bias search at one ROP
    OptimizeBias {
        /// Defaults to rx.rop_dbm
        #[arg(long, allow_hyphen_values = true)]
        rop: Option<f64>,
    },
    /// Bias-optimized DCO vs LACO table, back-to-back and over fiber
    CompareFormats,
    /// Train the Volterra equalizer on a captured waveform and write the equalized waveform
    Equalize {
        /// Capture written by `run-link --capture`
        input: PathBuf,
        /// Where to write the training report
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Power spectrum of a waveform file as CSV
    Spectrum {
        input: PathBuf,
        #[arg(long, default_value_t = 1024)]
        nfft: usize,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut overrides = c.overrides.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(f) = c.format {
        overrides.push(format!("format=\"{}\"", Format::from(f)));
    }
    match &c.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::parse("", &overrides),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn waveform_path(out: Option<&Path>, fallback: &str) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(fallback))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out.as_deref();
    match cli.cmd {
        Cmd::TxGen => {
            let tx = Transmission::new(&cfg, cfg.format, cfg.seed)?;
            let path = waveform_path(out, "tx.owav");
            WaveFile::real(&tx.volts.samples, tx.volts.sample_rate).save(&path)?;
            info!(
                "{} samples at {} Hz, {} payload bits -> {}",
                tx.volts.len(),
                tx.volts.sample_rate,
                tx.burst.payload_bits.len(),
                path.display()
            );
        }
        Cmd::RunLink { capture: save } => {
            let tx = Transmission::new(&cfg, cfg.format, cfg.seed)?;
            let rx = capture(&cfg, &tx, cfg.dml.bias_ma, cfg.rx.rop_dbm)?;
            if let Some(p) = save {
                WaveFile::real(&rx.samples, rx.sample_rate).save(&p)?;
            }
            let rec = demodulate(&cfg, &tx, &rx.samples, cfg.equalizer)?;
            let m = optofdm::harness::link::score(&tx, &rec)?;
            let mut text = metrics_text(&m);
            if let Some(r) = &rec.report {
                text.push_str("\n[equalizer]\n");
                text.push_str(&report_text(r, None));
            }
            emit(out, &text)?;
        }
        Cmd::SweepRop => {
            let rows = sweep_rop(&cfg)?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &cfg, &rows)?;
            let path = waveform_path(out, &cfg.output_path);
            std::fs::write(&path, buf)?;
            info!("{} rows -> {}", rows.len(), path.display());
        }
        Cmd::OptimizeBias { rop } => {
            let rop = rop.unwrap_or(cfg.rx.rop_dbm);
            let (bias, m) = optimize_bias(&cfg, rop)?;
            emit(out, &format!("bias_ma = {bias:?}\nrop_dbm = {rop:?}\n{}", metrics_text(&m)))?;
        }
        Cmd::CompareFormats => emit(out, &comparison_table(&compare_formats(&cfg)?))?,
        Cmd::Equalize { input, report } => {
            let wave = WaveFile::load(&input)?;
            let rx = wave.real_samples()?;
            let tx = Transmission::new(&cfg, cfg.format, cfg.seed)?;
            let (start, eq, rep) = fit_equalizer(&cfg, &tx, &rx)?;
            let equalized = eq.apply(&rx[start..]);
            let path = waveform_path(out, "equalized.owav");
            WaveFile::real(&equalized, wave.sample_rate).save(&path)?;
            let text = report_text(&rep, Some(&eq));
            match report {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            info!("burst at sample {start}, {} samples -> {}", equalized.len(), path.display());
        }
        Cmd::Spectrum { input, nfft } => {
            let wave = WaveFile::load(&input)?;
            let x = wave.real_samples()?;
            emit(out, &spectrum_csv(&power_spectrum(&x, nfft, wave.sample_rate)?))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
