//! One end-to-end link run: transmit, channel, capture, receive, score.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{attenuate_to_rop, dml_modulate, fiber_propagate, photodetect};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::metrics::MetricsRecord;
use crate::ofdm::{Format, OfdmConfig, RealWaveform, SymbolFrame, Unit};
use crate::rx::{
    receive, shaped_target, synchronize, training_reference, EqualizerKind, EqualizerReport, Reception,
    VolterraEqualizer,
};
use crate::tx::{
    build_dco_burst, build_laco_burst, drive_current, random_bits, reference_dco_scale, sync_preamble, TxBurst,
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const PAYLOAD_SALT: u64 = 1;
const NOISE_SALT: u64 = 2;
const PREAMBLE_SALT: u64 = 3;

/// Transmit side of one run, independent of bias, ROP and equalizer.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub format: Format,
    pub ofdm: OfdmConfig,
    pub burst: TxBurst<f64>,
    pub preamble: Vec<f64>,
    /// Full drive in volts: sync word, guard, burst, guard.
    pub volts: RealWaveform<f64>,
    pub seed: u64,
}

impl Transmission {
    pub fn new(cfg: &ExperimentConfig, format: Format, seed: u64) -> Result<Self> {
        let ofdm = cfg.ofdm_config(format)?;
        let plan = cfg.plan();
        let params = cfg.tx_params();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, PAYLOAD_SALT));
        let bits = random_bits(&mut rng, plan.payload_bits(&ofdm));
        let burst = match format {
            Format::Dco => build_dco_burst(&bits, &ofdm, &plan, &params),
            Format::Laco => {
                // same volts per unit symbol amplitude as the DCO build
                let dco = cfg.ofdm_config(Format::Dco)?;
                let scale = reference_dco_scale(&dco, &plan, &params, plan.training_seed)?;
                build_laco_burst(&bits, &ofdm, &plan, &params, scale)
            }
        }
        .map_err(|e| e.at("transmitter"))?;
        let preamble = sync_preamble(cfg.frames.preamble_len, mix_seed(seed, PREAMBLE_SALT));
        let guard = vec![0.0; cfg.frames.guard];
        let mut samples = preamble.clone();
        samples.extend_from_slice(&guard);
        samples.extend_from_slice(&burst.waveform.samples);
        samples.extend_from_slice(&guard);
        let volts = RealWaveform::new(samples, ofdm.sample_rate, Unit::Volts)?;
        Ok(Self {
            format,
            ofdm,
            burst,
            preamble,
            volts,
            seed,
        })
    }

    /// Payload symbols as transmitted.
    pub fn payload_symbols(&self) -> SymbolFrame<f64> {
        let w = self.burst.symbols.subcarriers.len();
        SymbolFrame {
            subcarriers: self.burst.symbols.subcarriers.clone(),
            symbols: self.burst.symbols.symbols[self.burst.training_frames * w..].to_vec(),
        }
    }

    /// Offset of the burst inside the drive waveform.
    pub fn burst_offset(&self) -> usize {
        self.preamble.len() + (self.volts.len() - self.preamble.len() - self.burst.waveform.len()) / 2
    }
}

/// Photocurrent for `tx` at the given bias and ROP.
pub fn capture(cfg: &ExperimentConfig, tx: &Transmission, bias_ma: f64, rop_dbm: f64) -> Result<RealWaveform<f64>> {
    let drive = drive_current(&tx.volts, &cfg.tx_params());
    let dml = cfg.dml_params().with_bias(bias_ma);
    let field = dml_modulate(&drive, &dml).map_err(|e| e.at("laser"))?;
    let field = fiber_propagate(&field, &cfg.fiber_params()).map_err(|e| e.at("fiber"))?;
    let field = attenuate_to_rop(&field, rop_dbm).map_err(|e| e.at("attenuator"))?;
    let mut fe = cfg.frontend(mix_seed(tx.seed, NOISE_SALT));
    fe.rop_dbm = rop_dbm;
    photodetect(&field, &fe).map_err(|e| e.at("photodetector"))
}

/// Index of the first burst sample in `rx`.
pub fn locate_burst(cfg: &ExperimentConfig, tx: &Transmission, rx: &[f64]) -> Result<usize> {
    let search = (4 * (tx.preamble.len() + cfg.frames.guard)).min(rx.len());
    let at = synchronize(&rx[..search], &tx.preamble).map_err(|e| e.at("sync"))?;
    let start = at + tx.burst_offset();
    if start >= rx.len() {
        return Err(Error::Framing("burst starts past the end of the capture".into()).at("sync"));
    }
    Ok(start)
}

/// Trains the waveform equalizer on the burst's training section, as the
/// receiver does. Returns the burst start alongside.
pub fn fit_equalizer(
    cfg: &ExperimentConfig,
    tx: &Transmission,
    rx: &[f64],
) -> Result<(usize, VolterraEqualizer<f64>, EqualizerReport<f64>)> {
    let start = locate_burst(cfg, tx, rx)?;
    let plan = cfg.plan();
    let (_, reference) = training_reference::<f64>(&tx.ofdm, &plan)?;
    let y = &rx[start..];
    if y.len() < reference.len() {
        return Err(Error::Framing("capture shorter than training".into()));
    }
    let train = &y[..reference.len()];
    let target = shaped_target(train, &tx.ofdm, &plan).map_err(|e| e.at("volterra"))?;
    let (eq, report) =
        VolterraEqualizer::train(train, &target, &cfg.rx_options(EqualizerKind::VolterraOneTap).volterra)
            .map_err(|e| e.at("volterra"))?;
    Ok((start, eq, report))
}

/// Locates the burst in `rx` and runs the receiver on it.
pub fn demodulate(
    cfg: &ExperimentConfig,
    tx: &Transmission,
    rx: &[f64],
    equalizer: EqualizerKind,
) -> Result<Reception<f64>> {
    let start = locate_burst(cfg, tx, rx)?;
    receive(&rx[start..], &tx.ofdm, &cfg.plan(), &cfg.rx_options(equalizer)).map_err(|e| e.at("receiver"))
}

/// Metrics of one reception against what `tx` sent.
pub fn score(tx: &Transmission, rec: &Reception<f64>) -> Result<MetricsRecord> {
    MetricsRecord::score(
        &rec.symbols,
        &tx.payload_symbols(),
        &rec.bits,
        &tx.burst.payload_bits,
        &tx.burst.waveform.samples,
    )
    .map_err(|e| e.at("metrics"))
}

/// Outcome of one link run.
#[derive(Debug, Clone)]
pub struct LinkResult {
    pub metrics: MetricsRecord,
    pub report: Option<EqualizerReport<f64>>,
}

/// Evaluates one (format, bias, ROP, equalizer) point with stream seed `seed`.
pub fn run_point(
    cfg: &ExperimentConfig,
    tx: &Transmission,
    bias_ma: f64,
    rop_dbm: f64,
    equalizer: EqualizerKind,
) -> Result<LinkResult> {
    let rx = capture(cfg, tx, bias_ma, rop_dbm)?;
    let rec = demodulate(cfg, tx, &rx.samples, equalizer)?;
    Ok(LinkResult {
        metrics: score(tx, &rec)?,
        report: rec.report,
    })
}

/// Full pipeline for the config's own format, bias, ROP, equalizer and seed.
pub fn run_link(cfg: &ExperimentConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let tx = Transmission::new(cfg, cfg.format, cfg.seed)?;
    Ok(run_point(cfg, &tx, cfg.dml.bias_ma, cfg.rx.rop_dbm, cfg.equalizer)?.metrics)
}
