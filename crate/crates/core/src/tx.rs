//! Transmitters: bits → QPSK → OFDM drive waveform for DCO and LACO bursts.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ofdm::{
    add_cp_burst, clip_negative_in_place, hermitian_spectrum, Dft, Format, OfdmConfig, RealWaveform,
    SymbolFrame, Unit,
};
use crate::scalar::{std_dev, Real};

/// Gray-mapped QPSK: `00 → (1+j)`, `01 → (−1+j)`, `11 → (−1−j)`, `10 → (1−j)`, all scaled by `1/√2`.
pub fn qpsk_mod<T: Real>(bits: &[u8]) -> Result<Vec<Complex<T>>> {
    if bits.len() % 2 != 0 {
        return Err(Error::Framing(format!("odd bit count {}", bits.len())));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::Framing(format!("bit value {b} is not 0 or 1")));
    }
    let a = T::FRAC_1_SQRT_2();
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            let re = if p[1] == 0 { a } else { -a };
            let im = if p[0] == 0 { a } else { -a };
            Complex::new(re, im)
        })
        .collect())
}

/// Hard-decision nearest-point demapper; inverse of [`qpsk_mod`].
pub fn qpsk_demod<T: Real>(symbols: &[Complex<T>]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [(s.im < T::zero()) as u8, (s.re < T::zero()) as u8])
        .collect()
}

/// Nearest constellation point.
pub fn qpsk_slice<T: Real>(s: Complex<T>) -> Complex<T> {
    let a = T::FRAC_1_SQRT_2();
    Complex::new(
        if s.re < T::zero() { -a } else { a },
        if s.im < T::zero() { -a } else { a },
    )
}

pub fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxParams<T> {
    /// DCO clip level in standard deviations.
    pub clip_sigma: T,
    /// Peak-to-peak drive current for a full-scale ±0.5 V signal.
    pub drive_pp_ma: T,
}

impl<T: Real> Default for TxParams<T> {
    fn default() -> Self {
        Self {
            clip_sigma: T::lit(4.0),
            drive_pp_ma: T::lit(20.0),
        }
    }
}

impl<T: Real> TxParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_sigma > T::zero()) || !(self.drive_pp_ma > T::zero()) {
            return Err(Error::Config("clip_sigma and drive_pp must be positive".into()));
        }
        Ok(())
    }
}

/// Burst layout: `training_frames` known symbols followed by payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramePlan {
    pub n_frames: usize,
    pub training_frames: usize,
    /// Seed of the training payload, shared with the receiver.
    pub training_seed: u64,
}

impl FramePlan {
    pub fn new(payload_frames: usize, training_frames: usize, training_seed: u64) -> Self {
        Self {
            n_frames: payload_frames + training_frames,
            training_frames,
            training_seed,
        }
    }

    pub fn payload_frames(&self) -> usize {
        self.n_frames.saturating_sub(self.training_frames)
    }

    pub fn payload_bits(&self, cfg: &OfdmConfig) -> usize {
        cfg.bits_per_frame() * self.payload_frames()
    }

    pub fn validate(&self, adaptive: bool) -> Result<()> {
        if self.training_frames > self.n_frames {
            return Err(Error::Config("more training frames than frames".into()));
        }
        if adaptive && self.training_frames == 0 {
            return Err(Error::Config("adaptive equalization needs ≥ 1 training frame".into()));
        }
        Ok(())
    }

    /// Known training bits regenerated identically by the receiver.
    pub fn training_bits(&self, cfg: &OfdmConfig) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.training_seed);
        random_bits(&mut rng, cfg.bits_per_frame() * self.training_frames)
    }
}

/// Generated drive waveform and everything the receiver needs to score it.
#[derive(Debug, Clone)]
pub struct TxBurst<T> {
    /// Volts-normalized drive, `N + cp` samples per frame, training first.
    pub waveform: RealWaveform<T>,
    /// Factor mapping the raw IDFT output onto volts.
    pub scale: T,
    /// Transmitted QPSK symbols (training + payload) on `cfg.data_subcarriers()`.
    pub symbols: SymbolFrame<T>,
    pub training_frames: usize,
    /// Payload bits only.
    pub payload_bits: Vec<u8>,
}

impl<T: Real> TxBurst<T> {
    pub fn training_samples(&self, cfg: &OfdmConfig) -> &[T] {
        &self.waveform.samples[..self.training_frames * cfg.symbol_len()]
    }
}

/// Rescales each occupied column of `frame` to unit average power.
pub fn normalize_per_subcarrier<T: Real>(frame: &SymbolFrame<T>) -> SymbolFrame<T> {
    let gains: Vec<T> = frame
        .subcarrier_powers()
        .into_iter()
        .map(|p| if p > T::zero() { T::one() / p.sqrt() } else { T::one() })
        .collect();
    let width = frame.subcarriers.len().max(1);
    let symbols = frame
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| s * gains[i % width])
        .collect();
    SymbolFrame {
        subcarriers: frame.subcarriers.clone(),
        symbols,
    }
}

fn assemble_symbols<T: Real>(
    payload_bits: &[u8],
    cfg: &OfdmConfig,
    plan: &FramePlan,
) -> Result<SymbolFrame<T>> {
    let expected = plan.payload_bits(cfg);
    if payload_bits.len() != expected {
        return Err(Error::Framing(format!(
            "{} payload bits supplied, plan carries {expected}",
            payload_bits.len()
        )));
    }
    let mut bits = plan.training_bits(cfg);
    bits.extend_from_slice(payload_bits);
    let frame = SymbolFrame::new(cfg.data_subcarriers(), qpsk_mod(&bits)?)?;
    Ok(normalize_per_subcarrier(&frame))
}

/// Unscaled DCO waveform (no CP) for QPSK rows on bins `1..=B`.
fn dco_raw<T: Real>(symbols: &SymbolFrame<T>, cfg: &OfdmConfig) -> Result<Vec<T>> {
    let dft = Dft::new(cfg.fft_size);
    let mut out = Vec::with_capacity(symbols.n_ofdm_symbols() * cfg.fft_size);
    for row in symbols.rows() {
        let spec = hermitian_spectrum(&symbols.subcarriers, row, cfg.fft_size)?;
        out.extend(dft.inverse_real(&spec)?);
    }
    Ok(out)
}

/// Clipped single-layer waveform (one OFDM symbol, no scaling).
pub fn clipped_layer_symbol<T: Real>(
    dft: &Dft<T>,
    subcarriers: &[usize],
    values: &[Complex<T>],
) -> Result<Vec<T>> {
    let spec = hermitian_spectrum(subcarriers, values, dft.len())?;
    let mut x = dft.inverse_real(&spec)?;
    clip_negative_in_place(&mut x);
    Ok(x)
}

/// Unscaled LACO waveform: per layer IDFT, clip, then sum in layer-index order.
fn laco_raw<T: Real>(symbols: &SymbolFrame<T>, cfg: &OfdmConfig) -> Result<Vec<T>> {
    let n = cfg.fft_size;
    let dft = Dft::new(n);
    let mut layers: Vec<_> = cfg.layers.iter().collect();
    layers.sort_by_key(|l| l.index);
    // column positions of each layer inside a frame row
    let cols: Vec<Vec<usize>> = layers
        .iter()
        .map(|l| {
            l.subcarriers
                .iter()
                .map(|k| symbols.subcarriers.iter().position(|s| s == k).expect("layer bin in frame"))
                .collect()
        })
        .collect();
    let mut out = vec![T::zero(); symbols.n_ofdm_symbols() * n];
    for (row, dst) in symbols.rows().zip(out.chunks_mut(n)) {
        for (layer, idx) in layers.iter().zip(&cols) {
            let vals: Vec<Complex<T>> = idx.iter().map(|&i| row[i]).collect();
            let x = clipped_layer_symbol(&dft, &layer.subcarriers, &vals)?;
            dst.iter_mut().zip(x).for_each(|(d, v)| *d = *d + v);
        }
    }
    Ok(out)
}

/// Unscaled transmit waveform without CP: the DCO IDFT before clipping, or
/// the LACO sum of clipped layers. This is the receiver's reference domain.
pub fn raw_waveform<T: Real>(symbols: &SymbolFrame<T>, cfg: &OfdmConfig) -> Result<Vec<T>> {
    match cfg.format {
        Format::Dco => dco_raw(symbols, cfg),
        Format::Laco => laco_raw(symbols, cfg),
    }
}

/// Known training symbols of `plan`, as placed at the head of every burst.
pub fn training_symbols<T: Real>(cfg: &OfdmConfig, plan: &FramePlan) -> Result<SymbolFrame<T>> {
    let frame = SymbolFrame::new(cfg.data_subcarriers(), qpsk_mod(&plan.training_bits(cfg))?)?;
    Ok(normalize_per_subcarrier(&frame))
}

/// DCO burst: QPSK on bins `1..=B`, symmetric clip at `±clip_sigma·σ`, and
/// affine scaling of that range onto `[−0.5, 0.5]` V.
pub fn build_dco_burst<T: Real>(
    payload_bits: &[u8],
    cfg: &OfdmConfig,
    plan: &FramePlan,
    params: &TxParams<T>,
) -> Result<TxBurst<T>> {
    if cfg.format != Format::Dco {
        return Err(Error::Config("build_dco_burst needs a DCO frame config".into()));
    }
    params.validate()?;
    let symbols = assemble_symbols(payload_bits, cfg, plan)?;
    let mut raw = dco_raw(&symbols, cfg)?;
    let sigma = std_dev(&raw);
    let scale = if sigma > T::zero() {
        T::lit(0.5) / (params.clip_sigma * sigma)
    } else {
        T::one()
    };
    let limit = params.clip_sigma * sigma;
    raw.iter_mut().for_each(|v| *v = v.max(-limit).min(limit) * scale);
    let samples = add_cp_burst(&raw, cfg.fft_size, cfg.cp_len)?;
    Ok(TxBurst {
        waveform: RealWaveform::new(samples, cfg.sample_rate, Unit::Volts)?,
        scale,
        symbols,
        training_frames: plan.training_frames,
        payload_bits: payload_bits.to_vec(),
    })
}

/// LACO burst scaled by the factor of a reference DCO build; non-negative.
pub fn build_laco_burst<T: Real>(
    payload_bits: &[u8],
    cfg: &OfdmConfig,
    plan: &FramePlan,
    params: &TxParams<T>,
    dco_scale: T,
) -> Result<TxBurst<T>> {
    if cfg.format != Format::Laco {
        return Err(Error::Config("build_laco_burst needs a LACO frame config".into()));
    }
    cfg.validate()?;
    params.validate()?;
    if !(dco_scale > T::zero()) {
        return Err(Error::Config("dco_scale must be positive".into()));
    }
    let symbols = assemble_symbols(payload_bits, cfg, plan)?;
    let mut raw = laco_raw(&symbols, cfg)?;
    raw.iter_mut().for_each(|v| *v = *v * dco_scale);
    let samples = add_cp_burst(&raw, cfg.fft_size, cfg.cp_len)?;
    Ok(TxBurst {
        waveform: RealWaveform::new(samples, cfg.sample_rate, Unit::Volts)?,
        scale: dco_scale,
        symbols,
        training_frames: plan.training_frames,
        payload_bits: payload_bits.to_vec(),
    })
}

/// Scale factor a DCO burst with unit per-subcarrier power would use.
///
/// Deterministic in `seed`; used to give LACO the same volts-per-unit factor.
pub fn reference_dco_scale<T: Real>(
    cfg: &OfdmConfig,
    plan: &FramePlan,
    params: &TxParams<T>,
    seed: u64,
) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = random_bits(&mut rng, plan.payload_bits(cfg));
    Ok(build_dco_burst(&bits, cfg, plan, params)?.scale)
}

/// Converts a volts-normalized drive into current: ±0.5 V spans `drive_pp_ma`.
pub fn drive_current<T: Real>(volts: &RealWaveform<T>, params: &TxParams<T>) -> RealWaveform<T> {
    RealWaveform {
        samples: volts.samples.iter().map(|&v| v * params.drive_pp_ma).collect(),
        sample_rate: volts.sample_rate,
        unit: Unit::Milliamps,
    }
}

/// Unipolar pseudo-random sync word: `len` chips of 0 or 0.5 V.
pub fn sync_preamble<T: Real>(len: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e5e_a11c_e000_0001);
    (0..len)
        .map(|_| if rng.random::<bool>() { T::lit(0.5) } else { T::zero() })
        .collect()
}
