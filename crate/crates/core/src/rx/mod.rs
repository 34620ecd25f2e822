//! Receiver DSP: synchronization, equalization and symbol decisions.

mod decode;
mod onetap;
mod pairwise;
mod sync;
mod volterra;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use decode::{dco_decode, equalize_waveform, laco_bank_bins, laco_decode, laco_decode_ordered, laco_trace};
pub use onetap::{one_tap_apply, one_tap_estimate, OneTapBank};
pub use pairwise::pairwise_cancel;
pub use sync::synchronize;
pub use volterra::{
    quadratic_len, volterra_apply, volterra_train, EqualizerReport, VolterraConfig, VolterraEqualizer,
    VolterraWeights,
};

use crate::error::{Error, Result};
use crate::ofdm::{add_cp_burst, remove_cp_burst, Dft, Format, OfdmConfig, SymbolFrame};
use crate::scalar::{mean, Real};
use crate::tx::{raw_waveform, training_symbols, FramePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EqualizerKind {
    #[serde(rename = "one_tap")]
    OneTap,
    #[serde(rename = "volterra+one_tap", alias = "volterra")]
    VolterraOneTap,
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EqualizerKind::OneTap => "one_tap",
            EqualizerKind::VolterraOneTap => "volterra+one_tap",
        })
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_tap" => Ok(EqualizerKind::OneTap),
            "volterra+one_tap" | "volterra" => Ok(EqualizerKind::VolterraOneTap),
            _ => Err(Error::Config(format!("unknown equalizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxOptions<T> {
    pub equalizer: EqualizerKind,
    pub volterra: VolterraConfig<T>,
    /// Pairwise noise cancellation in the LACO layer loop of the time-domain
    /// path. The frequency-domain path never uses it.
    pub pairwise: bool,
}

impl<T: Real> Default for RxOptions<T> {
    fn default() -> Self {
        Self {
            equalizer: EqualizerKind::OneTap,
            volterra: VolterraConfig::default(),
            pairwise: true,
        }
    }
}

/// Result of receiving one burst.
#[derive(Debug, Clone)]
pub struct Reception<T> {
    /// Payload bits in transmit order.
    pub bits: Vec<u8>,
    /// Equalized payload symbols before slicing, columns as `cfg.data_subcarriers()`.
    pub symbols: SymbolFrame<T>,
    pub bank: OneTapBank<T>,
    pub report: Option<EqualizerReport<T>>,
}

/// Least-squares `y ≈ a·r + b`.
pub fn affine_fit<T: Real>(y: &[T], reference: &[T]) -> Result<(T, T)> {
    if y.len() != reference.len() || y.is_empty() {
        return Err(Error::Framing("affine fit needs equal, non-empty sequences".into()));
    }
    let (my, mr) = (mean(y), mean(reference));
    let mut cov = T::zero();
    let mut var = T::zero();
    for (&a, &b) in y.iter().zip(reference) {
        cov = cov + (a - my) * (b - mr);
        var = var + (b - mr) * (b - mr);
    }
    if !(var > T::zero()) {
        return Err(Error::Domain("reference has no variance".into()));
    }
    let a = cov / var;
    if !(a.abs() > T::min_positive_value()) || !a.is_finite() {
        return Err(Error::DecodeFailure("received training is uncorrelated with reference".into()));
    }
    Ok((a, my - a * mr))
}

/// Known training waveform in the receiver's reference domain, CP included.
pub fn training_reference<T: Real>(cfg: &OfdmConfig, plan: &FramePlan) -> Result<(SymbolFrame<T>, Vec<T>)> {
    let symbols = training_symbols(cfg, plan)?;
    let raw = raw_waveform(&symbols, cfg)?;
    let with_cp = add_cp_burst(&raw, cfg.fft_size, cfg.cp_len)?;
    Ok((symbols, with_cp))
}

/// Full receive chain on a burst that starts at its first training sample.
pub fn receive<T: Real>(
    y: &[T],
    cfg: &OfdmConfig,
    plan: &FramePlan,
    opts: &RxOptions<T>,
) -> Result<Reception<T>> {
    plan.validate(true)?;
    let (_, reference) = training_reference::<T>(cfg, plan)?;
    if y.len() < reference.len() {
        return Err(Error::Framing("capture shorter than training".into()));
    }
    match opts.equalizer {
        EqualizerKind::OneTap => receive_with(y, cfg, plan, None, false),
        EqualizerKind::VolterraOneTap => {
            let target = shaped_target(&y[..reference.len()], cfg, plan).map_err(|e| e.at("volterra"))?;
            let (eq, report) = VolterraEqualizer::train(&y[..reference.len()], &target, &opts.volterra)
                .map_err(|e| e.at("volterra"))?;
            let mut out = receive_with(y, cfg, plan, Some(&eq), opts.pairwise)?;
            out.report = Some(report);
            Ok(out)
        }
    }
}

/// Receive chain with a fixed (possibly absent) waveform equalizer.
pub fn receive_with<T: Real>(
    y: &[T],
    cfg: &OfdmConfig,
    plan: &FramePlan,
    stage: Option<&VolterraEqualizer<T>>,
    pairwise: bool,
) -> Result<Reception<T>> {
    let (train_syms, reference) = training_reference::<T>(cfg, plan)?;
    let burst_len = plan.n_frames * cfg.symbol_len();
    if y.len() < burst_len {
        return Err(Error::Framing(format!("capture has {} samples, burst needs {burst_len}", y.len())));
    }
    let y = &y[..burst_len];
    let y = match stage {
        Some(eq) => eq.apply(y),
        None => y.to_vec(),
    };
    let t = reference.len();
    let (a, b) = affine_fit(&y[..t], &reference).map_err(|e| e.at("front end"))?;
    let z: Vec<T> = y.iter().map(|&v| (v - b) / a).collect();

    let bank = estimate_bank(&z[..t], &reference, &train_syms, cfg).map_err(|e| e.at("one-tap"))?;
    let payload = &z[t..];
    match cfg.format {
        Format::Dco => {
            let (bits, symbols) = dco_decode(payload, cfg, &bank).map_err(|e| e.at("decode"))?;
            Ok(Reception { bits, symbols, bank, report: None })
        }
        Format::Laco => {
            let (bits, frames) = laco_decode(payload, cfg, &bank, pairwise).map_err(|e| e.at("decode"))?;
            Ok(Reception {
                bits,
                symbols: merge_layers(cfg, &frames),
                bank,
                report: None,
            })
        }
    }
}

/// Training target for the waveform stage, in the units of `y_train`.
///
/// On bank bins it is the reference passed circularly through the one-tap
/// channel estimate; elsewhere it is the received spectrum itself. The stage
/// then only has to remove what the bank cannot (nonlinearity, spill between
/// symbols) and is not pushed to invert or band-limit the channel, which a
/// short filter does with a long tail and so adds ISI when there is no CP.
pub fn shaped_target<T: Real>(y_train: &[T], cfg: &OfdmConfig, plan: &FramePlan) -> Result<Vec<T>> {
    let (train_syms, reference) = training_reference::<T>(cfg, plan)?;
    if y_train.len() != reference.len() {
        return Err(Error::Framing("training capture and reference differ in length".into()));
    }
    let (a, b) = affine_fit(y_train, &reference)?;
    let z: Vec<T> = y_train.iter().map(|&v| (v - b) / a).collect();
    let bank = estimate_bank(&z, &reference, &train_syms, cfg)?;
    let n = cfg.fft_size;
    let gains = bank.table(n / 2 + 1);
    let dft = Dft::new(n);
    let refs = remove_cp_burst(&reference, n, cfg.cp_len)?;
    let rxs = remove_cp_burst(&z, n, cfg.cp_len)?;
    let mut out = Vec::with_capacity(refs.len());
    for (r, y) in refs.chunks(n).zip(rxs.chunks(n)) {
        let (r, mut s) = (dft.forward(r), dft.forward(y));
        for (k, h) in gains.iter().enumerate() {
            if let Some(h) = h {
                s[k] = r[k] * h;
                if k != 0 && k != n / 2 {
                    s[n - k] = s[k].conj();
                }
            }
        }
        let shaped = dft.inverse_real_unchecked(&s);
        out.extend(shaped.into_iter().map(|v| v * a + b));
    }
    add_cp_burst(&out, n, cfg.cp_len)
}

fn estimate_bank<T: Real>(
    z: &[T],
    reference: &[T],
    train_syms: &SymbolFrame<T>,
    cfg: &OfdmConfig,
) -> Result<OneTapBank<T>> {
    let n = cfg.fft_size;
    let dft = Dft::new(n);
    let spectra = |x: &[T]| -> Result<Vec<Vec<_>>> {
        Ok(remove_cp_burst(x, n, cfg.cp_len)?.chunks(n).map(|s| dft.forward(s)).collect())
    };
    let rx = spectra(z)?;
    let frame = |s: &[Vec<_>], bins: &[usize]| SymbolFrame {
        subcarriers: bins.to_vec(),
        symbols: s.iter().flat_map(|row| bins.iter().map(move |&k| row[k])).collect(),
    };
    match cfg.format {
        Format::Dco => one_tap_estimate(&frame(&rx, &train_syms.subcarriers), train_syms),
        Format::Laco => {
            let tx = spectra(reference)?;
            let energy: Vec<T> = (0..=n / 2)
                .map(|k| tx.iter().map(|row| row[k].norm_sqr()).sum())
                .collect();
            let peak = energy.iter().copied().fold(T::zero(), T::max);
            let bins: Vec<usize> = laco_bank_bins(cfg)
                .into_iter()
                .filter(|&k| energy[k] > peak * T::lit(1e-9))
                .collect();
            one_tap_estimate(&frame(&rx, &bins), &frame(&tx, &bins))
        }
    }
}

/// Per-layer frames merged into one frame with `cfg.data_subcarriers()` columns.
fn merge_layers<T: Real>(cfg: &OfdmConfig, frames: &[SymbolFrame<T>]) -> SymbolFrame<T> {
    let rows = frames.first().map_or(0, |f| f.n_ofdm_symbols());
    let mut symbols = Vec::with_capacity(rows * cfg.data_subcarriers().len());
    for r in 0..rows {
        for spec in &cfg.layers {
            if let Some(f) = frames.iter().find(|f| f.subcarriers == spec.subcarriers) {
                symbols.extend_from_slice(f.row(r));
            }
        }
    }
    SymbolFrame {
        subcarriers: cfg.data_subcarriers(),
        symbols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{build_dco_burst, build_laco_burst, random_bits, TxParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn burst(cfg: &OfdmConfig, plan: &FramePlan, seed: u64) -> (Vec<u8>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = random_bits(&mut rng, plan.payload_bits(cfg));
        let p = TxParams::default();
        let b = match cfg.format {
            Format::Dco => build_dco_burst(&bits, cfg, plan, &p).unwrap(),
            Format::Laco => build_laco_burst(&bits, cfg, plan, &p, 0.05).unwrap(),
        };
        (bits, b.waveform.samples)
    }

    #[test]
    fn affine_fit_recovers_gain_and_offset() {
        let r: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = r.iter().map(|v| 2.5 * v - 0.75).collect();
        let (a, b) = affine_fit(&y, &r).unwrap();
        assert!((a - 2.5).abs() < 1e-12 && (b + 0.75).abs() < 1e-12);
        assert!(affine_fit(&y, &vec![1.0; 100]).is_err());
    }

    #[test]
    fn loopback_both_formats_with_gain_offset_and_noise() {
        let plan = FramePlan::new(40, 10, 99);
        for cfg in [OfdmConfig::standard_dco(), OfdmConfig::standard_laco()] {
            let (bits, x) = burst(&cfg, &plan, 1);
            let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 12.0).collect();
            let rec = receive(&y, &cfg, &plan, &RxOptions::default()).unwrap();
            assert_eq!(rec.bits, bits, "{}", cfg.format);
            assert_eq!(rec.symbols.subcarriers, cfg.data_subcarriers());

            let noise = Normal::new(0.0, 1e-3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let noisy: Vec<f64> = y.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let opts = RxOptions {
                equalizer: EqualizerKind::VolterraOneTap,
                ..RxOptions::default()
            };
            let rec = receive(&noisy, &cfg, &plan, &opts).unwrap();
            assert_eq!(rec.bits, bits, "{} volterra", cfg.format);
            assert!(rec.report.is_some());
        }
    }

    #[test]
    fn identity_stage_is_transparent() {
        let plan = FramePlan::new(20, 5, 3);
        for cfg in [OfdmConfig::standard_dco(), OfdmConfig::standard_laco()] {
            let (_, x) = burst(&cfg, &plan, 4);
            let noise = Normal::new(0.0, 0.02).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let y: Vec<f64> = x.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let plain = receive_with(&y, &cfg, &plan, None, true).unwrap();
            let ident = receive_with(&y, &cfg, &plan, Some(&VolterraEqualizer::identity(10)), true).unwrap();
            assert_eq!(plain.bits, ident.bits);
            assert_eq!(plain.symbols, ident.symbols);
        }
    }

    #[test]
    fn short_capture_rejected() {
        let plan = FramePlan::new(4, 2, 0);
        let cfg = OfdmConfig::standard_dco();
        assert!(receive(&vec![0.0; 300], &cfg, &plan, &RxOptions::default()).is_err());
    }

    #[test]
    fn equalizer_names_round_trip() {
        for k in [EqualizerKind::OneTap, EqualizerKind::VolterraOneTap] {
            assert_eq!(k.to_string().parse::<EqualizerKind>().unwrap(), k);
        }
        assert!("fancy".parse::<EqualizerKind>().is_err());
    }
}
