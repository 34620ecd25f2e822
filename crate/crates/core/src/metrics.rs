//! Signal-quality metrics: EVM, BER, Q-factor, PAPR and spectra.

use num_complex::Complex;
use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::ofdm::{Dft, SymbolFrame};
use crate::scalar::Real;

/// RMS error vector magnitude relative to the reference RMS.
pub fn evm<T: Real>(rx: &[Complex<T>], reference: &[Complex<T>]) -> Result<f64> {
    if rx.is_empty() || rx.len() != reference.len() {
        return Err(Error::Domain(format!(
            "EVM needs equal, non-empty inputs ({} vs {})",
            rx.len(),
            reference.len()
        )));
    }
    let mut err = 0.0;
    let mut pow = 0.0;
    for (a, b) in rx.iter().zip(reference) {
        err += (a - b).norm_sqr().as_f64();
        pow += b.norm_sqr().as_f64();
    }
    if pow == 0.0 {
        return Err(Error::Domain("EVM reference has no power".into()));
    }
    Ok((err / pow).sqrt())
}

/// `−20·log10(evm)`.
pub fn q_from_evm(evm_rms: f64) -> Result<f64> {
    if !(evm_rms > 0.0 && evm_rms.is_finite()) {
        return Err(Error::Domain(format!("EVM {evm_rms} must be positive and finite")));
    }
    Ok(-20.0 * evm_rms.log10())
}

/// `20·log10(√2 · erfc⁻¹(2·ber))`, for `0 < ber < 0.5`.
pub fn q_from_ber(ber: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(Error::Domain(format!("BER {ber} outside (0, 0.5)")));
    }
    Ok(20.0 * (std::f64::consts::SQRT_2 * erfc_inv(2.0 * ber)).log10())
}

/// How a reported BER-based Q relates to the true value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QBound {
    Exact,
    /// No errors counted: Q at `ber = 1/bits`, a lower bound.
    LowerBound,
    /// `ber ≥ 0.5`: reported as 0 dB.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerCount {
    pub errors: usize,
    pub bits: usize,
}

impl BerCount {
    /// Unclamped error ratio.
    pub fn raw(&self) -> f64 {
        self.errors as f64 / self.bits as f64
    }

    /// Error ratio clamped to the reportable range `[0, 0.5]`.
    pub fn ber(&self) -> f64 {
        self.raw().min(0.5)
    }

    pub fn clamped(&self) -> bool {
        self.raw() > 0.5
    }

    /// BER-based Q with zero-error and saturation handling.
    pub fn q_db(&self) -> (f64, QBound) {
        let raw = self.raw();
        if self.errors == 0 {
            let floor = (1.0 / self.bits as f64).min(0.25);
            (q_from_ber(floor).expect("floor in range"), QBound::LowerBound)
        } else if raw >= 0.5 {
            (0.0, QBound::Clamped)
        } else {
            (q_from_ber(raw).expect("checked range"), QBound::Exact)
        }
    }
}

pub fn ber_count(rx_bits: &[u8], tx_bits: &[u8]) -> Result<BerCount> {
    if tx_bits.is_empty() || rx_bits.len() != tx_bits.len() {
        return Err(Error::Domain(format!(
            "BER needs equal, non-empty bit streams ({} vs {})",
            rx_bits.len(),
            tx_bits.len()
        )));
    }
    Ok(BerCount {
        errors: rx_bits.iter().zip(tx_bits).filter(|(a, b)| a != b).count(),
        bits: tx_bits.len(),
    })
}

/// `10·log10(max x² / mean x²)`.
pub fn papr<T: Real>(w: &[T]) -> Result<f64> {
    let mut peak = 0.0f64;
    let mut sum = 0.0;
    for &v in w {
        let p = (v * v).as_f64();
        peak = peak.max(p);
        sum += p;
    }
    if w.is_empty() || sum == 0.0 {
        return Err(Error::Domain("PAPR of an empty or all-zero waveform".into()));
    }
    Ok(10.0 * (peak / (sum / w.len() as f64)).log10())
}

/// SNR of every column, `10·log10(mean|ref|² / mean|rx − ref|²)`.
pub fn per_subcarrier_snr_db<T: Real>(rx: &SymbolFrame<T>, reference: &SymbolFrame<T>) -> Result<Vec<f64>> {
    if rx.subcarriers != reference.subcarriers || rx.symbols.len() != reference.symbols.len() {
        return Err(Error::Domain("SNR frames differ in shape".into()));
    }
    let w = rx.subcarriers.len();
    let mut sig = vec![0.0; w];
    let mut err = vec![0.0; w];
    for (r, t) in rx.rows().zip(reference.rows()) {
        for i in 0..w {
            sig[i] += t[i].norm_sqr().as_f64();
            err[i] += (r[i] - t[i]).norm_sqr().as_f64();
        }
    }
    Ok(sig.iter().zip(&err).map(|(s, e)| 10.0 * (s / e).log10()).collect())
}

/// One-sided averaged periodogram: `(frequency Hz, power dB)` for bins
/// `0..=nfft/2`. Non-overlapping rectangular segments; a trailing partial
/// segment is dropped.
pub fn power_spectrum<T: Real>(x: &[T], nfft: usize, sample_rate: f64) -> Result<Vec<(f64, f64)>> {
    if nfft < 2 || x.len() < nfft {
        return Err(Error::Domain(format!("{} samples cannot fill an {nfft}-point segment", x.len())));
    }
    let dft = Dft::new(nfft);
    let mut acc = vec![0.0; nfft / 2 + 1];
    let segments = x.len() / nfft;
    for seg in x.chunks_exact(nfft) {
        for (a, s) in acc.iter_mut().zip(dft.forward(seg)) {
            *a += s.norm_sqr().as_f64();
        }
    }
    let norm = (segments * nfft * nfft) as f64;
    Ok(acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let f = k as f64 * sample_rate / nfft as f64;
            (f, 10.0 * (p / norm).max(1e-300).log10())
        })
        .collect())
}

/// Everything scored for one received burst.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub evm_rms: f64,
    pub ber: f64,
    pub q_evm_db: f64,
    pub q_ber_db: f64,
    pub q_ber_bound: QBound,
    pub papr_db: f64,
    pub per_subcarrier_snr_db: Vec<f64>,
    pub bits_counted: usize,
    pub bit_errors: usize,
}

impl MetricsRecord {
    /// Scores equalized symbols and decided bits against what was sent.
    pub fn score<T: Real>(
        rx_symbols: &SymbolFrame<T>,
        tx_symbols: &SymbolFrame<T>,
        rx_bits: &[u8],
        tx_bits: &[u8],
        tx_waveform: &[T],
    ) -> Result<Self> {
        let evm_rms = evm(&rx_symbols.symbols, &tx_symbols.symbols)?;
        let count = ber_count(rx_bits, tx_bits)?;
        let (q_ber_db, q_ber_bound) = count.q_db();
        Ok(Self {
            evm_rms,
            ber: count.ber(),
            // a perfect match has no finite Q; report the f64 ceiling instead
            q_evm_db: q_from_evm(evm_rms.max(f64::MIN_POSITIVE))?,
            q_ber_db,
            q_ber_bound,
            papr_db: papr(tx_waveform)?,
            per_subcarrier_snr_db: per_subcarrier_snr_db(rx_symbols, tx_symbols)?,
            bits_counted: count.bits,
            bit_errors: count.errors,
        })
    }
}
