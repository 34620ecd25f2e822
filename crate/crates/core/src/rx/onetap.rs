use num_complex::Complex;

use crate::error::{Error, Result};
use crate::ofdm::SymbolFrame;
use crate::scalar::Real;

/// Per-subcarrier complex channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct OneTapBank<T> {
    pub subcarriers: Vec<usize>,
    pub gains: Vec<Complex<T>>,
}

impl<T: Real> OneTapBank<T> {
    /// Unit gain on every listed bin.
    pub fn identity(subcarriers: Vec<usize>) -> Self {
        let gains = vec![Complex::new(T::one(), T::zero()); subcarriers.len()];
        Self { subcarriers, gains }
    }

    pub fn gain(&self, k: usize) -> Option<Complex<T>> {
        self.subcarriers.iter().position(|&s| s == k).map(|i| self.gains[i])
    }

    /// Dense lookup table of length `n`, `None` on bins outside the bank.
    pub fn table(&self, n: usize) -> Vec<Option<Complex<T>>> {
        let mut t = vec![None; n];
        for (&k, &h) in self.subcarriers.iter().zip(&self.gains) {
            if k < n {
                t[k] = Some(h);
            }
        }
        t
    }
}

/// Least-squares gain per bin, `H[k] = Σ Y·X* / Σ |X|²` over training rows.
///
/// For constant-modulus training this is the mean of `Y/X`; the weighted
/// form also handles bins whose reference amplitude varies from row to row.
pub fn one_tap_estimate<T: Real>(rx: &SymbolFrame<T>, tx: &SymbolFrame<T>) -> Result<OneTapBank<T>> {
    if rx.subcarriers != tx.subcarriers {
        return Err(Error::Framing("training frames cover different subcarriers".into()));
    }
    if rx.symbols.len() != tx.symbols.len() || tx.n_ofdm_symbols() == 0 {
        return Err(Error::Framing(format!(
            "need equal, non-empty training: {} rx vs {} tx symbols",
            rx.symbols.len(),
            tx.symbols.len()
        )));
    }
    let w = tx.subcarriers.len();
    let mut num = vec![Complex::new(T::zero(), T::zero()); w];
    let mut den = vec![T::zero(); w];
    for (ry, rx_) in rx.rows().zip(tx.rows()) {
        for i in 0..w {
            num[i] = num[i] + ry[i] * rx_[i].conj();
            den[i] = den[i] + rx_[i].norm_sqr();
        }
    }
    let floor = T::lit(1e-12);
    let mut dead = Vec::new();
    let gains: Vec<Complex<T>> = num
        .iter()
        .zip(&den)
        .zip(&tx.subcarriers)
        .map(|((&n, &d), &k)| {
            let h = if d > T::zero() { n / d } else { Complex::new(T::zero(), T::zero()) };
            if !(h.norm() >= floor) {
                dead.push(k);
            }
            h
        })
        .collect();
    if !dead.is_empty() {
        return Err(Error::DeadSubcarrier(dead));
    }
    Ok(OneTapBank {
        subcarriers: tx.subcarriers.clone(),
        gains,
    })
}

/// `Ŷ[k] = Y[k] / H[k]` on every column of `frames`.
pub fn one_tap_apply<T: Real>(frames: &SymbolFrame<T>, bank: &OneTapBank<T>) -> Result<SymbolFrame<T>> {
    let inv: Vec<Complex<T>> = frames
        .subcarriers
        .iter()
        .map(|&k| {
            bank.gain(k)
                .map(|h| h.inv())
                .ok_or_else(|| Error::DeadSubcarrier(vec![k]))
        })
        .collect::<Result<_>>()?;
    let w = inv.len().max(1);
    let symbols = frames
        .symbols
        .iter()
        .enumerate()
        .map(|(i, &y)| y * inv[i % w])
        .collect();
    Ok(SymbolFrame {
        subcarriers: frames.subcarriers.clone(),
        symbols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{add_cp_burst, dft, hermitian_spectrum, remove_cp_burst, Dft};
    use crate::tx::{qpsk_mod, random_bits};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    type C = Complex<f64>;
    const N: usize = 64;
    const B: usize = 20;

    fn random_frame(rows: usize, seed: u64) -> SymbolFrame<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = random_bits(&mut rng, rows * B * 2);
        SymbolFrame::new((1..=B).collect(), qpsk_mod(&bits).unwrap()).unwrap()
    }

    fn modulate(frame: &SymbolFrame<f64>, cp: usize) -> Vec<f64> {
        let d = Dft::new(N);
        let mut out = Vec::new();
        for row in frame.rows() {
            out.extend(d.inverse_real(&hermitian_spectrum(&frame.subcarriers, row, N).unwrap()).unwrap());
        }
        add_cp_burst(&out, N, cp).unwrap()
    }

    fn demodulate(x: &[f64], cp: usize, subcarriers: &[usize]) -> SymbolFrame<f64> {
        let body = remove_cp_burst(x, N, cp).unwrap();
        let spectra = dft(&body, N).unwrap();
        let symbols = spectra
            .iter()
            .flat_map(|s| subcarriers.iter().map(move |&k| s[k]))
            .collect();
        SymbolFrame::new(subcarriers.to_vec(), symbols).unwrap()
    }

    /// Linear convolution by definition, zero history.
    fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| (0..h.len()).filter(|&m| m <= n).map(|m| h[m] * x[n - m]).sum())
            .collect()
    }

    fn evm(a: &SymbolFrame<f64>, b: &SymbolFrame<f64>) -> f64 {
        let e: f64 = a.symbols.iter().zip(&b.symbols).map(|(x, y)| (x - y).norm_sqr()).sum();
        let p: f64 = b.symbols.iter().map(|y| y.norm_sqr()).sum();
        (e / p).sqrt()
    }

    #[test]
    fn ideal_channel_gives_unit_bank() {
        let tx = random_frame(4, 1);
        let bank = one_tap_estimate(&tx, &tx).unwrap();
        assert!(bank.gains.iter().all(|h| (h - C::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(one_tap_apply(&tx, &bank).unwrap(), tx);
    }

    #[test]
    fn delay_follows_shift_theorem() {
        let (cp, d) = (4, 2);
        let tx = random_frame(8, 2);
        let mut x = vec![0.0; d];
        x.extend(modulate(&tx, cp));
        x.truncate(x.len() - d);
        let rx = demodulate(&x, cp, &tx.subcarriers);
        // skip the first row: its prefix saw the zero history
        let (rx_t, tx_t) = (tail(&rx, 1), tail(&tx, 1));
        let bank = one_tap_estimate(&rx_t, &tx_t).unwrap();
        for (&k, h) in bank.subcarriers.iter().zip(&bank.gains) {
            let expect = C::from_polar(1.0, -2.0 * PI * (k * d) as f64 / N as f64);
            assert!((h - expect).norm() < 1e-12, "bin {k}");
        }
        let eq = one_tap_apply(&rx_t, &bank).unwrap();
        for (a, b) in eq.symbols.iter().zip(&tx_t.symbols) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    fn tail(f: &SymbolFrame<f64>, skip: usize) -> SymbolFrame<f64> {
        let w = f.subcarriers.len();
        SymbolFrame::new(f.subcarriers.clone(), f.symbols[skip * w..].to_vec()).unwrap()
    }

    #[test]
    fn nine_tap_fir_equalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h: Vec<f64> = (0..9).map(|_| rng.random_range(-0.3..0.3)).collect();
        h[0] = 1.0;
        let cp = 8;
        let train = random_frame(10, 4);
        let data = random_frame(50, 5);
        let rx_train = demodulate(&convolve(&modulate(&train, cp), &h), cp, &train.subcarriers);
        let rx_data = demodulate(&convolve(&modulate(&data, cp), &h), cp, &data.subcarriers);
        let bank = one_tap_estimate(&tail(&rx_train, 1), &tail(&train, 1)).unwrap();
        let eq = one_tap_apply(&tail(&rx_data, 1), &bank).unwrap();
        let e = evm(&eq, &tail(&data, 1));
        assert!(e < 1e-6, "EVM {e}");
    }

    #[test]
    fn dead_bins_listed() {
        let tx = random_frame(2, 6);
        let mut rx = tx.clone();
        for row in rx.symbols.chunks_mut(B) {
            row[3] = C::new(0.0, 0.0);
            row[7] = C::new(1e-15, 0.0);
        }
        match one_tap_estimate(&rx, &tx) {
            Err(Error::DeadSubcarrier(k)) => assert_eq!(k, vec![4, 8]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_training_rejected() {
        let tx = random_frame(2, 7);
        assert!(one_tap_estimate(&tail(&tx, 1), &tx).is_err());
        assert!(one_tap_estimate(&tx.select(&[1, 2]), &tx).is_err());
    }

    #[test]
    fn apply_needs_every_bin() {
        let tx = random_frame(1, 8);
        let bank = OneTapBank::identity(vec![1, 2]);
        assert!(matches!(one_tap_apply(&tx, &bank), Err(Error::DeadSubcarrier(_))));
    }
}
