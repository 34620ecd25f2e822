//! Symbol decisions for DCO and layered ACO frames.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::ofdm::{remove_cp_burst, Dft, Format, LayerSpec, OfdmConfig, SymbolFrame};
use crate::rx::onetap::{one_tap_apply, OneTapBank};
use crate::rx::pairwise::pairwise_cancel;
use crate::scalar::{mean_square, Real};
use crate::tx::{clipped_layer_symbol, qpsk_demod, qpsk_slice};

/// Rows of `spectra` restricted to `bins`.
fn pick<T: Real>(spectra: &[Vec<Complex<T>>], bins: &[usize]) -> SymbolFrame<T> {
    SymbolFrame {
        subcarriers: bins.to_vec(),
        symbols: spectra
            .iter()
            .flat_map(|s| bins.iter().map(move |&k| s[k]))
            .collect(),
    }
}

fn spectra<T: Real>(dft: &Dft<T>, x: &[T]) -> Vec<Vec<Complex<T>>> {
    x.chunks(dft.len()).map(|s| dft.forward(s)).collect()
}

/// DCO receiver: drop CP, DFT, one-tap on bins `1..=B`, QPSK slicing.
pub fn dco_decode<T: Real>(
    y: &[T],
    cfg: &OfdmConfig,
    bank: &OneTapBank<T>,
) -> Result<(Vec<u8>, SymbolFrame<T>)> {
    if cfg.format != Format::Dco {
        return Err(Error::Config("dco_decode needs a DCO frame config".into()));
    }
    let body = remove_cp_burst(y, cfg.fft_size, cfg.cp_len)?;
    let dft = Dft::new(cfg.fft_size);
    let raw = pick(&spectra(&dft, &body), &cfg.data_subcarriers());
    let eq = one_tap_apply(&raw, bank)?;
    Ok((qpsk_demod(&eq.symbols), eq))
}

/// Equalizes every OFDM symbol back onto the transmit waveform: `Y/H` on
/// bins the bank covers, zero elsewhere, then an inverse DFT.
pub fn equalize_waveform<T: Real>(y: &[T], cfg: &OfdmConfig, bank: &OneTapBank<T>) -> Result<Vec<T>> {
    let n = cfg.fft_size;
    let body = remove_cp_burst(y, n, cfg.cp_len)?;
    let dft = Dft::new(n);
    let table = bank.table(n / 2 + 1);
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = Vec::with_capacity(body.len());
    for sym in body.chunks(n) {
        let spec = dft.forward(sym);
        let mut z = vec![zero; n];
        for k in 0..=n / 2 {
            if let Some(h) = table[k] {
                z[k] = spec[k] / h;
            }
        }
        z[0].im = T::zero();
        z[n / 2].im = T::zero();
        for k in 1..n / 2 {
            z[n - k] = z[k].conj();
        }
        out.extend(dft.inverse_complex(&z).into_iter().map(|c| c.re));
    }
    Ok(out)
}

/// Decisions and pre-decision symbols of one layer.
#[derive(Debug, Clone)]
struct LayerState<T> {
    soft: Vec<Complex<T>>,
    hard: Vec<Complex<T>>,
    regen: Vec<T>,
}

fn detect_layer<T: Real>(dft: &Dft<T>, x: &[T], layer: &LayerSpec) -> Result<LayerState<T>> {
    let two = T::lit(2.0);
    let soft: Vec<Complex<T>> = spectra(dft, x)
        .iter()
        .flat_map(|s| layer.subcarriers.iter().map(move |&k| s[k] * two))
        .collect();
    let hard: Vec<Complex<T>> = soft.iter().map(|&s| qpsk_slice(s)).collect();
    let mut regen = Vec::with_capacity(x.len());
    for row in hard.chunks(layer.subcarriers.len()) {
        regen.extend(clipped_layer_symbol(dft, &layer.subcarriers, row)?);
    }
    Ok(LayerState { soft, hard, regen })
}

fn subtract<T: Real>(a: &mut [T], b: &[T]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x = *x - *y);
}

fn layers_in<'a>(cfg: &'a OfdmConfig, order: &[usize]) -> Result<Vec<&'a LayerSpec>> {
    order
        .iter()
        .map(|&i| {
            cfg.layers
                .iter()
                .find(|l| l.index == i)
                .ok_or_else(|| Error::Config(format!("layer {i} is not in the frame plan")))
        })
        .collect()
}

/// Successive detection and cancellation; returns per-layer states and the
/// residual after each layer.
fn successive<T: Real>(
    dft: &Dft<T>,
    z: &[T],
    layers: &[&LayerSpec],
) -> Result<(Vec<LayerState<T>>, Vec<Vec<T>>)> {
    let mut residual = z.to_vec();
    let mut states = Vec::with_capacity(layers.len());
    let mut trace = Vec::with_capacity(layers.len());
    let mut power = mean_square(&residual);
    for layer in layers {
        let st = detect_layer(dft, &residual, layer)?;
        subtract(&mut residual, &st.regen);
        let p = mean_square(&residual);
        if !p.is_finite() || p > power * T::lit(10.0) {
            return Err(Error::DecodeFailure(format!(
                "residual power grew {:.1}× after layer {}",
                (p / power).as_f64(),
                layer.index
            )));
        }
        power = p;
        trace.push(residual.clone());
        states.push(st);
    }
    Ok((states, trace))
}

/// Layered ACO receiver decoding layers in index order.
///
/// Returns bits in frame order (each frame's bits follow
/// `cfg.data_subcarriers()`) and the pre-decision symbols of every layer.
pub fn laco_decode<T: Real>(
    y: &[T],
    cfg: &OfdmConfig,
    bank: &OneTapBank<T>,
    enable_pairwise: bool,
) -> Result<(Vec<u8>, Vec<SymbolFrame<T>>)> {
    let mut order: Vec<usize> = cfg.layers.iter().map(|l| l.index).collect();
    order.sort_unstable();
    laco_decode_ordered(y, cfg, bank, enable_pairwise, &order)
}

/// [`laco_decode`] with an explicit layer order.
///
/// With `enable_pairwise` a second pass re-detects each layer from the
/// waveform left after removing every other layer (refined decisions below
/// it, first-pass decisions above it), after pairwise cancellation.
pub fn laco_decode_ordered<T: Real>(
    y: &[T],
    cfg: &OfdmConfig,
    bank: &OneTapBank<T>,
    enable_pairwise: bool,
    order: &[usize],
) -> Result<(Vec<u8>, Vec<SymbolFrame<T>>)> {
    if cfg.format != Format::Laco {
        return Err(Error::Config("laco_decode needs a LACO frame config".into()));
    }
    let layers = layers_in(cfg, order)?;
    let z = equalize_waveform(y, cfg, bank)?;
    let dft = Dft::new(cfg.fft_size);
    let (mut states, _) = successive(&dft, &z, &layers)?;

    if enable_pairwise {
        let mut total = vec![T::zero(); z.len()];
        for st in &states {
            total.iter_mut().zip(&st.regen).for_each(|(t, r)| *t = *t + *r);
        }
        for (i, layer) in layers.iter().enumerate() {
            let mut isolated = z.clone();
            subtract(&mut isolated, &total);
            isolated
                .iter_mut()
                .zip(&states[i].regen)
                .for_each(|(x, r)| *x = *x + *r);
            let cleaned = pairwise_cancel(&isolated, layer.index, cfg.fft_size)?;
            let st = detect_layer(&dft, &cleaned, layer)?;
            total
                .iter_mut()
                .zip(st.regen.iter().zip(&states[i].regen))
                .for_each(|(t, (new, old))| *t = *t + *new - *old);
            states[i] = st;
        }
    }

    let rows = z.len() / cfg.fft_size;
    let frames: Vec<SymbolFrame<T>> = layers
        .iter()
        .zip(&states)
        .map(|(l, st)| SymbolFrame {
            subcarriers: l.subcarriers.clone(),
            symbols: st.soft.clone(),
        })
        .collect();

    // reassemble decisions in the transmitter's column order
    let mut bits = Vec::with_capacity(rows * cfg.bits_per_frame());
    for r in 0..rows {
        for spec in &cfg.layers {
            let i = layers.iter().position(|l| l.index == spec.index).ok_or_else(|| {
                Error::Config(format!("layer {} missing from decode order", spec.index))
            })?;
            let w = spec.subcarriers.len();
            bits.extend(qpsk_demod(&states[i].hard[r * w..(r + 1) * w]));
        }
    }
    Ok((bits, frames))
}

/// Residual waveform after cancelling each layer in index order (first pass,
/// no pairwise step).
pub fn laco_trace<T: Real>(y: &[T], cfg: &OfdmConfig, bank: &OneTapBank<T>) -> Result<Vec<Vec<T>>> {
    let mut layers: Vec<&LayerSpec> = cfg.layers.iter().collect();
    layers.sort_by_key(|l| l.index);
    let z = equalize_waveform(y, cfg, bank)?;
    Ok(successive(&Dft::new(cfg.fft_size), &z, &layers)?.1)
}

/// Bins a layered frame's bank must cover: every bin in `0..=N/2`.
pub fn laco_bank_bins(cfg: &OfdmConfig) -> Vec<usize> {
    (0..=cfg.fft_size / 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{add_cp_burst, dft};
    use crate::tx::{qpsk_mod, random_bits, raw_waveform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use statrs::function::erf::erfc;

    fn frame(cfg: &OfdmConfig, rows: usize, seed: u64) -> (Vec<u8>, SymbolFrame<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = random_bits(&mut rng, rows * cfg.bits_per_frame());
        let f = SymbolFrame::new(cfg.data_subcarriers(), qpsk_mod(&bits).unwrap()).unwrap();
        (bits, f)
    }

    fn full_bank(cfg: &OfdmConfig) -> OneTapBank<f64> {
        match cfg.format {
            Format::Dco => OneTapBank::identity(cfg.data_subcarriers()),
            Format::Laco => OneTapBank::identity(laco_bank_bins(cfg)),
        }
    }

    fn errors(a: &[u8], b: &[u8]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn dco_noiseless_loopback() {
        let cfg = OfdmConfig::standard_dco();
        let (bits, f) = frame(&cfg, 50, 1);
        let x = raw_waveform(&f, &cfg).unwrap();
        let (rx, syms) = dco_decode(&x, &cfg, &full_bank(&cfg)).unwrap();
        assert_eq!(rx, bits);
        assert_eq!(syms.n_ofdm_symbols(), 50);
    }

    #[test]
    fn dco_two_sample_delay_with_cp() {
        let cfg = OfdmConfig::dco(64, 20, 1e9).unwrap().with_cp(4).unwrap();
        let (bits, f) = frame(&cfg, 20, 2);
        let tx = add_cp_burst(&raw_waveform(&f, &cfg).unwrap(), 64, 4).unwrap();
        let mut rx = vec![0.0; 2];
        rx.extend_from_slice(&tx[..tx.len() - 2]);
        let gains = cfg
            .data_subcarriers()
            .iter()
            .map(|&k| Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (2 * k) as f64 / 64.0))
            .collect();
        let bank = OneTapBank {
            subcarriers: cfg.data_subcarriers(),
            gains,
        };
        assert_eq!(dco_decode(&rx, &cfg, &bank).unwrap().0, bits);
    }

    #[test]
    fn dco_awgn_matches_qpsk_ber() {
        // per-bin SNR 9.8 dB, unit-power symbols: BER = Q(√SNR) = erfc(√(SNR/2))/2
        let cfg = OfdmConfig::dco(256, 100, 1e9).unwrap();
        let snr = 10f64.powf(0.98);
        let expected = 0.5 * erfc((snr / 2.0).sqrt());
        let rows = 5000; // 10⁶ bits
        let (bits, f) = frame(&cfg, rows, 3);
        let x = raw_waveform(&f, &cfg).unwrap();
        // per-bin noise variance N·σ² on an unscaled forward DFT
        let sigma = (1.0 / (snr * 256.0)).sqrt();
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = x.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let (rx, _) = dco_decode(&y, &cfg, &full_bank(&cfg)).unwrap();
        let ber = errors(&rx, &bits) as f64 / bits.len() as f64;
        assert!((ber / expected - 1.0).abs() < 0.3, "BER {ber} vs {expected}");
    }

    #[test]
    fn laco_noiseless_loopback_three_layers() {
        let cfg = OfdmConfig::standard_laco();
        let (bits, f) = frame(&cfg, 100, 5);
        let x = raw_waveform(&f, &cfg).unwrap();
        for pairwise in [false, true] {
            let (rx, layers) = laco_decode(&x, &cfg, &full_bank(&cfg), pairwise).unwrap();
            assert_eq!(rx, bits);
            let sizes: Vec<usize> = layers.iter().map(|l| l.subcarriers.len()).collect();
            assert_eq!(sizes, vec![32, 16, 8]);
        }
    }

    #[test]
    fn single_layer_matches_plain_aco_receiver() {
        let cfg = OfdmConfig::laco(256, 64, 1, 1e9).unwrap();
        let (_, f) = frame(&cfg, 20, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let y: Vec<f64> = raw_waveform(&f, &cfg)
            .unwrap()
            .iter()
            .map(|v| v + noise.sample(&mut rng))
            .collect();
        let (bits, layers) = laco_decode(&y, &cfg, &full_bank(&cfg), false).unwrap();
        // plain ACO: DFT, read odd bins, double, slice
        let odd = &cfg.layers[0].subcarriers;
        let plain: Vec<Complex<f64>> = dft(&y, 256)
            .unwrap()
            .iter()
            .flat_map(|s| odd.iter().map(move |&k| s[k] * 2.0))
            .collect();
        assert_eq!(bits, qpsk_demod(&plain));
        for (a, b) in layers[0].symbols.iter().zip(&plain) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cancellation_is_exact() {
        let cfg = OfdmConfig::standard_laco();
        let (_, f) = frame(&cfg, 20, 8);
        let x = raw_waveform(&f, &cfg).unwrap();
        let trace = laco_trace(&x, &cfg, &full_bank(&cfg)).unwrap();
        for (i, residual) in trace.iter().enumerate().take(2) {
            let next = &cfg.layers[i + 1];
            let tx = f.select(&next.subcarriers);
            let spectra = dft(residual, 256).unwrap();
            for (s, row) in spectra.iter().zip(tx.rows()) {
                for (&k, &t) in next.subcarriers.iter().zip(row) {
                    assert!((s[k] - t * 0.5).norm() < 1e-9, "layer {} bin {k}", next.index);
                }
            }
        }
        // everything removed after the last layer
        assert!(trace[2].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn decode_order_matters() {
        let cfg = OfdmConfig::standard_laco();
        let (bits, f) = frame(&cfg, 50, 9);
        let x = raw_waveform(&f, &cfg).unwrap();
        let bank = full_bank(&cfg);
        let (ok, _) = laco_decode_ordered(&x, &cfg, &bank, false, &[1, 2, 3]).unwrap();
        assert_eq!(ok, bits);
        let bad = match laco_decode_ordered(&x, &cfg, &bank, false, &[2, 1, 3]) {
            Ok((b, _)) => errors(&b, &bits),
            Err(_) => usize::MAX,
        };
        assert!(bad > 0);
    }

    #[test]
    fn unknown_layer_in_order() {
        let cfg = OfdmConfig::standard_laco();
        let x = vec![0.0; 256];
        assert!(laco_decode_ordered(&x, &cfg, &full_bank(&cfg), false, &[1, 4]).is_err());
    }

    #[test]
    fn pairwise_lowers_layer_one_ber() {
        // AWGN only, 10⁵ layer-1 bits per SNR
        let cfg = OfdmConfig::standard_laco();
        let rows = 100_000 / 64 + 1;
        let bank = full_bank(&cfg);
        for (i, snr_db) in [6.0, 8.0, 10.0].into_iter().enumerate() {
            let (bits, f) = frame(&cfg, rows, 10 + i as u64);
            let x = raw_waveform(&f, &cfg).unwrap();
            // per-bin SNR on layer 1 after the ×2 scaling: 4·N·σ² = 1/snr
            let snr = 10f64.powf(snr_db / 10.0);
            let sigma = (1.0 / (snr * 4.0 * 256.0)).sqrt();
            let noise = Normal::new(0.0, sigma).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(20 + i as u64);
            let y: Vec<f64> = x.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let layer1_errors = |rx: &[u8]| {
                let per = cfg.bits_per_frame();
                rx.chunks(per)
                    .zip(bits.chunks(per))
                    .map(|(a, b)| errors(&a[..64], &b[..64]))
                    .sum::<usize>()
            };
            let off = layer1_errors(&laco_decode(&y, &cfg, &bank, false).unwrap().0);
            let on = layer1_errors(&laco_decode(&y, &cfg, &bank, true).unwrap().0);
            assert!(on <= off, "{snr_db} dB: {on} > {off}");
        }
    }
}
