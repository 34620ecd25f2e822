//! Real-valued OFDM framing primitives.
//!
//! Conventions used throughout the crate:
//!
//! * forward DFT `X[k] = Σ x[n]·e^{-j2πkn/N}`, inverse scaled by `1/N`;
//! * bins `0` and `N/2` are never loaded, the DC level of a DCO signal is
//!   added in the electrical domain by the laser bias;
//! * the occupied band is the contiguous bin range `[1, B]`; everything
//!   above `B` (up to `N/2`) is left empty, which is how oversampling is
//!   realized inside a single `N`-point frame.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// OFDM flavour carried by a burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// DC-biased OFDM: every bin in `[1, B]` carries data.
    Dco,
    /// Layered / enhanced ACO-OFDM: clipped layers on interleaved bin sets.
    Laco,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Dco => "dco",
            Format::Laco => "laco",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dco" => Ok(Format::Dco),
            "laco" | "eaco" => Ok(Format::Laco),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// Physical unit of a [`RealWaveform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Unit {
    #[default]
    Normalized,
    Volts,
    Milliamps,
}

/// Sampled real-valued electrical signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RealWaveform<T> {
    pub samples: Vec<T>,
    /// Samples per second.
    pub sample_rate: f64,
    pub unit: Unit,
}

impl<T: Real> RealWaveform<T> {
    /// Builds a waveform, rejecting NaN or infinite samples.
    pub fn new(samples: Vec<T>, sample_rate: f64, unit: Unit) -> Result<Self> {
        let w = Self {
            samples,
            sample_rate,
            unit,
        };
        w.check_finite()?;
        Ok(w)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.samples.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Contract(format!("non-finite sample at index {i}"))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<T>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            unit: self.unit,
        }
    }
}

/// One ACO-OFDM layer: bins `2^(l-1)·(2n+1)` inside the band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    /// Layer number `l ≥ 1`.
    pub index: usize,
    pub subcarriers: Vec<usize>,
}

impl LayerSpec {
    pub fn new(index: usize, band: usize) -> Self {
        Self {
            index,
            subcarriers: layer_subcarriers(index, band),
        }
    }

    pub fn symbols_per_frame(&self) -> usize {
        self.subcarriers.len()
    }

    /// Half-period of the unclipped layer waveform, `N / 2^l`: the
    /// waveform satisfies `x[k + P] = -x[k]`.
    pub fn antiperiod(&self, fft_size: usize) -> usize {
        fft_size >> self.index
    }
}

/// Subcarrier indices of layer `l` inside the band `[1, band]`, ascending.
///
/// Returns an empty list when the band is too small for the layer (or when
/// `l == 0`, which is not a layer).
pub fn layer_subcarriers(l: usize, band: usize) -> Vec<usize> {
    if l == 0 || l > usize::BITS as usize {
        return Vec::new();
    }
    let base = 1usize << (l - 1);
    (0..)
        .map(|n| base * (2 * n + 1))
        .take_while(|&k| k <= band)
        .collect()
}

/// Frame layout shared by transmitter and receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    /// `N`, a power of two.
    pub fft_size: usize,
    /// `B`, highest usable positive-frequency bin.
    pub data_band: usize,
    pub format: Format,
    /// Layer plan (LACO only; empty for DCO).
    pub layers: Vec<LayerSpec>,
    pub cp_len: usize,
    pub sample_rate: f64,
}

impl OfdmConfig {
    pub fn dco(fft_size: usize, data_band: usize, sample_rate: f64) -> Result<Self> {
        let cfg = Self {
            fft_size,
            data_band,
            format: Format::Dco,
            layers: Vec::new(),
            cp_len: 0,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// LACO frame with layers `1..=n_layers` over the band `[1, data_band]`.
    pub fn laco(fft_size: usize, data_band: usize, n_layers: usize, sample_rate: f64) -> Result<Self> {
        let cfg = Self {
            fft_size,
            data_band,
            format: Format::Laco,
            layers: (1..=n_layers).map(|l| LayerSpec::new(l, data_band)).collect(),
            cp_len: 0,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 256-point DCO frame with 63 data bins at 8.75 GS/s.
    pub fn standard_dco() -> Self {
        Self::dco(256, 63, 8.75e9).expect("valid built-in plan")
    }

    /// 256-point, three-layer (32 + 16 + 8) LACO frame at 10 GS/s.
    pub fn standard_laco() -> Self {
        Self::laco(256, 64, 3, 10e9).expect("valid built-in plan")
    }

    pub fn with_cp(mut self, cp_len: usize) -> Result<Self> {
        self.cp_len = cp_len;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fft_size;
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("fft_size {n} is not a power of two ≥ 4")));
        }
        if self.data_band == 0 || self.data_band > n / 2 - 1 {
            return Err(Error::Config(format!(
                "data_band {} outside [1, {}]",
                self.data_band,
                n / 2 - 1
            )));
        }
        if self.cp_len >= n {
            return Err(Error::Config(format!("cp_len {} ≥ fft_size {n}", self.cp_len)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Config(format!("sample_rate {} must be positive", self.sample_rate)));
        }
        match self.format {
            Format::Dco => {
                if !self.layers.is_empty() {
                    return Err(Error::Config("DCO frames carry no layer plan".into()));
                }
            }
            Format::Laco => {
                if self.layers.is_empty() {
                    return Err(Error::Config("LACO frame needs at least one layer".into()));
                }
                let mut seen = vec![false; self.data_band + 1];
                for layer in &self.layers {
                    if layer.index == 0 {
                        return Err(Error::Config("layer index must be ≥ 1".into()));
                    }
                    if layer.subcarriers.is_empty() {
                        return Err(Error::Config(format!(
                            "layer {} has no subcarriers in band {}",
                            layer.index, self.data_band
                        )));
                    }
                    for &k in &layer.subcarriers {
                        if k == 0 || k > self.data_band {
                            return Err(Error::Config(format!(
                                "layer {} subcarrier {k} outside [1, {}]",
                                layer.index, self.data_band
                            )));
                        }
                        if seen[k] {
                            return Err(Error::Config(format!("subcarrier {k} assigned to two layers")));
                        }
                        seen[k] = true;
                    }
                }
            }
        }
        Ok(())
    }

    /// Data-carrying bins, DCO ascending, LACO in layer order.
    pub fn data_subcarriers(&self) -> Vec<usize> {
        match self.format {
            Format::Dco => (1..=self.data_band).collect(),
            Format::Laco => self
                .layers
                .iter()
                .flat_map(|l| l.subcarriers.iter().copied())
                .collect(),
        }
    }

    pub fn bits_per_frame(&self) -> usize {
        2 * self.data_subcarriers().len()
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Net QPSK line rate in bit/s.
    pub fn bit_rate(&self) -> f64 {
        self.bits_per_frame() as f64 * self.sample_rate / self.symbol_len() as f64
    }
}

/// Data-carrying bins of the `laco` plan divided by the bins the `dco` plan
/// occupies, DC included (`0..=B`). Both standard plans sit inside the same
/// 64-bin allocation, which gives 56/64.
pub fn spectral_efficiency_ratio(laco: &OfdmConfig, dco: &OfdmConfig) -> f64 {
    laco.data_subcarriers().len() as f64 / (dco.data_band + 1) as f64
}

/// Complex symbols for a burst of OFDM symbols, row-major by OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T> {
    /// Occupied bins, one column each.
    pub subcarriers: Vec<usize>,
    pub symbols: Vec<Complex<T>>,
}

impl<T: Real> SymbolFrame<T> {
    pub fn new(subcarriers: Vec<usize>, symbols: Vec<Complex<T>>) -> Result<Self> {
        if subcarriers.is_empty() {
            if symbols.is_empty() {
                return Ok(Self {
                    subcarriers,
                    symbols,
                });
            }
            return Err(Error::Framing("symbols supplied without subcarriers".into()));
        }
        if symbols.len() % subcarriers.len() != 0 {
            return Err(Error::Framing(format!(
                "{} symbols do not fill whole rows of {} subcarriers",
                symbols.len(),
                subcarriers.len()
            )));
        }
        Ok(Self {
            subcarriers,
            symbols,
        })
    }

    pub fn empty(subcarriers: Vec<usize>) -> Self {
        Self {
            subcarriers,
            symbols: Vec::new(),
        }
    }

    pub fn n_ofdm_symbols(&self) -> usize {
        if self.subcarriers.is_empty() {
            0
        } else {
            self.symbols.len() / self.subcarriers.len()
        }
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        let w = self.subcarriers.len();
        &self.symbols[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex<T>]> {
        self.symbols.chunks(self.subcarriers.len().max(1))
    }

    /// Average power per column (subcarrier) across all OFDM symbols.
    pub fn subcarrier_powers(&self) -> Vec<T> {
        let w = self.subcarriers.len();
        let rows = self.n_ofdm_symbols();
        let mut acc = vec![T::zero(); w];
        for row in self.rows() {
            for (a, s) in acc.iter_mut().zip(row) {
                *a = *a + s.norm_sqr();
            }
        }
        if rows > 0 {
            let r = T::from_usize_lossy(rows);
            acc.iter_mut().for_each(|a| *a = *a / r);
        }
        acc
    }

    /// Keeps only the columns whose bin is in `keep`, preserving this frame's order.
    pub fn select(&self, keep: &[usize]) -> Self {
        let cols: Vec<usize> = self
            .subcarriers
            .iter()
            .enumerate()
            .filter(|(_, k)| keep.contains(k))
            .map(|(i, _)| i)
            .collect();
        let subcarriers = cols.iter().map(|&i| self.subcarriers[i]).collect();
        let symbols = self
            .rows()
            .flat_map(|row| cols.iter().map(move |&i| row[i]))
            .collect();
        Self {
            subcarriers,
            symbols,
        }
    }
}

/// Relative tolerance used for transform identities at the scalar's precision.
pub fn transform_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(100.0))
}

/// Cached forward/inverse FFT plans for one transform size.
#[derive(Clone)]
pub struct Dft<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Dft<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl<T: Real> Dft<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward DFT of one real symbol of exactly `n` samples.
    pub fn forward(&self, x: &[T]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.n, "forward DFT input length");
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Forward DFT of a complex sequence of exactly `n` samples.
    pub fn forward_complex(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.n, "forward DFT input length");
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT (scaled by `1/n`) of a complex spectrum.
    pub fn inverse_complex(&self, spectrum: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(spectrum.len(), self.n, "inverse DFT input length");
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = T::one() / T::from_usize_lossy(self.n);
        buf.iter_mut().for_each(|c| *c = *c * scale);
        buf
    }

    /// Inverse DFT of a Hermitian-symmetric spectrum, returning the real part.
    pub fn inverse_real(&self, spectrum: &[Complex<T>]) -> Result<Vec<T>> {
        check_hermitian(spectrum)?;
        Ok(self.inverse_real_unchecked(spectrum))
    }

    /// Inverse DFT keeping only the real part, without the symmetry check.
    pub fn inverse_real_unchecked(&self, spectrum: &[Complex<T>]) -> Vec<T> {
        self.inverse_complex(spectrum).into_iter().map(|c| c.re).collect()
    }
}

/// Fails unless `X[N-k] = conj(X[k])` and `X[0]`, `X[N/2]` are real, within
/// [`transform_tolerance`] relative to the largest bin magnitude.
pub fn check_hermitian<T: Real>(spectrum: &[Complex<T>]) -> Result<()> {
    let n = spectrum.len();
    if n == 0 {
        return Ok(());
    }
    let peak = spectrum.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    if peak == T::zero() {
        return Ok(());
    }
    let tol = transform_tolerance::<T>() * peak;
    for k in 0..=n / 2 {
        let mirror = (n - k) % n;
        let diff = (spectrum[mirror] - spectrum[k].conj()).norm();
        if diff > tol {
            return Err(Error::Contract(format!(
                "spectrum not Hermitian at bins {k}/{mirror} (|Δ| = {diff})"
            )));
        }
    }
    Ok(())
}

/// Places one OFDM symbol's data on `subcarriers` and mirrors the conjugates
/// onto the negative-frequency bins.
pub fn hermitian_spectrum<T: Real>(
    subcarriers: &[usize],
    values: &[Complex<T>],
    n: usize,
) -> Result<Vec<Complex<T>>> {
    if subcarriers.len() != values.len() {
        return Err(Error::Framing(format!(
            "{} values for {} subcarriers",
            values.len(),
            subcarriers.len()
        )));
    }
    let mut spec = vec![Complex::zero(); n];
    for (&k, &v) in subcarriers.iter().zip(values) {
        if k == 0 || 2 * k >= n {
            return Err(Error::Config(format!(
                "subcarrier {k} outside [1, {}]",
                n / 2 - 1
            )));
        }
        spec[k] = v;
        spec[n - k] = v.conj();
    }
    Ok(spec)
}

/// Hermitian spectra for every OFDM symbol of `frame`.
pub fn hermitian_map<T: Real>(frame: &SymbolFrame<T>, n: usize) -> Result<Vec<Vec<Complex<T>>>> {
    if frame.subcarriers.is_empty() {
        return Ok(vec![vec![Complex::zero(); n]]);
    }
    frame
        .rows()
        .map(|row| hermitian_spectrum(&frame.subcarriers, row, n))
        .collect()
}

/// Real inverse DFT of one Hermitian spectrum.
pub fn idft_real<T: Real>(spectrum: &[Complex<T>]) -> Result<Vec<T>> {
    Dft::new(spectrum.len()).inverse_real(spectrum)
}

/// Forward DFT of each consecutive `n`-sample symbol of `samples`.
pub fn dft<T: Real>(samples: &[T], n: usize) -> Result<Vec<Vec<Complex<T>>>> {
    if n == 0 || samples.len() % n != 0 {
        return Err(Error::Framing(format!(
            "waveform length {} is not a multiple of {n}",
            samples.len()
        )));
    }
    let engine = Dft::new(n);
    Ok(samples.chunks(n).map(|s| engine.forward(s)).collect())
}

/// `max(w, 0)` sample-wise.
pub fn clip_negative<T: Real>(w: &RealWaveform<T>) -> RealWaveform<T> {
    let mut out = w.clone();
    clip_negative_in_place(&mut out.samples);
    out
}

pub fn clip_negative_in_place<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| *v = v.max(T::zero()));
}

/// Prepends a copy of the last `cp_len` samples of a single symbol.
pub fn add_cp<T: Real>(symbol: &[T], cp_len: usize) -> Result<Vec<T>> {
    if cp_len >= symbol.len() {
        return Err(Error::Config(format!(
            "cp_len {cp_len} ≥ symbol length {}",
            symbol.len()
        )));
    }
    let mut out = Vec::with_capacity(symbol.len() + cp_len);
    out.extend_from_slice(&symbol[symbol.len() - cp_len..]);
    out.extend_from_slice(symbol);
    Ok(out)
}

/// Drops the first `cp_len` samples of a single prefixed symbol.
pub fn remove_cp<T: Real>(symbol: &[T], cp_len: usize) -> Result<Vec<T>> {
    if cp_len >= symbol.len() {
        return Err(Error::Config(format!(
            "cp_len {cp_len} ≥ symbol length {}",
            symbol.len()
        )));
    }
    Ok(symbol[cp_len..].to_vec())
}

/// [`add_cp`] applied to every `n`-sample symbol of a burst.
pub fn add_cp_burst<T: Real>(samples: &[T], n: usize, cp_len: usize) -> Result<Vec<T>> {
    if samples.len() % n != 0 {
        return Err(Error::Framing(format!("burst length {} not a multiple of {n}", samples.len())));
    }
    let mut out = Vec::with_capacity(samples.len() / n * (n + cp_len));
    for sym in samples.chunks(n) {
        out.extend(add_cp(sym, cp_len)?);
    }
    Ok(out)
}

/// [`remove_cp`] applied to every `(n + cp_len)`-sample symbol of a burst.
pub fn remove_cp_burst<T: Real>(samples: &[T], n: usize, cp_len: usize) -> Result<Vec<T>> {
    let len = n + cp_len;
    if samples.len() % len != 0 {
        return Err(Error::Framing(format!(
            "burst length {} not a multiple of {len}",
            samples.len()
        )));
    }
    let mut out = Vec::with_capacity(samples.len() / len * n);
    for sym in samples.chunks(len) {
        out.extend_from_slice(&sym[cp_len..]);
    }
    Ok(out)
}
