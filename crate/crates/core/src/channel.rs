//! Parametric IM/DD link: directly modulated laser, single-mode fiber,
//! variable attenuator and a thermal-noise-limited photoreceiver.
//!
//! The laser is a behavioral model, not a rate-equation one:
//!
//! ```text
//! i(t) = bias + lowpass(drive)
//! x(t) = max(i − i_th, 0)
//! P(t) = max(η·x·(1 − c·x), 0)
//! dφ/dt = (α/2)·d(ln P)/dt + 2π·κ·P
//! ```
//!
//! Below threshold the output power is zero and the transient-chirp term is
//! taken as zero, which is the distortion the receiver equalizers work
//! against at low bias.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ofdm::{Dft, RealWaveform, Unit};
use crate::scalar::Real;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmlParams<T> {
    pub threshold_ma: T,
    /// Slope efficiency, W/mA.
    pub slope_w_per_ma: T,
    pub bias_ma: T,
    /// 3-dB bandwidth of the first-order drive low-pass; 0 disables it.
    pub bandwidth_hz: T,
    /// Quadratic L-I compression, 1/mA.
    pub compression_per_ma: T,
    /// Linewidth enhancement factor α (transient chirp).
    pub alpha_chirp: T,
    /// Adiabatic chirp coefficient, Hz/W.
    pub kappa_hz_per_w: T,
}

impl<T: Real> Default for DmlParams<T> {
    fn default() -> Self {
        Self {
            threshold_ma: T::lit(12.4),
            slope_w_per_ma: T::lit(5e-5),
            bias_ma: T::lit(21.082),
            bandwidth_hz: T::lit(8e9),
            compression_per_ma: T::lit(0.005),
            alpha_chirp: T::lit(3.0),
            kappa_hz_per_w: T::zero(),
        }
    }
}

impl<T: Real> DmlParams<T> {
    /// Linear above threshold: no bandwidth limit, compression or chirp.
    pub fn ideal() -> Self {
        Self {
            bandwidth_hz: T::zero(),
            compression_per_ma: T::zero(),
            alpha_chirp: T::zero(),
            kappa_hz_per_w: T::zero(),
            ..Self::default()
        }
    }

    pub fn with_bias(mut self, bias_ma: T) -> Self {
        self.bias_ma = bias_ma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_ma > T::zero()) {
            return Err(Error::Config("laser threshold must be positive".into()));
        }
        if !(self.slope_w_per_ma > T::zero()) {
            return Err(Error::Config("slope efficiency must be positive".into()));
        }
        if !(self.bias_ma >= T::zero()) {
            return Err(Error::Config("bias must be non-negative".into()));
        }
        if !(self.bandwidth_hz >= T::zero()) || !(self.compression_per_ma >= T::zero()) {
            return Err(Error::Config("bandwidth and compression must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberParams<T> {
    pub length_km: T,
    /// Chromatic dispersion D, ps/(nm·km).
    pub dispersion_ps_nm_km: T,
    pub wavelength_nm: T,
    pub loss_db_km: T,
}

impl<T: Real> Default for FiberParams<T> {
    fn default() -> Self {
        Self::smf(T::zero())
    }
}

impl<T: Real> FiberParams<T> {
    /// Standard single-mode fiber at 1550 nm.
    pub fn smf(length_km: T) -> Self {
        Self {
            length_km,
            dispersion_ps_nm_km: T::lit(17.0),
            wavelength_nm: T::lit(1550.0),
            loss_db_km: T::lit(0.2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km >= T::zero()) {
            return Err(Error::Config("fiber length must be non-negative".into()));
        }
        if !(self.wavelength_nm > T::zero()) {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        Ok(())
    }

    /// Group-velocity dispersion β₂ = −D·λ²/(2πc), s²/m.
    pub fn beta2(&self) -> f64 {
        let d = self.dispersion_ps_nm_km.as_f64() * 1e-6;
        let lambda = self.wavelength_nm.as_f64() * 1e-9;
        -d * lambda * lambda / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
    }

    /// First small-signal power-fading notch of an unchirped IM/DD link, Hz.
    pub fn fading_notch_hz(&self) -> f64 {
        let d = self.dispersion_ps_nm_km.as_f64() * 1e-6;
        let lambda = self.wavelength_nm.as_f64() * 1e-9;
        let l = self.length_km.as_f64() * 1e3;
        (SPEED_OF_LIGHT / (2.0 * d * l * lambda * lambda)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxFrontendParams<T> {
    /// Target average received optical power, dBm.
    pub rop_dbm: T,
    /// Photodiode responsivity, A/W.
    pub responsivity: T,
    /// RMS of the additive thermal noise current, A.
    pub thermal_noise_rms_a: T,
    /// ADC resolution; 0 means no quantization.
    pub adc_bits: u32,
    pub seed: u64,
}

impl<T: Real> Default for RxFrontendParams<T> {
    fn default() -> Self {
        Self {
            rop_dbm: T::zero(),
            responsivity: T::lit(0.8),
            thermal_noise_rms_a: T::lit(1.6e-5),
            adc_bits: 0,
            seed: 0,
        }
    }
}

impl<T: Real> RxFrontendParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity > T::zero()) {
            return Err(Error::Config("responsivity must be positive".into()));
        }
        if !(self.thermal_noise_rms_a >= T::zero()) {
            return Err(Error::Config("thermal noise RMS must be non-negative".into()));
        }
        if self.adc_bits > 24 {
            return Err(Error::Config("adc_bits above 24 is not supported".into()));
        }
        Ok(())
    }
}

/// Complex baseband optical field, √W.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalField<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: f64,
}

impl<T: Real> OpticalField<T> {
    /// Mean of `|E|²`, watts.
    pub fn average_power(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        self.samples.iter().map(|e| e.norm_sqr()).sum::<T>() / T::from_usize_lossy(self.samples.len())
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|e| e.norm_sqr()).sum()
    }

    pub fn power_trace(&self) -> Vec<T> {
        self.samples.iter().map(|e| e.norm_sqr()).collect()
    }
}

/// First-order low-pass (impulse-invariant RC) with zero initial state.
pub(crate) fn lowpass<T: Real>(x: &[T], bandwidth_hz: T, sample_rate: f64) -> Vec<T> {
    if bandwidth_hz <= T::zero() {
        return x.to_vec();
    }
    let a = T::one() - (-T::TAU() * bandwidth_hz / T::lit(sample_rate)).exp();
    let mut state = T::zero();
    x.iter()
        .map(|&v| {
            state = state + a * (v - state);
            state
        })
        .collect()
}

/// Converts a drive current (mA, bipolar around the bias) into an optical field.
pub fn dml_modulate<T: Real>(drive: &RealWaveform<T>, p: &DmlParams<T>) -> Result<OpticalField<T>> {
    p.validate()?;
    let filtered = lowpass(&drive.samples, p.bandwidth_hz, drive.sample_rate);
    let power: Vec<T> = filtered
        .iter()
        .map(|&d| {
            let x = (p.bias_ma + d - p.threshold_ma).max(T::zero());
            (p.slope_w_per_ma * x * (T::one() - p.compression_per_ma * x)).max(T::zero())
        })
        .collect();

    let half_alpha = p.alpha_chirp / T::lit(2.0);
    let adiabatic = T::TAU() * p.kappa_hz_per_w / T::lit(drive.sample_rate);
    let mut phase = T::zero();
    let mut prev = T::zero();
    let samples = power
        .iter()
        .map(|&pw| {
            if half_alpha != T::zero() && pw > T::zero() && prev > T::zero() {
                phase = phase + half_alpha * (pw.ln() - prev.ln());
            }
            phase = phase + adiabatic * pw;
            prev = pw;
            Complex::from_polar(pw.sqrt(), phase)
        })
        .collect();
    Ok(OpticalField {
        samples,
        sample_rate: drive.sample_rate,
    })
}

/// Linear fiber propagation: `H(ω) = exp(j·β₂·ω²·L/2)` times the span loss.
pub fn fiber_propagate<T: Real>(field: &OpticalField<T>, f: &FiberParams<T>) -> Result<OpticalField<T>> {
    f.validate()?;
    if f.length_km == T::zero() || field.samples.is_empty() {
        return Ok(field.clone());
    }
    let n = field.samples.len();
    let l_m = f.length_km.as_f64() * 1e3;
    let amp = 10f64.powf(-(f.loss_db_km.as_f64() * f.length_km.as_f64()) / 20.0);
    let beta2 = f.beta2();
    let dft = Dft::new(n);
    let mut spec = dft.forward_complex(&field.samples);
    for (k, s) in spec.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let omega = 2.0 * std::f64::consts::PI * bin * field.sample_rate / n as f64;
        let h = Complex::from_polar(amp, beta2 * omega * omega * l_m / 2.0);
        *s = *s * Complex::new(T::lit(h.re), T::lit(h.im));
    }
    Ok(OpticalField {
        samples: dft.inverse_complex(&spec),
        sample_rate: field.sample_rate,
    })
}

/// Scales the field so its mean power is `rop_dbm`.
pub fn attenuate_to_rop<T: Real>(field: &OpticalField<T>, rop_dbm: T) -> Result<OpticalField<T>> {
    let avg = field.average_power();
    if !(avg > T::zero()) {
        return Err(Error::Domain("cannot attenuate a zero-power field".into()));
    }
    let target = T::lit(10f64.powf((rop_dbm.as_f64() - 30.0) / 10.0));
    let g = (target / avg).sqrt();
    Ok(OpticalField {
        samples: field.samples.iter().map(|e| e * g).collect(),
        sample_rate: field.sample_rate,
    })
}

/// Square-law detection plus white Gaussian thermal noise, returned in mA.
pub fn photodetect<T: Real>(field: &OpticalField<T>, p: &RxFrontendParams<T>) -> Result<RealWaveform<T>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = p.thermal_noise_rms_a;
    let ma = T::lit(1e3);
    let mut samples: Vec<T> = field
        .samples
        .iter()
        .map(|e| {
            let n = if noise > T::zero() {
                let g: f64 = StandardNormal.sample(&mut rng);
                noise * T::lit(g)
            } else {
                T::zero()
            };
            (p.responsivity * e.norm_sqr() + n) * ma
        })
        .collect();
    if p.adc_bits > 0 {
        quantize(&mut samples, p.adc_bits);
    }
    RealWaveform::new(samples, field.sample_rate, Unit::Milliamps)
}

/// Uniform `bits`-bit quantizer spanning the observed `[min, max]`.
pub fn quantize<T: Real>(x: &mut [T], bits: u32) {
    let (lo, hi) = x
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        return;
    }
    let steps = T::lit(((1u64 << bits) - 1) as f64);
    let delta = (hi - lo) / steps;
    x.iter_mut().for_each(|v| *v = lo + ((*v - lo) / delta).round() * delta);
}
