//! Truncated second-order Volterra equalizer trained by LMS.
//!
//! ```text
//! y(k) = Σ_l w1(l)·x(k−l) + Σ_{l1 ≤ l2} w2(l1,l2)·x(k−l1)·x(k−l2)
//! ```
//!
//! The quadratic kernel is kept in symmetric (upper-triangular) form, so a
//! memory of `L` taps has `L` linear and `L(L+1)/2` quadratic weights.

use crate::error::{Error, Result};
use crate::scalar::{mean, mean_square, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraWeights<T> {
    memory: usize,
    /// Linear kernel, `memory` taps.
    pub w1: Vec<T>,
    /// Quadratic kernel packed row-major over `l1 ≤ l2`.
    pub w2: Vec<T>,
    pub mu1: T,
    pub mu2: T,
}

impl<T: Real> VolterraWeights<T> {
    pub fn zeros(memory: usize, mu1: T, mu2: T) -> Self {
        Self {
            memory,
            w1: vec![T::zero(); memory],
            w2: vec![T::zero(); quadratic_len(memory)],
            mu1,
            mu2,
        }
    }

    /// `w1 = δ₀`, `w2 = 0`: passes the input through unchanged.
    pub fn identity(memory: usize) -> Self {
        let mut w = Self::zeros(memory, T::zero(), T::zero());
        w.w1[0] = T::one();
        w
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn w2_at(&self, l1: usize, l2: usize) -> T {
        let (a, b) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        self.w2[pair_index(self.memory, a, b)]
    }

    pub fn set_w2(&mut self, l1: usize, l2: usize, v: T) {
        let (a, b) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let i = pair_index(self.memory, a, b);
        self.w2[i] = v;
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.len() != self.memory || self.w2.len() != quadratic_len(self.memory) {
            return Err(Error::Contract(format!(
                "kernel sizes {}/{} do not match memory {}",
                self.w1.len(),
                self.w2.len(),
                self.memory
            )));
        }
        if self.w1.iter().chain(&self.w2).any(|w| !w.is_finite()) {
            return Err(Error::Contract("non-finite Volterra weight".into()));
        }
        Ok(())
    }
}

/// `L(L+1)/2`.
pub fn quadratic_len(memory: usize) -> usize {
    memory * (memory + 1) / 2
}

#[inline]
fn pair_index(memory: usize, l1: usize, l2: usize) -> usize {
    // rows r < l1 hold (memory - r) entries each
    l1 * memory - l1 * l1.saturating_sub(1) / 2 + (l2 - l1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerReport<T> {
    pub converged: bool,
    /// Windowed MSE of the last training window, relative to the desired power.
    pub final_mse: T,
    /// Windowed MSE of the first training window, same normalization.
    pub initial_mse: T,
    pub epochs_used: usize,
    pub weight_snapshot: VolterraWeights<T>,
}

/// Sliding history `x(k), x(k−1), …, x(k−L+1)`, zero before the first sample.
struct History<T> {
    buf: Vec<T>,
}

impl<T: Real> History<T> {
    fn new(memory: usize) -> Self {
        Self {
            buf: vec![T::zero(); memory],
        }
    }

    fn push(&mut self, v: T) {
        self.buf.rotate_right(1);
        self.buf[0] = v;
    }

    fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = T::zero());
    }
}

#[inline]
fn output<T: Real>(w: &VolterraWeights<T>, u: &[T]) -> T {
    let mut y = T::zero();
    for (a, b) in w.w1.iter().zip(u) {
        y = y + *a * *b;
    }
    let mut idx = 0;
    for i in 0..u.len() {
        let ui = u[i];
        let mut row = T::zero();
        for j in i..u.len() {
            row = row + w.w2[idx] * u[j];
            idx += 1;
        }
        y = y + ui * row;
    }
    y
}

/// Filters `x` through the kernel, zero history before the first sample.
pub fn volterra_apply<T: Real>(x: &[T], w: &VolterraWeights<T>) -> Vec<T> {
    let mut h = History::new(w.memory);
    x.iter()
        .map(|&v| {
            h.push(v);
            output(w, &h.buf)
        })
        .collect()
}

/// LMS training of a zero-initialized kernel of memory `memory`.
///
/// Both sequences are scaled to unit RMS for adaptation, so `mu1`/`mu2` are
/// independent of signal level; the returned weights have that scaling
/// folded back in and act on the raw `x`. Each epoch restarts from a zero
/// history. With two or more epochs the returned kernel is the average of
/// the per-sample iterates over the final epoch. Fails with [`Error::Diverged`] if any window's MSE exceeds
/// 1000× the first window's.
pub fn volterra_train<T: Real>(
    x: &[T],
    desired: &[T],
    memory: usize,
    mu1: T,
    mu2: T,
    epochs: usize,
) -> Result<(VolterraWeights<T>, EqualizerReport<T>)> {
    if memory == 0 {
        return Err(Error::Config("Volterra memory must be ≥ 1".into()));
    }
    if x.len() != desired.len() {
        return Err(Error::Framing(format!(
            "training input {} and desired {} differ in length",
            x.len(),
            desired.len()
        )));
    }
    if x.len() < 10 * memory {
        return Err(Error::Framing(format!(
            "{} training samples, need ≥ {}",
            x.len(),
            10 * memory
        )));
    }
    let sx = mean_square(x).sqrt();
    let sd = mean_square(desired).sqrt();
    if sx == T::zero() || sd == T::zero() {
        return Err(Error::Domain("training sequences must not be all zero".into()));
    }
    let xn: Vec<T> = x.iter().map(|&v| v / sx).collect();
    let dn: Vec<T> = desired.iter().map(|&v| v / sd).collect();

    let mut w = VolterraWeights::zeros(memory, mu1, mu2);
    let mut h = History::new(memory);
    let window = (x.len() / 10).max(memory);
    let mut initial = None;
    let mut window_acc = T::zero();
    let mut window_n = 0usize;
    let mut last = T::zero();

    // iterate average over the final epoch; damps the LMS gradient jitter
    let mut avg = VolterraWeights::zeros(memory, mu1, mu2);
    let averaging = epochs >= 2;
    for epoch in 0..epochs {
        h.reset();
        let last_epoch = averaging && epoch + 1 == epochs;
        for (&xv, &dv) in xn.iter().zip(&dn) {
            h.push(xv);
            let e = dv - output(&w, &h.buf);
            let g1 = mu1 * e;
            let g2 = mu2 * e;
            for (wi, ui) in w.w1.iter_mut().zip(&h.buf) {
                *wi = *wi + g1 * *ui;
            }
            let mut idx = 0;
            for i in 0..memory {
                let gi = g2 * h.buf[i];
                for j in i..memory {
                    w.w2[idx] = w.w2[idx] + gi * h.buf[j];
                    idx += 1;
                }
            }

            window_acc = window_acc + e * e;
            window_n += 1;
            if window_n == window {
                let mse = window_acc / T::from_usize_lossy(window);
                let init = *initial.get_or_insert(mse);
                if !mse.is_finite() || mse > init * T::lit(1e3) {
                    return Err(Error::Diverged {
                        epoch,
                        mse: mse.as_f64(),
                        initial: init.as_f64(),
                    });
                }
                last = mse;
                window_acc = T::zero();
                window_n = 0;
            }
            if last_epoch {
                for (a, v) in avg.w1.iter_mut().zip(&w.w1).chain(avg.w2.iter_mut().zip(&w.w2)) {
                    *a = *a + *v;
                }
            }
        }
    }
    if averaging {
        let n = T::from_usize_lossy(x.len());
        avg.w1.iter_mut().chain(avg.w2.iter_mut()).for_each(|a| *a = *a / n);
        w = avg;
    }
    let initial = initial.unwrap_or_else(|| mean_square(&dn));
    if epochs == 0 {
        last = initial;
    }

    let g1 = sd / sx;
    let g2 = sd / (sx * sx);
    let mut raw = w.clone();
    raw.w1.iter_mut().for_each(|v| *v = *v * g1);
    raw.w2.iter_mut().for_each(|v| *v = *v * g2);
    raw.validate()?;

    let report = EqualizerReport {
        converged: last < initial * T::lit(0.5),
        final_mse: last,
        initial_mse: initial,
        epochs_used: epochs,
        weight_snapshot: raw.clone(),
    };
    Ok((raw, report))
}

/// Training hyper-parameters of the receiver's Volterra stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraConfig<T> {
    pub memory: usize,
    pub mu1: T,
    pub mu2: T,
    pub epochs: usize,
    /// Samples of look-ahead: output `k` uses inputs `k+lead … k+lead−L+1`.
    pub lead: usize,
}

impl<T: Real> Default for VolterraConfig<T> {
    fn default() -> Self {
        Self {
            memory: 10,
            mu1: T::lit(1e-3),
            mu2: T::lit(1e-4),
            epochs: 20,
            lead: 5,
        }
    }
}

/// Waveform-level equalizer: mean removal, look-ahead alignment and the
/// kernel, mapping a received waveform onto the transmit drive.
#[derive(Debug, Clone)]
pub struct VolterraEqualizer<T> {
    pub weights: VolterraWeights<T>,
    pub lead: usize,
    input_mean: T,
    output_mean: T,
}

impl<T: Real> VolterraEqualizer<T> {
    pub fn train(
        rx_training: &[T],
        tx_training: &[T],
        cfg: &VolterraConfig<T>,
    ) -> Result<(Self, EqualizerReport<T>)> {
        if cfg.lead >= cfg.memory {
            // the current sample would fall outside the window
            return Err(Error::Config("Volterra look-ahead must be below the memory".into()));
        }
        if cfg.lead >= rx_training.len() {
            return Err(Error::Config("Volterra look-ahead exceeds training length".into()));
        }
        let input_mean = mean(rx_training);
        let output_mean = mean(tx_training);
        let x = advance(rx_training, input_mean, cfg.lead);
        let d: Vec<T> = tx_training.iter().map(|&v| v - output_mean).collect();
        let (weights, report) = volterra_train(&x, &d, cfg.memory, cfg.mu1, cfg.mu2, cfg.epochs)?;
        Ok((
            Self {
                weights,
                lead: cfg.lead,
                input_mean,
                output_mean,
            },
            report,
        ))
    }

    /// Passes the waveform through unchanged.
    pub fn identity(memory: usize) -> Self {
        Self {
            weights: VolterraWeights::identity(memory),
            lead: 0,
            input_mean: T::zero(),
            output_mean: T::zero(),
        }
    }

    pub fn apply(&self, rx: &[T]) -> Vec<T> {
        let x = advance(rx, self.input_mean, self.lead);
        volterra_apply(&x, &self.weights)
            .into_iter()
            .map(|v| v + self.output_mean)
            .collect()
    }
}

/// `x[k + lead] − offset`, zero-filled past the end.
fn advance<T: Real>(x: &[T], offset: T, lead: usize) -> Vec<T> {
    if lead == 0 && offset == T::zero() {
        return x.to_vec();
    }
    let mut out: Vec<T> = x.iter().skip(lead).map(|&v| v - offset).collect();
    out.resize(x.len(), T::zero());
    out
}
