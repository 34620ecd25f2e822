use crate::error::{Error, Result};
use crate::scalar::{mean, Real};

/// Location of `preamble` inside `rx` by normalized (Pearson) cross-correlation.
///
/// Offsets whose window has no variance score zero. The peak must stand at
/// least 2× above the strongest correlation more than `max(2, len/16)`
/// samples away, otherwise [`Error::SyncFailure`].
pub fn synchronize<T: Real>(rx: &[T], preamble: &[T]) -> Result<usize> {
    let m = preamble.len();
    if m < 2 || rx.len() < m {
        return Err(Error::Framing(format!(
            "cannot search a {m}-sample preamble in {} samples",
            rx.len()
        )));
    }
    let p_mean = mean(preamble);
    let centered: Vec<T> = preamble.iter().map(|&v| v - p_mean).collect();
    let p_norm = centered.iter().map(|&v| v * v).sum::<T>().sqrt();
    if p_norm == T::zero() {
        return Err(Error::Config("preamble has no variance".into()));
    }
    let scores = normalized_correlation(rx, &centered, p_norm);

    let (peak_at, peak) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::neg_infinity()), |best, (i, s)| if s > best.1 { (i, s) } else { best });
    let guard = (m / 16).max(2);
    let sidelobe = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(peak_at) > guard)
        .map(|(_, s)| s.abs())
        .fold(T::zero(), T::max);
    let psr = if sidelobe > T::zero() { (peak / sidelobe).as_f64() } else { f64::INFINITY };
    if !(psr >= 2.0) {
        return Err(Error::SyncFailure { psr });
    }
    Ok(peak_at)
}

fn normalized_correlation<T: Real>(rx: &[T], centered: &[T], p_norm: T) -> Vec<T> {
    let m = centered.len();
    let mf = T::from_usize_lossy(m);
    let mut sum = rx[..m].iter().copied().sum::<T>();
    let mut sum_sq = rx[..m].iter().map(|&v| v * v).sum::<T>();
    let floor = T::epsilon() * T::lit(16.0);
    let mut out = Vec::with_capacity(rx.len() - m + 1);
    for off in 0..=rx.len() - m {
        if off > 0 {
            let (old, new) = (rx[off - 1], rx[off + m - 1]);
            sum = sum + new - old;
            sum_sq = sum_sq + new * new - old * old;
        }
        let var = (sum_sq - sum * sum / mf).max(T::zero());
        let window = &rx[off..off + m];
        let energy_ref = window.iter().map(|&v| v * v).sum::<T>().max(T::min_positive_value());
        if var <= floor * energy_ref {
            out.push(T::zero());
            continue;
        }
        let dot = window.iter().zip(centered).map(|(&a, &b)| a * b).sum::<T>();
        out.push(dot / (p_norm * var.sqrt()));
    }
    out
}
