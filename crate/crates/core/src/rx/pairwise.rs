use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pairwise noise cancellation for a single ACO layer.
///
/// A clipped layer with antiperiod `P = N/2^l` is nonzero in at most one of
/// the samples `k` and `k + P`. For every such pair (`k mod 2P < P`, per
/// OFDM symbol) the smaller sample is zeroed and the larger kept.
pub fn pairwise_cancel<T: Real>(residual: &[T], layer: usize, n: usize) -> Result<Vec<T>> {
    if layer == 0 || n >> layer == 0 {
        return Err(Error::Config(format!("layer {layer} has no antiperiod in a {n}-point symbol")));
    }
    if residual.len() % n != 0 {
        return Err(Error::Framing(format!(
            "residual length {} is not a multiple of {n}",
            residual.len()
        )));
    }
    let p = n >> layer;
    let mut out = residual.to_vec();
    for sym in out.chunks_mut(n) {
        for k in (0..n).filter(|k| k % (2 * p) < p) {
            if sym[k] < sym[k + p] {
                sym[k] = T::zero();
            } else {
                sym[k + p] = T::zero();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{dft, layer_subcarriers, Dft};
    use crate::tx::{clipped_layer_symbol, qpsk_mod, random_bits};
    use num_complex::Complex;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const N: usize = 256;

    fn clipped_layer(layer: usize, rows: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Complex<f64>>) {
        let bins = layer_subcarriers(layer, 64);
        let d = Dft::new(N);
        let syms: Vec<Complex<f64>> = qpsk_mod(&random_bits(rng, rows * bins.len() * 2)).unwrap();
        let x = syms
            .chunks(bins.len())
            .flat_map(|row| clipped_layer_symbol(&d, &bins, row).unwrap())
            .collect();
        (x, syms)
    }

    #[test]
    fn pair_example() {
        // N = 4, layer 1: pairs (0,2), (1,3)
        let out = pairwise_cancel(&[3.0, 0.1, 0.2, 0.4], 1, 4).unwrap();
        assert_eq!(out, vec![3.0, 0.0, 0.0, 0.4]);
    }

    #[test]
    fn noiseless_layers_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for layer in 1..=3 {
            let (x, _) = clipped_layer(layer, 10, &mut rng);
            assert_eq!(pairwise_cancel(&x, layer, N).unwrap(), x);
        }
    }

    #[test]
    fn rejects_partial_symbols() {
        assert!(pairwise_cancel(&[0.0; 10], 1, 4).is_err());
        assert!(pairwise_cancel(&[0.0; 8], 3, 4).is_err());
    }

    #[test]
    fn halves_noise_on_layer_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bins = layer_subcarriers(1, 64);
        let (mut before, mut after) = (0.0, 0.0);
        for _ in 0..100 {
            let (x, syms) = clipped_layer(1, 4, &mut rng);
            let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
            let noise = Normal::new(0.0, 0.1 * rms).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let z = pairwise_cancel(&y, 1, N).unwrap();
            for (sig, pow) in [(&y, &mut before), (&z, &mut after)] {
                let spectra = dft(sig, N).unwrap();
                for (s, row) in spectra.iter().zip(syms.chunks(bins.len())) {
                    for (&k, &tx) in bins.iter().zip(row) {
                        *pow += (s[k] * 2.0 - tx).norm_sqr();
                    }
                }
            }
        }
        let ratio = after / before;
        assert!(ratio <= 0.6, "noise ratio {ratio}");
    }

    proptest! {
        #[test]
        fn never_grows_or_creates(x in proptest::collection::vec(-5.0f64..5.0, 32), layer in 1usize..4) {
            let y = pairwise_cancel(&x, layer, 16).unwrap();
            for (a, b) in x.iter().zip(&y) {
                prop_assert!(*b == *a || *b == 0.0);
                prop_assert!(b.abs() <= a.abs());
            }
            let nonneg: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            prop_assert!(pairwise_cancel(&nonneg, layer, 16).unwrap().iter().all(|v| *v >= 0.0));
        }
    }
}
