//! Waveform files, equalizer reports and spectrum tables.
//!
//! Waveform files are a 16-byte header followed by little-endian `f32`
//! samples:
//!
//! | bytes | content                            |
//! |-------|------------------------------------|
//! | 0..4  | `OWAV`                             |
//! | 4     | version, 1                         |
//! | 5     | kind, 0 real or 1 interleaved I/Q  |
//! | 6..8  | reserved, 0                        |
//! | 8..16 | sample rate in Hz, `f64`           |

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;
use crate::rx::{EqualizerReport, VolterraEqualizer};
use crate::scalar::Real;

pub const OWAV_MAGIC: &[u8; 4] = b"OWAV";
pub const OWAV_VERSION: u8 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Real(Vec<f32>),
    Complex(Vec<Complex<f32>>),
}

/// Contents of a waveform file.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFile {
    pub sample_rate: f64,
    pub samples: Samples,
}

impl WaveFile {
    pub fn real<T: Real>(samples: &[T], sample_rate: f64) -> Self {
        Self {
            sample_rate,
            samples: Samples::Real(samples.iter().map(|v| v.as_f64() as f32).collect()),
        }
    }

    pub fn complex<T: Real>(samples: &[Complex<T>], sample_rate: f64) -> Self {
        Self {
            sample_rate,
            samples: Samples::Complex(
                samples
                    .iter()
                    .map(|c| Complex::new(c.re.as_f64() as f32, c.im.as_f64() as f32))
                    .collect(),
            ),
        }
    }

    /// Real samples widened to `f64`; complex files are rejected.
    pub fn real_samples(&self) -> Result<Vec<f64>> {
        match &self.samples {
            Samples::Real(v) => Ok(v.iter().map(|&x| x as f64).collect()),
            Samples::Complex(_) => Err(Error::Format("expected a real waveform, found I/Q".into())),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (kind, n) = match &self.samples {
            Samples::Real(v) => (0u8, v.len()),
            Samples::Complex(v) => (1u8, 2 * v.len()),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * n);
        out.extend_from_slice(OWAV_MAGIC);
        out.push(OWAV_VERSION);
        out.push(kind);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        match &self.samples {
            Samples::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Samples::Complex(v) => v.iter().for_each(|c| {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("waveform file has {} bytes, header needs 16", bytes.len())));
        }
        if &bytes[..4] != OWAV_MAGIC {
            return Err(Error::Format("not an OWAV file (bad magic)".into()));
        }
        if bytes[4] != OWAV_VERSION {
            return Err(Error::Format(format!("unsupported OWAV version {}", bytes[4])));
        }
        let sample_rate = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Format(format!("invalid sample rate {sample_rate}")));
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() % 4 != 0 {
            return Err(Error::Format("sample data is not a whole number of f32 values".into()));
        }
        let values: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let samples = match bytes[5] {
            0 => Samples::Real(values),
            1 => {
                if values.len() % 2 != 0 {
                    return Err(Error::Format("I/Q data has an odd number of values".into()));
                }
                Samples::Complex(values.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect())
            }
            k => return Err(Error::Format(format!("unknown sample kind {k}"))),
        };
        Ok(Self { sample_rate, samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

fn list<T: Real>(v: &[T]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{:e}", x.as_f64())).collect();
    format!("[{}]", items.join(", "))
}

/// Training report as `key = value` lines.
pub fn report_text<T: Real>(report: &EqualizerReport<T>, eq: Option<&VolterraEqualizer<T>>) -> String {
    let mut s = String::new();
    let w = &report.weight_snapshot;
    let _ = writeln!(s, "converged = {}", report.converged);
    let _ = writeln!(s, "epochs_used = {}", report.epochs_used);
    let _ = writeln!(s, "initial_mse = {:e}", report.initial_mse.as_f64());
    let _ = writeln!(s, "final_mse = {:e}", report.final_mse.as_f64());
    let _ = writeln!(s, "memory = {}", w.memory());
    if let Some(eq) = eq {
        let _ = writeln!(s, "lead = {}", eq.lead);
    }
    let _ = writeln!(s, "mu1 = {:e}", w.mu1.as_f64());
    let _ = writeln!(s, "mu2 = {:e}", w.mu2.as_f64());
    let _ = writeln!(s, "w1 = {}", list(&w.w1));
    let _ = writeln!(s, "w2 = {}", list(&w.w2));
    s
}

/// Metrics as `key = value` lines.
pub fn metrics_text(m: &MetricsRecord) -> String {
    toml::to_string(m).expect("metrics serialize")
}

/// Spectrum as `frequency_hz,power_db` CSV.
pub fn spectrum_csv(spectrum: &[(f64, f64)]) -> String {
    let mut s = String::from("frequency_hz,power_db\n");
    for (f, p) in spectrum {
        let _ = writeln!(s, "{f},{p}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rx::volterra_train;

    #[test]
    fn header_layout() {
        let f = WaveFile::real(&[1.0f64, -2.5], 20e9);
        let b = f.to_bytes();
        assert_eq!(b.len(), 16 + 8);
        assert_eq!(&b[..4], b"OWAV");
        assert_eq!((b[4], b[5], b[6], b[7]), (1, 0, 0, 0));
        assert_eq!(f64::from_le_bytes(b[8..16].try_into().unwrap()), 20e9);
        assert_eq!(f32::from_le_bytes(b[20..24].try_into().unwrap()), -2.5);
        assert_eq!(WaveFile::from_bytes(&b).unwrap(), f);
    }

    #[test]
    fn complex_round_trip_interleaves() {
        let f = WaveFile::complex(&[Complex::new(1.0f64, 2.0), Complex::new(-3.0, 0.5)], 1e9);
        let b = f.to_bytes();
        assert_eq!(b[5], 1);
        assert_eq!(f32::from_le_bytes(b[20..24].try_into().unwrap()), 2.0);
        assert_eq!(WaveFile::from_bytes(&b).unwrap(), f);
        assert!(f.real_samples().is_err());
    }

    #[test]
    fn malformed_files_rejected() {
        let good = WaveFile::real(&[0.0f64; 3], 1.0).to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        let mut bad_kind = good.clone();
        bad_kind[5] = 7;
        for b in [&bad_magic[..], &bad_version, &bad_kind, &good[..10], &good[..good.len() - 1]] {
            let e = WaveFile::from_bytes(b).unwrap_err();
            assert!(e.is_config(), "{e}");
        }
    }

    #[test]
    fn report_lists_all_taps() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.7).sin()).collect();
        let (_, report) = volterra_train(&x, &x, 3, 1e-2, 1e-3, 2).unwrap();
        let text = report_text(&report, None);
        let table: toml::Table = text.parse().unwrap();
        assert_eq!(table["w1"].as_array().unwrap().len(), 3);
        assert_eq!(table["w2"].as_array().unwrap().len(), 6);
        assert_eq!(table["epochs_used"].as_integer(), Some(2));
    }

    #[test]
    fn metrics_text_parses() {
        let cfg = crate::harness::ExperimentConfig::parse("frames.payload = 20\n", &[]).unwrap();
        let m = crate::harness::run_link(&cfg).unwrap();
        let table: toml::Table = metrics_text(&m).parse().unwrap();
        assert_eq!(table["bits_counted"].as_integer(), Some(m.bits_counted as i64));
        assert_eq!(table["q_evm_db"].as_float(), Some(m.q_evm_db));
    }
}
