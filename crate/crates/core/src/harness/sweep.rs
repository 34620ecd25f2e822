//! ROP sweeps, bias optimization and format comparison.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, EMBED_PREFIX};
use crate::harness::link::{capture, demodulate, mix_seed, score, LinkResult, Transmission};
use crate::metrics::MetricsRecord;
use crate::ofdm::Format;
use crate::rx::EqualizerKind;

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub format: Format,
    pub rop_dbm: f64,
    pub bias_ma: f64,
    pub equalizer: EqualizerKind,
    pub q_evm_db: f64,
    pub q_ber_db: f64,
    pub ber: f64,
    pub evm: f64,
    pub bits: usize,
    pub seed: u64,
}

impl SweepRow {
    fn new(format: Format, rop_dbm: f64, bias_ma: f64, equalizer: EqualizerKind, seed: u64, m: &MetricsRecord) -> Self {
        Self {
            format,
            rop_dbm,
            bias_ma,
            equalizer,
            q_evm_db: m.q_evm_db,
            q_ber_db: m.q_ber_db,
            ber: m.ber,
            evm: m.evm_rms,
            bits: m.bits_counted,
            seed,
        }
    }
}

/// Stream seed of one grid cell. Every equalizer at the cell shares it.
pub fn point_seed(base: u64, format: Format, rop_index: usize, bias_index: usize) -> u64 {
    let f = match format {
        Format::Dco => 0,
        Format::Laco => 1,
    };
    mix_seed(mix_seed(mix_seed(base, 0x100 + f), 0x200 + rop_index as u64), 0x300 + bias_index as u64)
}

/// Runs one captured waveform through several equalizers.
fn evaluate(
    cfg: &ExperimentConfig,
    tx: &Transmission,
    bias_ma: f64,
    rop_dbm: f64,
    equalizers: &[EqualizerKind],
) -> Result<Vec<LinkResult>> {
    let rx = capture(cfg, tx, bias_ma, rop_dbm)?;
    equalizers
        .iter()
        .map(|&eq| {
            let rec = demodulate(cfg, tx, &rx.samples, eq)?;
            Ok(LinkResult {
                metrics: score(tx, &rec)?,
                report: rec.report,
            })
        })
        .collect()
}

struct Cell {
    format: Format,
    rop_index: usize,
    rop: f64,
    bias_index: usize,
    bias: Option<f64>,
}

/// Evaluates the sweep grid of `cfg`.
///
/// Rows come out in grid order (format, ROP, bias, equalizer) whatever order
/// the points finish in. With `sweep.bias_opt` the bias is optimized
/// separately for every equalizer.
pub fn sweep_rop(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let s = &cfg.sweep;
    let mut cells = Vec::new();
    for &format in &s.formats {
        for (rop_index, &rop) in s.rop_list_dbm.iter().enumerate() {
            if s.bias_opt {
                cells.push(Cell { format, rop_index, rop, bias_index: 0, bias: None });
            } else {
                for (bias_index, &b) in s.bias_list_ma.iter().enumerate() {
                    cells.push(Cell { format, rop_index, rop, bias_index, bias: Some(b) });
                }
            }
        }
    }
    let rows: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|c| -> Result<Vec<SweepRow>> {
            let seed = point_seed(cfg.seed, c.format, c.rop_index, c.bias_index);
            let tx = Transmission::new(cfg, c.format, seed)?;
            match c.bias {
                Some(bias) => {
                    let results = evaluate(cfg, &tx, bias, c.rop, &s.equalizers)?;
                    Ok(s.equalizers
                        .iter()
                        .zip(&results)
                        .map(|(&eq, r)| SweepRow::new(c.format, c.rop, bias, eq, seed, &r.metrics))
                        .collect())
                }
                None => s
                    .equalizers
                    .iter()
                    .map(|&eq| {
                        let (bias, m) = optimize_bias_for(cfg, &tx, c.rop, eq)?;
                        Ok(SweepRow::new(c.format, c.rop, bias, eq, seed, &m))
                    })
                    .collect(),
            }
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Bias maximizing EVM-based Q for `cfg.format` at `rop_dbm`, with `cfg.equalizer`.
pub fn optimize_bias(cfg: &ExperimentConfig, rop_dbm: f64) -> Result<(f64, MetricsRecord)> {
    cfg.validate()?;
    let tx = Transmission::new(cfg, cfg.format, cfg.seed)?;
    optimize_bias_for(cfg, &tx, rop_dbm, cfg.equalizer)
}

/// Golden-section search over `[threshold, threshold + span]`, falling back
/// to a grid when the ends beat the interior.
pub fn optimize_bias_for(
    cfg: &ExperimentConfig,
    tx: &Transmission,
    rop_dbm: f64,
    equalizer: EqualizerKind,
) -> Result<(f64, MetricsRecord)> {
    let lo = cfg.dml.threshold_ma;
    let hi = lo + cfg.sweep.bias_span_ma;
    let tol = cfg.sweep.bias_tol_ma;
    let mut best: Option<(f64, MetricsRecord)> = None;
    let mut q = |bias: f64| -> Result<f64> {
        let m = match evaluate(cfg, tx, bias, rop_dbm, &[equalizer]) {
            Ok(mut r) => r.remove(0).metrics,
            Err(e) if e.is_config() => return Err(e),
            // a bias the receiver cannot lock onto is simply a bad bias
            Err(e) => {
                log::debug!("bias {bias:.3} mA failed: {e}");
                return Ok(f64::NEG_INFINITY);
            }
        };
        let v = m.q_evm_db;
        if best.as_ref().is_none_or(|(_, b)| v > b.q_evm_db) {
            best = Some((bias, m));
        }
        Ok(v)
    };

    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let (qa, qb) = (q(a)?, q(b)?);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut qc, mut qd) = (q(c)?, q(d)?);
    if qa > qc.max(qd) && qb > qc.max(qd) {
        log::warn!(
            "{} {equalizer} at {rop_dbm} dBm: Q is not unimodal in bias, using a {} mA grid",
            tx.format,
            cfg.sweep.bias_grid_step_ma
        );
        let steps = ((hi - lo) / cfg.sweep.bias_grid_step_ma).round() as usize;
        for i in 1..steps {
            q(lo + i as f64 * cfg.sweep.bias_grid_step_ma)?;
        }
    } else {
        while b - a > tol {
            if qc >= qd {
                b = d;
                d = c;
                qd = qc;
                c = b - g * (b - a);
                qc = q(c)?;
            } else {
                a = c;
                c = d;
                qc = qd;
                d = a + g * (b - a);
                qd = q(d)?;
            }
        }
    }
    match best {
        Some((bias, m)) if m.q_evm_db.is_finite() => Ok((bias, m)),
        _ => Err(Error::DecodeFailure(format!(
            "no bias in [{lo}, {hi}] mA gave a decodable {} link at {rop_dbm} dBm",
            tx.format
        ))
        .at("bias search")),
    }
}

/// Bias-optimized Q of both formats at one ROP and fiber length.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatComparison {
    pub length_km: f64,
    pub rop_dbm: f64,
    pub equalizer: EqualizerKind,
    pub dco: (f64, f64),
    pub laco: (f64, f64),
}

impl FormatComparison {
    /// Q(LACO) − Q(DCO) in dB.
    pub fn delta_q_db(&self) -> f64 {
        self.laco.1 - self.dco.1
    }
}

/// Compares the formats back to back and over `fiber.length_km` (30 km when
/// the config has no fiber), at every sweep ROP and equalizer.
pub fn compare_formats(cfg: &ExperimentConfig) -> Result<Vec<FormatComparison>> {
    cfg.validate()?;
    let long = if cfg.fiber.length_km > 0.0 { cfg.fiber.length_km } else { 30.0 };
    let mut jobs = Vec::new();
    for length_km in [0.0, long] {
        for (rop_index, &rop_dbm) in cfg.sweep.rop_list_dbm.iter().enumerate() {
            for &equalizer in &cfg.sweep.equalizers {
                jobs.push((length_km, rop_index, rop_dbm, equalizer));
            }
        }
    }
    jobs.par_iter()
        .map(|&(length_km, rop_index, rop_dbm, equalizer)| {
            let mut c = cfg.clone();
            c.fiber.length_km = length_km;
            let best = |format| -> Result<(f64, f64)> {
                let tx = Transmission::new(&c, format, point_seed(cfg.seed, format, rop_index, 0))?;
                let (bias, m) = optimize_bias_for(&c, &tx, rop_dbm, equalizer)?;
                Ok((bias, m.q_evm_db))
            };
            Ok(FormatComparison {
                length_km,
                rop_dbm,
                equalizer,
                dco: best(Format::Dco)?,
                laco: best(Format::Laco)?,
            })
        })
        .collect()
}

/// Plain-text table of a format comparison.
pub fn comparison_table(rows: &[FormatComparison]) -> String {
    let mut out = String::from("length_km,rop_dbm,equalizer,dco_bias_ma,dco_q_db,laco_bias_ma,laco_q_db,delta_q_db\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.length_km,
            r.rop_dbm,
            r.equalizer,
            r.dco.0,
            r.dco.1,
            r.laco.0,
            r.laco.1,
            r.delta_q_db()
        );
    }
    out
}

/// Writes sweep rows as CSV, preceded by the config as `# ` comment lines.
pub fn write_csv<W: Write>(mut out: W, cfg: &ExperimentConfig, rows: &[SweepRow]) -> Result<()> {
    for line in cfg.dump().lines() {
        writeln!(out, "{EMBED_PREFIX}{line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(HEADER)?;
    }
    w.flush()?;
    Ok(())
}

const HEADER: [&str; 10] = [
    "format", "rop_dbm", "bias_ma", "equalizer", "q_evm_db", "q_ber_db", "ber", "evm", "bits", "seed",
];

/// Reads rows written by [`write_csv`], skipping the embedded config.
pub fn read_csv(text: &str) -> Result<Vec<SweepRow>> {
    let body: String = text
        .lines()
        .skip_while(|l| l.starts_with(EMBED_PREFIX.trim_end()))
        .flat_map(|l| [l, "\n"])
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    if r.headers()?.iter().ne(HEADER) {
        return Err(Error::Format("sweep CSV header does not match".into()));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
