//! Experiment configuration.
//!
//! Files are TOML; every setting can be written as a flat dotted key
//! (`dml.bias_ma = 21.0`). Unknown keys are rejected. [`ExperimentConfig::dump`]
//! writes the canonical flat form, which parses back to an identical config.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::channel::{DmlParams, FiberParams, RxFrontendParams};
use crate::error::{Error, Result};
use crate::ofdm::{Format, OfdmConfig};
use crate::rx::{EqualizerKind, RxOptions, VolterraConfig};
use crate::tx::{FramePlan, TxParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmSection {
    pub fft_size: usize,
    pub cp_len: usize,
    pub dco_band: usize,
    pub dco_sample_rate_hz: f64,
    pub laco_band: usize,
    pub laco_layers: usize,
    pub laco_sample_rate_hz: f64,
}

impl Default for OfdmSection {
    fn default() -> Self {
        Self {
            fft_size: 256,
            cp_len: 0,
            dco_band: 63,
            dco_sample_rate_hz: 8.75e9,
            laco_band: 64,
            laco_layers: 3,
            laco_sample_rate_hz: 10e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxSection {
    pub clip_sigma: f64,
    pub drive_pp_ma: f64,
}

impl Default for TxSection {
    fn default() -> Self {
        let p = TxParams::<f64>::default();
        Self {
            clip_sigma: p.clip_sigma,
            drive_pp_ma: p.drive_pp_ma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FramesSection {
    pub payload: usize,
    pub training: usize,
    #[serde(with = "seed_value")]
    pub training_seed: u64,
    /// Sync word length in samples.
    pub preamble_len: usize,
    /// Idle samples between sync word and burst, and after the burst.
    pub guard: usize,
}

impl Default for FramesSection {
    fn default() -> Self {
        Self {
            payload: 900,
            training: 100,
            training_seed: 0x7a11,
            preamble_len: 512,
            guard: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmlSection {
    pub threshold_ma: f64,
    pub slope_w_per_ma: f64,
    pub bias_ma: f64,
    pub bandwidth_hz: f64,
    pub compression_per_ma: f64,
    pub alpha_chirp: f64,
    pub kappa_hz_per_w: f64,
}

impl Default for DmlSection {
    fn default() -> Self {
        let p = DmlParams::<f64>::default();
        Self {
            threshold_ma: p.threshold_ma,
            slope_w_per_ma: p.slope_w_per_ma,
            bias_ma: p.bias_ma,
            bandwidth_hz: p.bandwidth_hz,
            compression_per_ma: p.compression_per_ma,
            alpha_chirp: p.alpha_chirp,
            kappa_hz_per_w: p.kappa_hz_per_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub length_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub wavelength_nm: f64,
    pub loss_db_km: f64,
}

impl Default for FiberSection {
    fn default() -> Self {
        let p = FiberParams::<f64>::default();
        Self {
            length_km: p.length_km,
            dispersion_ps_nm_km: p.dispersion_ps_nm_km,
            wavelength_nm: p.wavelength_nm,
            loss_db_km: p.loss_db_km,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RxSection {
    pub rop_dbm: f64,
    pub responsivity: f64,
    pub thermal_noise_rms_a: f64,
    pub adc_bits: u32,
}

impl Default for RxSection {
    fn default() -> Self {
        Self {
            rop_dbm: 0.0,
            responsivity: 0.8,
            thermal_noise_rms_a: DEFAULT_THERMAL_NOISE_A,
            adc_bits: DEFAULT_ADC_BITS,
        }
    }
}

/// Calibrated receiver noise. With the 4-bit ADC the default DCO link sits on a
/// quantization plateau of about 18.5 dB one-tap Q at 0 dBm, and thermal noise
/// takes over below about -6 dBm.
pub const DEFAULT_THERMAL_NOISE_A: f64 = 1.6e-5;
pub const DEFAULT_ADC_BITS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolterraSection {
    pub memory: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub epochs: usize,
    pub lead: usize,
}

impl Default for VolterraSection {
    fn default() -> Self {
        let v = VolterraConfig::<f64>::default();
        Self {
            memory: v.memory,
            mu1: v.mu1,
            mu2: v.mu2,
            epochs: v.epochs,
            lead: v.lead,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub formats: Vec<Format>,
    pub equalizers: Vec<EqualizerKind>,
    pub rop_list_dbm: Vec<f64>,
    /// Fixed biases to sweep; ignored when `bias_opt` is set.
    pub bias_list_ma: Vec<f64>,
    /// Re-optimize the bias at every (format, ROP, equalizer) point.
    pub bias_opt: bool,
    /// Width of the bias search window above threshold.
    pub bias_span_ma: f64,
    pub bias_tol_ma: f64,
    pub bias_grid_step_ma: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            formats: vec![Format::Dco, Format::Laco],
            equalizers: vec![EqualizerKind::OneTap, EqualizerKind::VolterraOneTap],
            rop_list_dbm: (0..8).map(|i| -2.0 * i as f64).collect(),
            bias_list_ma: vec![DmlParams::<f64>::default().bias_ma],
            bias_opt: false,
            bias_span_ma: 20.0,
            bias_tol_ma: 0.05,
            bias_grid_step_ma: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(with = "seed_value")]
    pub seed: u64,
    pub format: Format,
    pub equalizer: EqualizerKind,
    /// Pairwise noise cancellation for LACO behind the Volterra stage.
    pub pairwise: bool,
    pub output_path: String,
    pub ofdm: OfdmSection,
    pub tx: TxSection,
    pub frames: FramesSection,
    pub dml: DmlSection,
    pub fiber: FiberSection,
    pub rx: RxSection,
    pub volterra: VolterraSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            format: Format::Dco,
            equalizer: EqualizerKind::OneTap,
            pairwise: true,
            output_path: "sweep.csv".into(),
            ofdm: OfdmSection::default(),
            tx: TxSection::default(),
            frames: FramesSection::default(),
            dml: DmlSection::default(),
            fiber: FiberSection::default(),
            rx: RxSection::default(),
            volterra: VolterraSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// TOML integers are signed, so seeds above `i64::MAX` travel as decimal
/// strings.
mod seed_value {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(i) => u64::try_from(i).map_err(|_| de::Error::custom(format!("seed {i} is negative"))),
            Raw::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("seed {t:?} is not a u64"))),
        }
    }
}

/// Comment prefix of config lines embedded in CSV output.
pub const EMBED_PREFIX: &str = "# ";

impl ExperimentConfig {
    /// Parses config text with `key=value` overrides applied on top.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config syntax: {}", e.message())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, or the config embedded in a sweep CSV.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&extract_embedded(&text).unwrap_or(text), overrides)
    }

    /// Canonical flat `key = value` form, one setting per line.
    pub fn dump(&self) -> String {
        let value = Value::try_from(self).expect("config serializes");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.join("\n") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        for f in [Format::Dco, Format::Laco] {
            self.ofdm_config(f)?;
        }
        self.tx_params().validate()?;
        self.plan().validate(true)?;
        self.dml_params().validate()?;
        self.fiber_params().validate()?;
        self.frontend(0).validate()?;
        if self.frames.preamble_len < 16 {
            return Err(Error::Config("frames.preamble_len must be ≥ 16".into()));
        }
        if self.frames.payload == 0 {
            return Err(Error::Config("frames.payload must be ≥ 1".into()));
        }
        if self.volterra.memory == 0 {
            return Err(Error::Config("volterra.memory must be ≥ 1".into()));
        }
        if self.volterra.lead >= self.volterra.memory {
            return Err(Error::Config("volterra.lead must be below volterra.memory".into()));
        }
        let s = &self.sweep;
        if s.formats.is_empty() || s.equalizers.is_empty() || s.rop_list_dbm.is_empty() {
            return Err(Error::Config("sweep lists must not be empty".into()));
        }
        if !s.bias_opt && s.bias_list_ma.is_empty() {
            return Err(Error::Config("sweep.bias_list_ma is empty and bias_opt is off".into()));
        }
        if !(s.bias_span_ma > 0.0 && s.bias_tol_ma > 0.0 && s.bias_grid_step_ma > 0.0) {
            return Err(Error::Config("bias search widths must be positive".into()));
        }
        if s.rop_list_dbm.iter().chain(&s.bias_list_ma).any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        Ok(())
    }

    pub fn ofdm_config(&self, format: Format) -> Result<OfdmConfig> {
        let o = &self.ofdm;
        let cfg = match format {
            Format::Dco => OfdmConfig::dco(o.fft_size, o.dco_band, o.dco_sample_rate_hz)?,
            Format::Laco => OfdmConfig::laco(o.fft_size, o.laco_band, o.laco_layers, o.laco_sample_rate_hz)?,
        };
        cfg.with_cp(o.cp_len)
    }

    pub fn tx_params(&self) -> TxParams<f64> {
        TxParams {
            clip_sigma: self.tx.clip_sigma,
            drive_pp_ma: self.tx.drive_pp_ma,
        }
    }

    pub fn plan(&self) -> FramePlan {
        FramePlan::new(self.frames.payload, self.frames.training, self.frames.training_seed)
    }

    pub fn dml_params(&self) -> DmlParams<f64> {
        let d = &self.dml;
        DmlParams {
            threshold_ma: d.threshold_ma,
            slope_w_per_ma: d.slope_w_per_ma,
            bias_ma: d.bias_ma,
            bandwidth_hz: d.bandwidth_hz,
            compression_per_ma: d.compression_per_ma,
            alpha_chirp: d.alpha_chirp,
            kappa_hz_per_w: d.kappa_hz_per_w,
        }
    }

    pub fn fiber_params(&self) -> FiberParams<f64> {
        let f = &self.fiber;
        FiberParams {
            length_km: f.length_km,
            dispersion_ps_nm_km: f.dispersion_ps_nm_km,
            wavelength_nm: f.wavelength_nm,
            loss_db_km: f.loss_db_km,
        }
    }

    pub fn frontend(&self, seed: u64) -> RxFrontendParams<f64> {
        RxFrontendParams {
            rop_dbm: self.rx.rop_dbm,
            responsivity: self.rx.responsivity,
            thermal_noise_rms_a: self.rx.thermal_noise_rms_a,
            adc_bits: self.rx.adc_bits,
            seed,
        }
    }

    pub fn rx_options(&self, equalizer: EqualizerKind) -> RxOptions<f64> {
        let v = &self.volterra;
        RxOptions {
            equalizer,
            volterra: VolterraConfig {
                memory: v.memory,
                mu1: v.mu1,
                mu2: v.mu2,
                epochs: v.epochs,
                lead: v.lead,
            },
            pairwise: self.pairwise,
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Table(t) => {
            // scalars first so a section's own keys precede nested sections
            let (tables, scalars): (Vec<_>, Vec<_>) = t.iter().partition(|(_, v)| v.is_table());
            for (k, v) in scalars.into_iter().chain(tables) {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}

/// Sets `key=value` in `table`, creating intermediate tables. The value is
/// read as a TOML literal, falling back to a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {spec:?} has an empty key")));
    }
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key}: {p} is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Config text from the `# ` header lines of a CSV written by a sweep.
pub fn extract_embedded(text: &str) -> Option<String> {
    let lines: Vec<&str> = text
        .lines()
        .take_while(|l| l.starts_with(EMBED_PREFIX.trim_end()))
        .map(|l| l.strip_prefix(EMBED_PREFIX).unwrap_or(""))
        .collect();
    if lines.is_empty() {
        None
    } else {
        Some(lines.join("\n") + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.dump();
        assert!(text.contains("dml.bias_ma = 21.082\n"), "{text}");
        assert_eq!(ExperimentConfig::parse(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn dotted_keys_and_sections_both_work() {
        let a = ExperimentConfig::parse("dml.bias_ma = 18.5\nformat = \"laco\"\n", &[]).unwrap();
        let b = ExperimentConfig::parse("format = \"laco\"\n[dml]\nbias_ma = 18.5\n", &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dml.bias_ma, 18.5);
        assert_eq!(a.format, Format::Laco);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["dml.bias = 1.0", "nonsense = 3", "sweep.rop = [1.0]"] {
            let e = ExperimentConfig::parse(text, &[]).unwrap_err();
            assert!(e.is_config(), "{text}: {e}");
        }
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::parse(
            "",
            &[
                "dml.bias_ma=19".into(),
                "format=laco".into(),
                "sweep.rop_list_dbm=[-1.0, -3.0]".into(),
                "equalizer = volterra+one_tap".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.dml.bias_ma, 19.0);
        assert_eq!(cfg.format, Format::Laco);
        assert_eq!(cfg.sweep.rop_list_dbm, vec![-1.0, -3.0]);
        assert_eq!(cfg.equalizer, EqualizerKind::VolterraOneTap);
        assert!(ExperimentConfig::parse("", &["novalue".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["dml.nope=1".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for o in ["sweep.rop_list_dbm=[]", "ofdm.fft_size=100", "frames.training=0", "rx.adc_bits=30"] {
            assert!(ExperimentConfig::parse("", &[o.into()]).is_err(), "{o}");
        }
    }

    #[test]
    fn embedded_config_extracted() {
        let big = ExperimentConfig::parse("", &[format!("seed={}", u64::MAX)]).unwrap();
        assert_eq!(big.seed, u64::MAX);
        assert_eq!(ExperimentConfig::parse(&big.dump(), &[]).unwrap(), big);
        assert!(ExperimentConfig::parse("seed = -1\n", &[]).unwrap_err().is_config());
        let cfg = ExperimentConfig::parse("", &["seed=42".into()]).unwrap();
        let csv: String = cfg
            .dump()
            .lines()
            .map(|l| format!("{EMBED_PREFIX}{l}\n"))
            .collect::<String>()
            + "format,rop_dbm\n";
        let back = ExperimentConfig::parse(&extract_embedded(&csv).unwrap(), &[]).unwrap();
        assert_eq!(back, cfg);
        assert!(extract_embedded("a,b\n1,2\n").is_none());
    }
}
