//! Experiment orchestration: configuration, link runs, sweeps and file formats.

pub mod config;
pub mod io;
pub mod link;
pub mod sweep;

pub use config::ExperimentConfig;
pub use io::WaveFile;
pub use link::{capture, demodulate, fit_equalizer, run_link, run_point, LinkResult, Transmission};
pub use sweep::{compare_formats, optimize_bias, sweep_rop, FormatComparison, SweepRow};
