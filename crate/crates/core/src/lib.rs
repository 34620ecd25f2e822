//! Optical OFDM modem and IM/DD link simulator.

pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod ofdm;
pub mod rx;
pub mod scalar;
pub mod tx;

pub use error::{Error, Result};
pub use scalar::Real;

// Double-precision forms of the generic types.
pub type Dft = ofdm::Dft<f64>;
pub type SymbolFrame = ofdm::SymbolFrame<f64>;
pub type RealWaveform = ofdm::RealWaveform<f64>;
pub type TxParams = tx::TxParams<f64>;
pub type TxBurst = tx::TxBurst<f64>;
pub type DmlParams = channel::DmlParams<f64>;
pub type FiberParams = channel::FiberParams<f64>;
pub type RxFrontendParams = channel::RxFrontendParams<f64>;
pub type OpticalField = channel::OpticalField<f64>;
pub type OneTapBank = rx::OneTapBank<f64>;
pub type VolterraWeights = rx::VolterraWeights<f64>;
pub type VolterraConfig = rx::VolterraConfig<f64>;
pub type VolterraEqualizer = rx::VolterraEqualizer<f64>;
pub type EqualizerReport = rx::EqualizerReport<f64>;
pub type RxOptions = rx::RxOptions<f64>;
pub type Reception = rx::Reception<f64>;
