use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dead subcarriers (|H| below floor): {0:?}")]
    DeadSubcarrier(Vec<usize>),

    #[error("synchronization failed: peak-to-sidelobe ratio {psr:.3} < 2")]
    SyncFailure { psr: f64 },

    #[error("LMS diverged at epoch {epoch}: windowed MSE {mse:.3e} vs initial {initial:.3e}")]
    Diverged { epoch: usize, mse: f64, initial: f64 },

    #[error("decode failure: {0}")]
    DecodeFailure(String),

    #[error("input outside domain: {0}")]
    Domain(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps `self` with the name of the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input (config values, file contents).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Format(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }

    /// Process exit code: 2 for configuration errors, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            3
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
