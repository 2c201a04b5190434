use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("csv error in {path}: {detail}")]
    Csv { path: String, detail: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("non-finite loss encountered at epoch {epoch} (loss = {loss})")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("pair sampling cap reached: retained {retained} of {requested} pairs after {draws} draws (degenerate neighbor spec?)")]
    PairSamplingExhausted {
        retained: usize,
        requested: usize,
        draws: usize,
    },

    #[error("arm '{arm}' failed: {source}")]
    Arm {
        arm: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_arm(self, arm: &str) -> Self {
        Error::Arm {
            arm: arm.to_string(),
            source: Box::new(self),
        }
    }
}
