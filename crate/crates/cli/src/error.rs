use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("missing {artifact}: run `bethe-tau {producer}` first")]
    Dependency { artifact: String, producer: &'static str },
    #[error("{artifact} does not match this configuration ({reason}); rerun `bethe-tau {producer}`")]
    Stale {
        artifact: String,
        producer: &'static str,
        reason: String,
    },
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {message}")]
    Artifact { path: String, message: String },
    #[error("computation failed: {0}")]
    Compute(String),
}

impl CliError {
    /// 2 for configuration and dependency problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

pub fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}
