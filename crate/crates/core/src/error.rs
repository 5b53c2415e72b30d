use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("invalid dispersal parameter {0}: must be positive and finite")]
    InvalidPsi(f64),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("information is zero: test undefined for n=1")]
    ZeroInformation,

    /// `index` is `None` when the pooled estimate is the degenerate one.
    #[error("degenerate sample: LRT undefined ({})", describe_sample(*.index))]
    DegenerateSample { index: Option<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("at least 2 classes are required, found {0}")]
    TooFewClasses(usize),

    #[error("class {0} has no training items")]
    EmptyClass(usize),

    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("estimated memory {needed} bytes exceeds the cap of {cap} bytes")]
    ResourceLimit { needed: u64, cap: u64 },

    #[error("{0} did not converge")]
    Convergence(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn describe_sample(index: Option<usize>) -> String {
    match index {
        Some(i) => format!("sample {i}"),
        None => "pooled estimate".to_string(),
    }
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
