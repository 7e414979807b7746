use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column `{column}`: {message}")]
    RowParse {
        line: usize,
        column: String,
        message: String,
    },
    #[error("duplicate record for occupant `{occupant}` at {timestamp}")]
    DuplicateKey { occupant: String, timestamp: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("window of {len} samples is shorter than the minimum {min}")]
    WindowTooShort { len: usize, min: usize },
    #[error("no {daytype} data for occupant `{occupant}`, resource {resource}")]
    MissingBaselineData {
        occupant: String,
        resource: String,
        daytype: String,
    },
    #[error("baseline must be positive, got {0}")]
    InvalidBaseline(f64),
    #[error("train and test intervals overlap")]
    Overlap,
    #[error("choice set is empty")]
    EmptyChoiceSet,
    #[error("horizon of {0} minutes is shorter than one day")]
    InvalidHorizon(usize),
    #[error("occupant id `{0}` appears more than once")]
    DuplicateOccupantId(String),
    #[error("all labels are identical")]
    DegenerateLabels,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("table is empty")]
    EmptyTable,
    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("k = {k} is outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("minority class has {0} rows, need at least 2")]
    MinorityTooSmall(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("pooled covariance is singular")]
    SingularCovariance,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("expected {expected} features, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("{rows} rows available, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("design has no nonzero inner products with the response")]
    DegenerateDesign,
    #[error("cannot build {folds} folds: {detail}")]
    FoldTooSmall { folds: usize, detail: String },
    #[error("series of length {len} is too short, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("regression design is rank deficient")]
    RankDeficient,
    #[error("{0} players, need at least 3")]
    TooFewPlayers(usize),
    #[error("search space is empty")]
    EmptySpace,
    #[error("series is empty")]
    EmptySeries,
    #[error("sample of size {0} is too small, need at least 2")]
    SampleTooSmall(usize),
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(err: toml::de::Error) -> Self {
        Error::InvalidConfig(err.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(err: toml::ser::Error) -> Self {
        Error::Format(err.to_string())
    }
}
