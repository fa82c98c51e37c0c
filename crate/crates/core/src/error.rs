use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported image format ({reason})")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{path}: malformed image ({reason})")]
    MalformedImage { path: PathBuf, reason: String },
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("downsample factor {factor} does not divide {width}x{height}")]
    NonDivisibleFactor { factor: usize, width: usize, height: usize },
    #[error("invalid filter bank parameters: {0}")]
    InvalidBank(String),
    #[error("channel {channel} out of range (bank has {channels} channels)")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error(
        "support of radius {radius} around ({x:.3}, {y:.3}) leaves the {width}x{height} image"
    )]
    OutOfBounds { x: f64, y: f64, radius: usize, width: usize, height: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("incompatible face codes: {0}")]
    Incompatible(String),
    #[error("jet has zero norm{}", .context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DegenerateJet { context: Option<String> },
    #[error("rigid search has no in-bounds placement")]
    NoPlacement,
    #[error("unknown face id {0:?}")]
    UnknownId(String),
    #[error("invalid trial: {0}")]
    InvalidTrial(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("no comparable trials")]
    EmptyComparison,
    #[error("faces {0:?} and {1:?} never compete in any triad")]
    NeverCoOccurring(String, String),
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("missing rating for pair ({0}, {1}) in block {2}")]
    MissingPair(String, String, String),
    #[error("unknown statistic {0:?}")]
    UnknownStatistic(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
