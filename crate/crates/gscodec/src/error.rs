use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("PLY parse error at byte {offset}: {message}")]
    PlyParse { offset: usize, message: String },

    #[error("PLY is missing required property `{0}`")]
    PlyMissingProperty(String),

    #[error("cloud is empty")]
    EmptyCloud,

    #[error("zero-norm quaternion at point {0}")]
    ZeroQuaternion(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quantization range is degenerate (v_min == v_max == {0}); store as a constant chunk instead")]
    DegenerateRange(f32),

    #[error("symbol {symbol} out of range for {bits}-bit scheme")]
    SymbolOutOfRange { symbol: u32, bits: u8 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid {w}x{h} too small for {n} points")]
    GridTooSmall { w: usize, h: usize, n: usize },

    #[error("missing quantization scheme for attribute `{0}`")]
    MissingScheme(String),

    #[error("PNG error: {0}")]
    Png(String),

    #[error("ANS stream truncated")]
    AnsTruncated,

    #[error("container: bad magic")]
    BadMagic,

    #[error("container: unsupported version {0}")]
    BadVersion(u16),

    #[error("container: checksum mismatch in chunk `{0}`")]
    ChecksumMismatch(String),

    #[error("container: truncated at byte {0}")]
    Truncated(usize),

    #[error("container: malformed header: {0}")]
    MalformedHeader(String),

    #[error("container: missing chunk `{0}`")]
    MissingChunk(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
