use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("JSON parse error at byte {offset}: {message}")]
    Json { offset: usize, message: String },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("no tissue: {found} tissue pixels after background filtering, need at least {required}")]
    NoTissue { found: usize, required: usize },

    #[error("degenerate stain matrix: {0}")]
    DegenerateStainMatrix(String),

    #[error("empty mask")]
    EmptyMask,

    #[error("empty sample")]
    EmptySample,

    #[error("no gold-standard instances to evaluate against")]
    EmptyGold,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("input nuclei {0} and {1} overlap")]
    OverlappingNuclei(usize, usize),

    #[error("length mismatch: {nuclei} nuclei vs {cells} cells")]
    LengthMismatch { nuclei: usize, cells: usize },

    #[error("instance has no cell polygon")]
    MissingCell,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Builds a [`Error::Json`] carrying the byte offset of a serde_json failure.
    pub(crate) fn from_json(err: serde_json::Error, text: &str) -> Self {
        let offset = byte_offset(text, err.line(), err.column());
        Error::Json {
            offset,
            message: err.to_string(),
        }
    }
}

// serde_json reports 1-based line and column (column counted in bytes).
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}
