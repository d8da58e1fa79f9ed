use thiserror::Error;

/// Failures raised by the toolkit. Variants that correspond to a violated
/// ellipticity hypothesis name the condition they witness.
#[derive(Debug, Error)]
pub enum WedgeError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("condition (9.1) violated: w-symbol not invertible ({0})")]
    WEllipticity(String),

    #[error("condition (9.2) violated: indicial root {root} lies on the weight line Im = ±1/2 (distance {distance:.3e})")]
    WeightLine { root: String, distance: f64 },

    #[error("numerical rank error: {0}")]
    NumericalRank(String),

    #[error("contour error: {0}")]
    Contour(String),

    #[error("degenerate symbol: {0}")]
    DegenerateSymbol(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("trace extraction error: {0}")]
    Extraction(String),

    #[error("smoothness violation: {0}")]
    Smoothness(String),

    #[error("differentiation error: {0}")]
    Differentiation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl WedgeError {
    /// True for errors that witness a failed mathematical hypothesis, as
    /// opposed to malformed input or numerical breakdown.
    pub fn is_condition_failure(&self) -> bool {
        matches!(
            self,
            WedgeError::WEllipticity(_) | WedgeError::WeightLine { .. } | WedgeError::Smoothness(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, WedgeError>;
