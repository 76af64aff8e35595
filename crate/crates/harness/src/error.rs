use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid configuration JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown figure '{0}' (expected fig2, fig3, fig4 or fig5)")]
    UnknownFigure(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: spinsense_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
}

impl From<spinsense_core::Error> for HarnessError {
    fn from(source: spinsense_core::Error) -> Self {
        HarnessError::Core {
            context: "invalid input".into(),
            source,
        }
    }
}

impl HarnessError {
    pub fn at_point(index: usize, source: spinsense_core::Error) -> Self {
        HarnessError::Core {
            context: format!("grid point {index}"),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for anything wrong with the inputs, 3 for numerical or analysis
    /// failures during a run, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use spinsense_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Json(_) | HarnessError::UnknownFigure(_) => 2,
            HarnessError::Core { source, .. } => match source {
                E::Numerical { .. } | E::PoorLinearFit { .. } | E::RequiresUnwrap { .. } | E::InsufficientData { .. } => 3,
                _ => 2,
            },
            HarnessError::Io { .. } | HarnessError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
