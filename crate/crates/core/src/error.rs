use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cluster size {n_spins} outside the supported range 1..={max}")]
    Size { n_spins: usize, max: usize },

    #[error("invalid cluster spec: {0}")]
    InvalidSpec(String),

    #[error("site index {site} out of range for a {n_spins}-spin cluster")]
    SiteIndex { site: usize, n_spins: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not Hermitian (max |A - A†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("expectation value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("pair state is not X-shaped (max forbidden entry {deviation:e})")]
    NotXForm { deviation: f64 },

    #[error("negative eigenvalue {0:e} in a quantity that must be positive semidefinite")]
    NegativeSpectrum(f64),

    #[error("concurrence {0} outside [0, 1]")]
    ConcurrenceRange(f64),

    #[error("subsystem `{0}` is not defined for this cluster")]
    MissingSubsystem(String),

    #[error("unknown quantity `{0}`")]
    UnknownQuantity(String),

    #[error("units error: {0}")]
    Units(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no data rows in {0}")]
    EmptyData(PathBuf),

    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
