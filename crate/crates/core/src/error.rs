use std::path::PathBuf;

use num_complex::Complex64;

/// Errors raised anywhere in the solver. The message prefix names the
/// subsystem that produced it.
#[derive(Debug, thiserror::Error)]
pub enum FsiError {
    #[error("model: frequency {0} is not in the open right half-plane")]
    NotInRightHalfPlane(Complex64),

    #[error("model: invalid material: {0}")]
    InvalidMaterial(String),

    #[error("model: invalid incident field: {0}")]
    InvalidIncident(String),

    #[error("model: evaluation point coincides with the point source")]
    SingularPoint,

    #[error("mesh: parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh: degenerate element {index}")]
    DegenerateElement { index: usize },

    #[error("mesh: surface is not closed (edge {a}-{b} has {count} incident triangles)")]
    OpenSurface { a: usize, b: usize, count: usize },

    #[error("mesh: inconsistent orientation across edge {a}-{b}")]
    InconsistentOrientation { a: usize, b: usize },

    #[error("mesh: tetrahedron {index} is inverted or flat")]
    InvertedElement { index: usize },

    #[error("mesh: {0}")]
    MeshMismatch(String),

    #[error("bem: quadrature configuration: {0}")]
    Quadrature(String),

    #[error("bem: point at distance {distance:.3e} from the boundary is inside the near field (minimum {minimum:.3e})")]
    NearField { distance: f64, minimum: f64 },

    #[error("solver: singular system: {0}")]
    Singular(String),

    #[error("solver: residual check failed: relative residual {0:.3e}")]
    Residual(f64),

    #[error("cq: grid configuration: {0}")]
    Grid(String),

    #[error("cq: transfer map failed at frequency index {index}: {source}")]
    Transfer {
        index: usize,
        #[source]
        source: Box<FsiError>,
    },

    #[error("cq: inverse transform: {0}")]
    Inversion(String),

    #[error("verify: {0}")]
    Fit(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FsiError>;

impl FsiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FsiError::Io {
            path: path.into(),
            source,
        }
    }
}
