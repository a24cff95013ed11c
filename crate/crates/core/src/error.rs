use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("refinement level {level} exceeds guard {max}")]
    LevelTooLarge { level: usize, max: usize },
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("degenerate surface: triangle {triangle} area {area:e} below guard {guard:e}")]
    DegenerateSurface { triangle: usize, area: f64, guard: f64 },
    #[error("evaluation point lies on a panel edge or vertex")]
    EdgeSingularity,
    #[error("evaluation point lies on the panel and needs a trace side")]
    OnPanel,
    #[error("evaluation point lies inside the body")]
    InsideBody,
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("surface passes through the origin")]
    OriginOnSurface,
    #[error("oblique field vanishes on triangle {0}")]
    ZeroObliqueField(usize),
    #[error("iteration {iteration}: singular or ill-conditioned system (condition estimate {estimate:e})")]
    IllConditioned { iteration: usize, estimate: f64 },
    #[error("iteration {iteration}: solve residual {residual:e} too large")]
    Residual { iteration: usize, residual: f64 },
    #[error("iteration {iteration}: Marussi condition violated at vertex {vertex} (det {det:e})")]
    Marussi { iteration: usize, vertex: usize, det: f64 },
    #[error("mass matrix factorization failed")]
    MassFactorization,
    #[error("missing history entry {0}")]
    MissingHistory(usize),
    #[error("iteration {iteration}: {source}")]
    AtIteration { iteration: usize, source: alloc::boxed::Box<Error> },
}

impl Error {
    pub fn at_iteration(self, iteration: usize) -> Error {
        match self {
            Error::IllConditioned { estimate, .. } => Error::IllConditioned { iteration, estimate },
            Error::Residual { residual, .. } => Error::Residual { iteration, residual },
            Error::Marussi { vertex, det, .. } => Error::Marussi { iteration, vertex, det },
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration { iteration, source: alloc::boxed::Box::new(e) },
        }
    }
}
