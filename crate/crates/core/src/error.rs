use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("plane wave k = {k} is not a lattice mode of a ring of length {length} (k*L/2pi = {winding})")]
    IncommensurateMode { k: f64, length: f64, winding: f64 },

    #[error("width {sigma} is below two lattice spacings ({dx})")]
    DegenerateWidth { sigma: f64, dx: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation requires ring topology")]
    NotARing,

    #[error("gauge function is not single-valued on the ring")]
    NotSingleValued,

    #[error("every site falls below the density threshold {threshold}")]
    AllMasked { threshold: f64 },

    #[error("zero-momentum overlap {overlap:e} is too small to post-select on")]
    ZeroOverlap { overlap: f64 },

    #[error("post-selection site {index} is masked")]
    MaskedSite { index: usize },

    #[error("site index {index} out of range for {n} sites")]
    SiteOutOfRange { index: usize, n: usize },

    #[error("pointer grid too narrow: {mass:e} of the pointer weight lies next to the boundary")]
    PointerGridTooNarrow { mass: f64 },

    #[error("post-selected probability is zero")]
    ZeroProbability,

    #[error("coupling g is zero")]
    ZeroCoupling,

    #[error("empty sample list")]
    EmptySamples,

    #[error("flux twist must be zero on an open grid")]
    TwistOnOpenGrid,

    #[error("tridiagonal solve broke down: pivot magnitude {pivot:e}")]
    SolverBreakdown { pivot: f64 },

    #[error("{0}")]
    Config(String),
}
