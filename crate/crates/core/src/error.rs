use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("grid is not spectral-capable (every axis needs a power-of-two point count) and the field has no closed form")]
    NotSpectral,
    #[error("field has zero norm")]
    ZeroField,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),
    #[error("component `{0}` has no eigen energy")]
    MissingEigenEnergy(String),
    #[error("no closed-form overlap between `{0}` and `{1}`")]
    UnsupportedOverlap(String, String),
    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },
    #[error("state is not normalized: total mass {mass}")]
    Unnormalized { mass: f64 },
    #[error("event has zero probability")]
    ZeroProbability,
    #[error("event cell {cell} outside grid with {len} cells")]
    EventOutOfBounds { cell: usize, len: usize },
    #[error("marginal needs at least one axis")]
    EmptyAxes,
    #[error("masked cells carry probability mass {mass:e} (limit {limit:e})")]
    MaskedMass { mass: f64, limit: f64 },
    #[error("potential is unbounded at an unmasked cell ({0})")]
    UnboundedPotential(String),
    #[error("potential `{0}` has no gradient")]
    NonSmoothPotential(String),
    #[error("body index {body} out of range for {n_bodies} bodies")]
    BodyOutOfRange { body: usize, n_bodies: usize },
    #[error("convergence study needs at least 3 resolutions, got {0}")]
    InsufficientResolutions(usize),
    #[error("packet never reaches the detector: transmitted mass {mass:e}")]
    NoTransmission { mass: f64 },
}
