//! Mean-square approximation of iterated Itô and Stratonovich stochastic integrals
//! by multiple Fourier series in Legendre polynomials or trigonometric functions.
//!
//! * [`basis`] evaluates the orthonormal systems and their antiderivatives.
//! * [`coeffs`] builds coefficient tensors (exact rationals for Legendre) and persists them.
//! * [`errors`] gives exact and closed-form mean-square errors and minimal truncations.
//! * [`sampler`] draws Gaussian coordinates and evaluates truncated expansions.
//! * [`mc_oracle`] simulates fine Wiener paths, the coupled brute-force integrals and
//!   Monte Carlo error estimates.
//! * [`sde`] runs Milstein and order-1.5 Taylor–Itô schemes and convergence studies.

pub mod basis;
pub mod coeffs;
pub mod errors;
pub mod mc_oracle;
pub mod quadrature;
pub mod sampler;
pub mod sde;

pub use basis::{BasisKind, Interval};
pub use coeffs::{coeff, coeff_table, CoeffCache, CoeffTensor, MultiIndex};
pub use errors::{Calculus, ClosedForm, ErrorKind, ErrorReport, IntegralSpec};
pub use sampler::GaussianDraws;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },
    #[error("point {s} outside [{start}, {end}]")]
    OutOfInterval { s: f64, start: f64, end: f64 },
    #[error("multiplicity {k} outside the supported range")]
    MultiplicityOutOfRange { k: usize },
    #[error("basis index {j} exceeds cap {cap}")]
    IndexCap { j: usize, cap: usize },
    #[error("truncation {p} exceeds the dense limit {limit} for k = {k}")]
    DenseLimit { k: usize, p: usize, limit: usize },
    #[error("trigonometric quadrature did not converge (residual {residual:e})")]
    QuadratureFailed { residual: f64 },
    #[error("coefficient tensor too small in dimension {dim}: need {need}, have {have}")]
    TensorTooSmall { dim: usize, need: usize, have: usize },
    #[error("draws hold indices up to {have}, need {need}")]
    DrawsTooSmall { need: usize, have: usize },
    #[error("draws hold {have} channels, index {need} requested")]
    ChannelOutOfRange { need: usize, have: usize },
    #[error("tail variables required but missing")]
    TailsMissing,
    #[error("coincidence pattern not implemented: {0}")]
    PatternNotImplemented(String),
    #[error("requires pairwise distinct indices")]
    NotPairwiseDistinct,
    #[error("calculus not supported: {0}")]
    CalculusNotSupported(String),
    #[error("interval condition violated: {0}")]
    IntervalCondition(String),
    #[error("unknown formula `{0}`")]
    UnknownFormula(String),
    #[error("truncation scan exceeded {cap}")]
    ScanCapExceeded { cap: usize },
    #[error("error function increased at q = {q}")]
    NonMonotone { q: usize },
    #[error("grid of {n} cells too coarse for basis index {p}")]
    GridTooCoarse { n: usize, p: usize },
    #[error("{n_coarse} does not divide {n}")]
    Divisibility { n: usize, n_coarse: usize },
    #[error("step ladder needs at least 3 points, got {0}")]
    LadderTooShort(usize),
    #[error("problem does not supply {0}")]
    MissingDerivative(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("corrupt database header: {0}")]
    CorruptHeader(String),
    #[error("database version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("database checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
