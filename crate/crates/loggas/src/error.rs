//! Shared error type for the numerical modules.

/// Errors surfaced by the numerical modules.
///
/// Variants are deliberately specific: callers (in particular the CLI) map
/// them onto exit codes and diagnostics, and several tests assert that the
/// correct failure mode fires.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("moment order below 2n-2: need m_0..m_{needed}, have m_0..m_{have}")]
    InsufficientMoments { needed: usize, have: usize },
    #[error("unsupported potential family; use the numeric path")]
    UnsupportedPotential,
    #[error("derivative order {0} not supported (max 3)")]
    DerivativeOrder(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("z lies on the real grid support; use boundary_value")]
    UseBoundaryValue,
    #[error("non-uniform grid")]
    NonUniformGrid,
    #[error("zero-mean required")]
    ZeroMeanRequired,
    #[error("not a density: extrapolated value {0:.3e} below -1e-8")]
    NotADensity(f64),
    #[error("moment closure underflow: needed moment of order {0}")]
    ClosureUnderflow(usize),
    #[error("T_t source unavailable at t={0}")]
    SourceUnavailable(f64),
    #[error("self-consistent field iteration failed to converge at t={t}, z={z}")]
    FieldNotConverged { t: f64, z: num_complex::Complex64 },
    #[error("characteristic left the resolved region")]
    OutsideResolvedRegion,
    #[error("non-finite characteristic state")]
    NonFiniteCharacteristic,
    #[error("edge singularity: angle coordinate on {{0, pi}}")]
    EdgeSingularity,
    #[error("on-diagonal distribution: equal-time kernel at coincident points")]
    OnDiagonalDistribution,
    #[error("off-support argument x={0}")]
    OffSupport(f64),
    #[error("edge collision: continuation path within {0:.1e} of a branch point")]
    EdgeCollision(f64),
    #[error("collision unresolved: step size underflow below dt_min at t={0}")]
    CollisionUnresolved(f64),
    #[error("large-deviation radius exceeded: |lambda| = {0}")]
    RadiusExceeded(f64),
    #[error("non-finite sample in replica {0}")]
    NonFiniteSample(usize),
    #[error("non-decaying mode n={0}")]
    NonDecayingMode(i64),
    #[error("instability margin violated: dt * max drift = {0} >= 1/2")]
    InstabilityMargin(f64),
    #[error("step size underflow in adaptive integrator at t={0}")]
    StepUnderflow(f64),
    #[error("maximum step count exceeded in adaptive integrator")]
    TooManySteps,
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),
    #[error("bracketing failed: {0}")]
    BracketingFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
