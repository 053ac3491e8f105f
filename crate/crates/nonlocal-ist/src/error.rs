use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IstError {
    #[error("spectral point z = 0 is not admissible")]
    ZeroSpectralPoint,

    #[error("phase sum θ₊+θ₋ = {0} is neither 0 nor π (mod 2π)")]
    PhaseSumError(f64),

    #[error("α = {got} inconsistent with the background law (expected {expected})")]
    AlphaMismatch { got: f64, expected: f64 },

    #[error("equation kind {kind} requires σ = {expected}, got {got}")]
    SigmaMismatch { kind: &'static str, expected: i8, got: i8 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate phase θ₊ = {0}")]
    DegeneratePhase(f64),

    #[error("tan θ₊ is infinite at θ₊ = π/2 with α ≠ 0")]
    TanPole,

    #[error("cot θ₊ is infinite at sin θ₊ = 0 with α ≠ 0")]
    CotPole,

    #[error("velocity denominator vanishes: {0}")]
    VelocityPole(f64),

    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    #[error("|λ(z)| = {0:e} too close to a branch point")]
    BranchPointProximity(f64),

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("λ(λ+k) ≈ 0: degenerate Wronskian normalizer")]
    DegenerateNormalizer,

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("clustered zeros near {0:?}")]
    ClusteredZeros(Vec<(f64, f64)>),

    #[error("Neumann iterates grow (increment {0:e})")]
    Divergence(f64),

    #[error("z lies within {0:e} of the contour")]
    ContourPole(f64),

    #[error("log(1 ± b²) crosses its branch cut at ξ = {0}")]
    LogBranch(f64),

    #[error("repeated zero at index {0}")]
    RepeatedZero(usize),

    #[error("reflectionless constraint violated: relative defect {0:e}")]
    ConstraintViolated(f64),

    #[error("improper eigenvalue: {0}")]
    ImproperEigenvalue(String),

    #[error("pole in the time-evolution exponent at z = {0}")]
    KPole(String),

    #[error("scattering data carries reflection samples")]
    NotReflectionless,

    #[error("missing derivative a'(z_{0})")]
    MissingDerivative(usize),

    #[error("singular point at (x, t) = ({x}, {t})")]
    SingularPoint { x: f64, t: f64 },

    #[error("grid too coarse: Richardson ratio {0:.2} < 8")]
    GridTooCoarse(f64),

    #[error("grid is not symmetric about the origin")]
    AsymmetricGrid,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, IstError>;
