use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("state space 2^{n} exceeds enumeration limit 2^{limit}")]
    EnumerationLimit { n: u32, limit: u32 },

    #[error("spin vector has length {got}, instance has n = {expected}")]
    SpinLength { expected: usize, got: usize },

    #[error("spin values must be +1 or -1 (found {0})")]
    BadSpin(i8),

    #[error("energy table contains negative energy {energy} at state {state}; shift it to non-negative first")]
    NegativeEnergy { state: u64, energy: i64 },

    #[error("density of states is inconsistent: {0}")]
    InvalidDos(String),

    #[error("no states with E = 0 (N_0 = 0)")]
    NoSolutions,

    #[error("every state is a solution (N_0 = N); partition sums vanish")]
    DegenerateDos,

    #[error("generator produced {found} of {requested} instances in {attempts} attempts (cap reached)")]
    AttemptCap {
        requested: usize,
        found: usize,
        attempts: u64,
    },

    #[error("characteristic function evaluated at a pole (lambda = {lambda}, z E = {pole})")]
    AtPole { lambda: f64, pole: f64 },

    #[error("lambda = {lambda} is not a root of the characteristic equation (residual {residual:.3e})")]
    NotARoot { lambda: f64, residual: f64 },

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("delta = {delta} too large: validity interval requires delta < {max}")]
    DeltaTooLarge { delta: f64, max: f64 },

    #[error("gap sample g({z}) = {value} is not positive")]
    NonPositiveGap { z: f64, value: f64 },

    #[error("quadrature failed to converge ({0})")]
    Quadrature(String),

    #[error("schedule grid must have at least {min} points (got {got})")]
    GridTooSmall { got: usize, min: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("time step underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {steps} accepted steps")]
    StepLimit { steps: usize },

    #[error("state norm drifted by {drift:.3e} (tolerance {tol:.3e})")]
    NormDrift { drift: f64, tol: f64 },

    #[error("run time cap {cap:.3e} exceeded while searching for the target success probability")]
    TimeCap { cap: f64 },

    #[error("eigensolver did not converge ({iterations} iterations, best residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("covariance matrix is not positive semidefinite (eigenvalue {min_eig:.3e} below tolerance)")]
    NotPsd { min_eig: f64 },

    #[error("variance came out negative beyond roundoff ({value:.3e})")]
    NegativeVariance { value: f64 },

    #[error("mismatched dimensions: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
