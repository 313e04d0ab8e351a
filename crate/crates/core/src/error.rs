use thiserror::Error;

/// Every failure the library can report. Each variant belongs to exactly one
/// module, see [`Error::module`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("q = {q} is outside the domain of the {family} potential ({domain})")]
    Domain {
        family: &'static str,
        q: f64,
        domain: String,
    },

    #[error("equilibrium density cannot be normalized: {0}")]
    Normalization(String),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds {tolerance:e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    #[error("no real temperature: curvature {curvature} at q0 = {q0} is not positive")]
    NoRealTemperature { q0: f64, curvature: f64 },

    #[error("entropy undefined: amplitude density vanishes at q = {q}")]
    LogDomain { q: f64 },

    #[error("classically forbidden: E = {energy} < V(q) = {potential} at q = {q}")]
    ClassicallyForbidden { q: f64, energy: f64, potential: f64 },

    #[error("no classical motion: E = {energy} is below the potential minimum {v_min}")]
    NoClassicalMotion { energy: f64, v_min: f64 },

    #[error("orbit at E = {energy} is unbounded (no outer turning point)")]
    Unbounded { energy: f64 },

    #[error("E = {energy} lies on the separatrix V = {v_max} of a periodic potential")]
    Separatrix { energy: f64, v_max: f64 },

    #[error("motion class mismatch: {0}")]
    MotionClass(String),

    #[error("level n = {n}: target action {target} is not reachable on the search bracket")]
    BracketExhausted { n: i64, target: f64 },

    #[error("action is not increasing in energy near E = {energy}")]
    NonMonotoneAction { energy: f64 },

    #[error("shooting did not converge after {iterations} iterations (miss {miss:e})")]
    NoTrajectory { iterations: usize, miss: f64 },

    #[error("conjugate point: sin(omega t) = {sine:e} for t = {duration}")]
    ConjugatePoint { duration: f64, sine: f64 },

    #[error("box [{lo}, {hi}] too small: wall amplitude ratio {ratio:e} for level {level}")]
    BoxTooSmall {
        lo: f64,
        hi: f64,
        level: usize,
        ratio: f64,
    },

    #[error("grid too coarse: Richardson estimate {estimate:e} for level {level} exceeds {tolerance:e}")]
    Resolution {
        level: usize,
        estimate: f64,
        tolerance: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } | Error::Domain { .. } => "model",
            Error::Normalization(_) | Error::Accuracy { .. } => "wigner",
            Error::NoRealTemperature { .. } | Error::LogDomain { .. } => "equilibrium_thermo",
            Error::ClassicallyForbidden { .. }
            | Error::NoClassicalMotion { .. }
            | Error::Unbounded { .. }
            | Error::Separatrix { .. }
            | Error::MotionClass(_)
            | Error::BracketExhausted { .. }
            | Error::NonMonotoneAction { .. } => "bohr_sommerfeld",
            Error::NoTrajectory { .. } | Error::ConjugatePoint { .. } => "propagator",
            Error::BoxTooSmall { .. } | Error::Resolution { .. } | Error::Unsupported(_) => {
                "schrodinger_oracle"
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and positive, got {value}"),
        })
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}
