use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("near-degenerate eigenvalues at k={k}: {lower} vs {upper} (grid too coarse?)")]
    Degeneracy { k: usize, lower: f64, upper: f64 },

    #[error("no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("critical point at mu={mu} is degenerate: second derivative {second_derivative}")]
    Nondegeneracy { mu: f64, second_derivative: f64 },

    #[error("perturbation sum truncated too early: residual {residual:.3e} (decay {decay:?})")]
    Truncation {
        residual: f64,
        decay: Vec<(usize, f64)>,
    },

    #[error("integrator energy drift {drift:.3e} exceeds {limit:.1e}; reduce the step")]
    Accuracy { drift: f64, limit: f64 },

    #[error("orbit at eta'={eta} is homoclinic: the period diverges")]
    DivergentPeriod { eta: f64 },

    #[error("only the unit energy shell is supported (got energy {energy})")]
    UnsupportedEnergy { energy: f64 },

    #[error("quadrature failed to converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("consistency check failed: level residual {level_residual:.3e}, slope residual {slope_residual:.3e}")]
    Consistency {
        level_residual: f64,
        slope_residual: f64,
    },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
