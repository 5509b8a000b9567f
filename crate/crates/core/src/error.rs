use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("harmonic index {index} exceeds the configured cap {cap}")]
    HarmonicCap { index: i32, cap: i32 },

    #[error("linear system is singular (pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },

    #[error("drive couples harmonics {index} apart; continued fraction needs a tridiagonal system")]
    NotTridiagonal { index: i32 },

    #[error("harmonic truncation did not converge: change {change:.3e} at n_max = {n_max}")]
    NoConvergence { n_max: usize, change: f64 },

    #[error("integrator failure at t = {t:.6e} s: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("target transmission {target} is not bracketed for densities up to {max_density:.3e} m^-3")]
    NotBracketed { target: f64, max_density: f64 },

    #[error("polynomial fit is ill-conditioned (degree {degree}, {points} points)")]
    IllConditioned { degree: usize, points: usize },

    #[error("velocity node {node} (v = {velocity:.3} m/s): {source}")]
    AtVelocity {
        node: usize,
        velocity: f64,
        #[source]
        source: Box<SimError>,
    },

    #[error("layer {layer}: {source}")]
    AtLayer {
        layer: usize,
        #[source]
        source: Box<SimError>,
    },

    #[error("sweep point {index} (x = {x}): {source}")]
    AtPoint {
        index: usize,
        x: f64,
        #[source]
        source: Box<SimError>,
    },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config validation: `{key}` {message}")]
    ConfigValidation { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Strips location wrappers and returns the innermost error.
    pub fn root(&self) -> &SimError {
        match self {
            SimError::AtVelocity { source, .. }
            | SimError::AtLayer { source, .. }
            | SimError::AtPoint { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            SimError::ConfigParse { .. } | SimError::ConfigValidation { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self.root(), SimError::Io(_))
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
