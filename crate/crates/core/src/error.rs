use thiserror::Error;

/// Errors raised anywhere in the simulation and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (parametric point
    /// outside `[0,1]²`, knot outside the open interval, repeated angles, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A patch mapping is singular or inverted.
    #[error("geometry error in patch {patch} at ({xi:.6}, {eta:.6}): {message}")]
    Geometry {
        patch: usize,
        xi: f64,
        eta: f64,
        message: String,
    },

    /// The parameter combination produces overlapping or inverted patches.
    #[error("infeasible geometry: {0}")]
    GeometryInfeasible(String),

    /// A named parameter is outside its admissible range.
    #[error("parameter {name} = {value} outside bounds [{min}, {max}]")]
    Bounds {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// Newton did not reach the tolerance within the iteration budget.
    #[error("nonlinear solver did not converge after {iterations} iterations at beta = {beta} (residual history {history:?})")]
    NonConvergence {
        iterations: usize,
        beta: f64,
        history: Vec<f64>,
    },

    #[error("linear algebra error: {0}")]
    LinearAlgebra(String),

    /// Inputs that belong together were produced for different states.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
