use iga_motor::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] Error),

    #[error("gradient check failed: {failed} of {total} coordinates above {threshold:e} (worst {worst:e})")]
    Gradcheck {
        failed: usize,
        total: usize,
        threshold: f64,
        worst: f64,
    },

    #[error("optimization aborted after repeated evaluation failures")]
    Aborted,

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) => match e {
                Error::Config(_) | Error::Bounds { .. } | Error::Json(_) => 2,
                Error::Geometry { .. } | Error::GeometryInfeasible(_) => 3,
                Error::NonConvergence { .. } | Error::LinearAlgebra(_) => 4,
                Error::Domain(_) | Error::Contract(_) | Error::Io(_) => 1,
            },
            CliError::Gradcheck { .. } => 5,
            CliError::Aborted => 4,
            CliError::Output { .. } => 1,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Model(Error::Geometry { .. } | Error::GeometryInfeasible(_)) => "geometry",
            CliError::Model(Error::NonConvergence { .. } | Error::LinearAlgebra(_)) | CliError::Aborted => {
                "solver"
            }
            CliError::Model(Error::Config(_) | Error::Bounds { .. } | Error::Json(_)) => "config",
            CliError::Model(_) => "internal",
            CliError::Gradcheck { .. } => "gradcheck",
            CliError::Output { .. } => "output",
        };
        serde_json::json!({ "error": kind, "code": self.exit_code(), "message": self.to_string() })
    }
}
