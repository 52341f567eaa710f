use concentra_core::Error;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{failed} invariant check(s) failed")]
    ChecksFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => 2,
            CliError::Io(_) | CliError::ChecksFailed { .. } => 3,
            CliError::Core(e) => match e.root() {
                Error::Domain(_) | Error::Validation(_) => 2,
                Error::Degenerate { .. } | Error::Positivity { .. } => 4,
                _ => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Io(_) => "io",
            CliError::ChecksFailed { .. } => "checks_failed",
            CliError::Core(e) => match e.root() {
                Error::Domain(_) => "domain",
                Error::Validation(_) => "validation",
                Error::Divergence { .. } => "divergence",
                Error::Accuracy { .. } => "accuracy",
                Error::Precondition { .. } => "precondition",
                Error::Numerical(_) => "numerical",
                Error::Representation(_) => "representation",
                Error::Degenerate { .. } => "degenerate",
                Error::Positivity { .. } => "positivity",
                Error::Resolution(_) => "resolution",
                Error::Layer { .. } => "layer",
            },
        }
    }

    /// Structured form written to the error stream.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } });
        if let CliError::Core(e) = self {
            match e.root() {
                Error::Positivity { y, value } => v["error"]["detail"] = json!({ "y": y, "value": value }),
                Error::Degenerate { sigma_min, sigma_max, kernel } => {
                    v["error"]["detail"] = json!({ "sigma_min": sigma_min, "sigma_max": sigma_max, "kernel_dimension": kernel.len() })
                }
                _ => {}
            }
            if let Error::Layer { layer, .. } = e {
                v["error"]["layer"] = json!(layer);
            }
        }
        v
    }
}
