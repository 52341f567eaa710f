use alloc::string::String;
use alloc::vec::Vec;

/// Every failure the numerics can report.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("quadrature diverges: declared decay order {decay} does not exceed {needed}")]
    Divergence { decay: f64, needed: f64 },
    #[error("quadrature accuracy {achieved:e} above requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },
    #[error("kernel orthogonality violated: projection on {slot} is {value:e}")]
    Precondition { slot: String, value: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("representation error: {0}")]
    Representation(String),
    #[error("Jacobi operator degenerate: smallest singular value {sigma_min:e} (largest {sigma_max:e}), kernel dimension {}", kernel.len())]
    Degenerate {
        sigma_min: f64,
        sigma_max: f64,
        /// Near-kernel basis, one periodic section per entry, stored component-major.
        kernel: Vec<Vec<f64>>,
    },
    #[error("positivity violated: min value {value:e} at y = {y}")]
    Positivity { y: f64, value: f64 },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("in layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_layer(self, layer: usize) -> Self {
        Error::Layer { layer, source: alloc::boxed::Box::new(self) }
    }

    /// The innermost error, with layer wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Layer { source, .. } => source.root(),
            e => e,
        }
    }
}
