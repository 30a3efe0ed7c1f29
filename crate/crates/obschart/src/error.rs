use thiserror::Error;

/// Errors produced by model evaluation, numerical kernels, and job orchestration.
#[derive(Debug, Error)]
pub enum Error {
    /// A data point fell outside the model's declared support.
    #[error("data point {point:?} lies outside the support of model `{model}`")]
    OutOfSupport { model: String, point: Vec<f64> },

    /// A parameter vector violated a model constraint.
    #[error("invalid parameter for model `{model}`: {reason}")]
    InvalidParameter { model: String, reason: String },

    /// Bad argument to an operation (empty sample, dimension mismatch, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quantity that must be finite came out NaN or infinite.
    #[error("non-finite value in {context} at theta={theta:?}, x={x:?}")]
    NonFinite {
        context: String,
        theta: Vec<f64>,
        x: Vec<f64>,
    },

    /// A numerical routine failed to converge or produced an inconsistent result.
    #[error("numeric error in {context}: {reason}")]
    Numeric { context: String, reason: String },

    /// The log-log slope fit did not resolve to an integer order.
    #[error(
        "order undetermined: slope {slope:.4} (nearest integer {nearest}), residual {residual:.4} \
         over {n_points} grid points; retry with a smaller t0"
    )]
    Undetermined {
        slope: f64,
        nearest: i64,
        residual: f64,
        n_points: usize,
    },

    /// A job or budget configuration cannot support the requested computation.
    #[error("configuration error: {0}")]
    Config(String),

    /// Config document failed to parse or validate.
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
