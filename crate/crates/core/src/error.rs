use alloc::string::String;

/// Errors raised by constructors, operators and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("synthetic dimension m = {m} must exceed the manifold dimension n = {n}")]
    DimensionTooSmall { m: f64, n: usize },
    #[error("resolution {0} is below the minimum of 8 nodes per axis")]
    ResolutionTooSmall(usize),
    #[error("metric is not positive definite at node {node} (smallest eigenvalue {eig:e})")]
    NonSpdMetric { node: usize, eig: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cutoff region {0}")]
    BadCutoffRegion(String),
    #[error("operation `{0}` is not supported on this geometry")]
    Unsupported(&'static str),
    #[error("field `{name}` has length {len}, manifold has {nodes} nodes")]
    LengthMismatch { name: String, len: usize, nodes: usize },
    #[error("field `{name}` is bound to the metric at t = {field_time}, operator uses t = {metric_time}")]
    StaleMetric { name: String, field_time: f64, metric_time: f64 },
    #[error("non-finite value in `{name}` at node {node}, t = {time}")]
    NonFinite { name: String, node: usize, time: f64 },
    #[error("metric degenerated at node {node}, t = {time} (smallest eigenvalue {eig:e})")]
    MetricDegenerated { node: usize, time: f64, eig: f64 },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("snapshot cadence too coarse: {0}")]
    CadenceTooCoarse(String),
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
