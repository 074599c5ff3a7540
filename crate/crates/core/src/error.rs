use thiserror::Error;

/// Errors raised by mesh construction, the solver and the driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate element {elem}: repeated vertex index")]
    DegenerateElement { elem: usize },
    #[error("inverted element {elem}: measure {measure:e} is not positive")]
    InvertedElement { elem: usize, measure: f64 },
    #[error("element {elem} references vertex {vertex} but the mesh has {n_vertices} vertices")]
    VertexOutOfRange { elem: usize, vertex: usize, n_vertices: usize },
    #[error("elements {first} and {second} are duplicates")]
    DuplicateElement { first: usize, second: usize },
    #[error("edge ({a}, {b}) is shared by more than two elements")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("periodic boundary edge of element {elem} at ({x}, {y}) has no matching partner")]
    UnmatchedPeriodic { elem: usize, x: f64, y: f64 },
    #[error("connectivity mismatch: {0}")]
    Connectivity(String),
    #[error("unsupported polynomial degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(usize),
    #[error("non-finite value in {context} (element {elem})")]
    NonFinite { context: &'static str, elem: usize },
    #[error("PP precondition violated; reduce CFL (element {elem}, cell average {average:e})")]
    PositivityPrecondition { elem: usize, average: f64 },
    #[error("blended mesh inverted at sigma = {sigma} in element {elem}")]
    BlendInversion { sigma: f64, elem: usize },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("at step {step}, t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short category name, used for CLI exit diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DegenerateElement { .. }
            | Error::InvertedElement { .. }
            | Error::VertexOutOfRange { .. }
            | Error::DuplicateElement { .. }
            | Error::NonManifoldEdge { .. }
            | Error::UnmatchedPeriodic { .. }
            | Error::Connectivity(_) => "mesh",
            Error::UnsupportedDegree(_) => "basis",
            Error::NonFinite { .. } | Error::PositivityPrecondition { .. } => "solver",
            Error::BlendInversion { .. } => "remap",
            Error::InvalidMetric(_) => "adapt",
            Error::Config(_) | Error::Parse { .. } => "config",
            Error::Io(_) => "io",
            Error::Step { source, .. } => source.category(),
        }
    }
}
