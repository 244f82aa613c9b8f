use thiserror::Error;

/// Errors produced by mesh I/O, target queries and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {path}:{line}: {msg}")]
    ObjParse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("mesh: {path}:{line}: non-triangle face with {arity} vertices")]
    NonTriangleFace {
        path: String,
        line: usize,
        arity: usize,
    },

    #[error("mesh: non-manifold edge ({a}, {b}) with more than two adjacent faces")]
    NonManifoldEdge { a: usize, b: usize },

    #[error("mesh: face {face} references invalid vertex index {index} (vertex count {count})")]
    InvalidVertexIndex {
        face: usize,
        index: usize,
        count: usize,
    },

    #[error("mesh: vertex index {index} out of range (vertex count {count})")]
    VertexOutOfRange { index: usize, count: usize },

    #[error("mesh: {0}")]
    InvalidMesh(String),

    #[error("target: operation requires {expected:?} mode but target is {actual:?}")]
    WrongMode {
        expected: crate::targets::Mode,
        actual: crate::targets::Mode,
    },

    #[error("target: vanishing distance gradient at ({x}, {y}, {z}); point is on or near the medial axis")]
    VanishingGradient { x: f64, y: f64, z: f64 },

    #[error("target: query ({x}, {y}) outside heightfield domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("target: {0}")]
    InvalidTarget(String),

    #[error("metric: matrix power of an indefinite operator (eigenvalue {eigenvalue})")]
    NegativeEigenvalue { eigenvalue: f64 },

    #[error("metric: degenerate face {face} (singular tangent map)")]
    DegenerateFace { face: usize },

    #[error("metric: zero-length edge ({a}, {b})")]
    ZeroLengthEdge { a: usize, b: usize },

    #[error("metric: degenerate boundary frame at vertex {vertex}")]
    DegenerateFrame { vertex: usize },

    #[error("flow: {0}")]
    SolverFailure(String),

    #[error("config: {0}")]
    InvalidConfig(String),

    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
