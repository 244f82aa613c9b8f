//! Adaptive mesh optimization over surface targets.
//!
//! Given an existing triangle mesh and a target surface (an analytic or
//! grid-sampled signed distance field, or a heightfield), the flow in this
//! crate relocates vertices so the mesh adaptively approximates the target:
//! dense and stretched where the surface bends, coarse where it is flat.
//! Connectivity is never modified — only vertex positions move.
//!
//! The vertex update is an implicit Euler step of a diffusion process whose
//! edge weights come from a per-face curvature tensor (the positivized shape
//! operator raised to an anisotropy exponent), followed by a projection of
//! every vertex back onto the target. A cheaper spring-graph variant replaces
//! the tensor weights with scalar per-edge curvatures and is considerably
//! more robust on poor initial meshes.
//!
//! Modules mirror the pipeline:
//!
//! - [`mesh`]: indexed triangle mesh, OBJ/PLY I/O, topology queries
//! - [`targets`]: surface targets with distance/gradient/projection queries
//! - [`metric`]: shape operators, per-edge curvatures, boundary frames
//! - [`flow`]: the two solvers, sparse assembly, energy, iteration loop
//! - [`diagnostics`]: density fields, aspect ratios, flipped-face detection
//! - [`shapes`]: procedural meshes used by tests, benches and examples

pub mod diagnostics;
mod error;
pub mod flow;
pub mod mesh;
pub mod metric;
pub mod shapes;
pub mod targets;

pub use error::Error;
pub use flow::{run_flow, EnergyTrace, FlowConfig, FlowState, SolverKind};
pub use mesh::TriMesh;
pub use metric::{EdgeCurvatures, FaceMetric, Sym2};
pub use targets::{Mode, SurfaceTarget};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// 3D point in world units.
pub type Point3 = nalgebra::Point3<f64>;
/// 3D vector.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 2D point (heightfield domains, tangent coordinates).
pub type Point2 = nalgebra::Point2<f64>;
/// 2D vector.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 3x3 matrix (ambient-space tensors).
pub type Mat3 = nalgebra::Matrix3<f64>;
/// 2x2 matrix (tangent-space maps).
pub type Mat2 = nalgebra::Matrix2<f64>;
